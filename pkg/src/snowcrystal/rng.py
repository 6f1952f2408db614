"""Counter-based random streams.

All randomness in this package flows through Philox generators keyed by
(seed, domain, index).  A draw is a pure function of its key, never of how
many draws happened before it, which is what makes runs reproducible under
any worker count: each consumer derives its own generator instead of sharing
a stateful stream.

Domains keep independent uses of the same seed from colliding (the noise
field at step 3 must not overlap the bootstrap replicate 3).
"""

from __future__ import annotations

import numpy as np

# Domain tags for keyed generators.  16 bits reserved; index gets the rest.
DOMAIN_NOISE = 1
DOMAIN_DATASET = 2
DOMAIN_BOOTSTRAP = 3
DOMAIN_BENCH = 4

_MASK64 = (1 << 64) - 1


def keyed_generator(seed: int, domain: int, index: int = 0) -> np.random.Generator:
    """Return a Generator determined entirely by (seed, domain, index).

    seed occupies the first Philox key word; domain (16 bits) and index
    (48 bits) pack into the second.
    """
    if not 0 <= domain < (1 << 16):
        raise ValueError(f"domain out of range: {domain}")
    if not 0 <= index < (1 << 48):
        raise ValueError(f"index out of range: {index}")
    key = np.array([seed & _MASK64, (domain << 48) | index], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


_upper_masks: dict[int, np.ndarray] = {}


def _upper_mask(side: int) -> np.ndarray:
    mask = _upper_masks.get(side)
    if mask is None:
        idx = np.arange(side)
        mask = idx[:, None] <= idx[None, :]
        _upper_masks[side] = mask
    return mask


def noise_uniforms(seed: int, step: int, side: int) -> np.ndarray:
    """Per-cell uniforms for the noise sub-step of a given raw step.

    One (side, side) array is drawn in C order from the (seed, step)-keyed
    stream, then symmetrized so that cell (i, j) reads the draw of its
    canonical pair (min(i, j), max(i, j)).  The value at a cell therefore
    depends only on (seed, step, cell), and the field is invariant under the
    transpose, which keeps folded-wedge dynamics exactly symmetric.
    """
    gen = keyed_generator(seed, DOMAIN_NOISE, step)
    u = gen.random((side, side))
    return np.where(_upper_mask(side), u, u.T)


def mix64(x: int) -> int:
    """SplitMix64 finalizer: a fixed 64-bit avalanche hash.

    Used for seed-based dataset splits; stable across platforms and numpy
    versions because it is plain integer arithmetic.
    """
    z = (x + 0x9E3779B97F4A7C15) & _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return (z ^ (z >> 31)) & _MASK64
