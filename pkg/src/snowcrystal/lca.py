"""Stochastic lattice model of snow-crystal growth on the folded wedge.

State lives on the wedge {0 <= i, j < side} of the hexagonal lattice
(see grid.py for the folding conventions).  Each cell carries four fields:

    attached        bool, part of the crystal
    boundary_mass   quasi-liquid mass on unattached cells
    crystal_mass    ice; 0 on unattached cells except transiently never
    diffusive_mass  vapor; always 0 on attached cells

A raw step applies five sub-operations in a fixed order:

    diffusion   each unattached cell's vapor becomes the average of its own
                and its six neighbors' values; attached neighbors reflect
                the cell's own value back.  Out-of-wedge neighbors fold
                across the symmetry rays; far edges either reflect (sealed)
                or pin the outermost ring back to rho (reservoir).
    freezing    boundary cells (unattached with an attached neighbor)
                convert vapor: a fraction kappa to crystal_mass, the rest
                to boundary_mass.
    attachment  a boundary cell joins the crystal when
                  1-2 attached neighbors and boundary_mass >= beta_attach,
                  3 attached neighbors and (boundary_mass >= 1, or
                    boundary_mass >= alpha and the vapor in its 7-cell
                    neighborhood is below theta_vapor), or
                  4+ attached neighbors (holes always fill).
                On attachment boundary_mass converts to crystal_mass.
    melting     boundary cells return a fraction mu of boundary_mass and
                gamma_melt of crystal_mass to vapor.
    noise       each unattached cell's vapor is multiplied by 1 +/- sigma
                with equal probability, drawn from a counter-based stream
                keyed by (seed, step) and symmetrized across the wedge
                bisector (rng.noise_uniforms).

All sub-steps are pure: they return new states and never modify their
inputs.  Neighbor sums accumulate as transpose-paired two-term sums
(E + N), then (W + S), then (NE + SW), added to the cell's own value in
that order.  Since float addition commutes, each pair reads identically
from a cell and its transpose partner, which makes every update exactly
transpose-symmetric at the bit level; with the symmetrized noise field the
whole run is, by induction, bitwise invariant under the transpose.  Each
update also keeps the exact arithmetic expression shapes documented here,
so independent scalar implementations can reproduce the engine bit for
bit.

The symmetry-weighted total mass (total_mass) is conserved exactly by
diffusion with sealed edges and is redistributed, never created, by the
other sub-steps; the only sources and sinks are the reservoir edge and the
noise term.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from . import rng
from .errors import DegenerateRunError
from .grid import FOLD_MODES, NEIGHBOR_OFFSETS, wedge_orbit_weights

BOUNDARY_MODES = ("reservoir", "sealed")

# Canonical parameter order, used by the trajectory file format.
PARAM_ORDER = (
    "rho",
    "beta_attach",
    "alpha",
    "theta_vapor",
    "kappa",
    "mu",
    "gamma_melt",
    "sigma_noise",
)

# Reference range of vapor densities the shipped defaults are calibrated
# for; the CLI refuses values outside it unless explicitly overridden.
RHO_REFERENCE_RANGE = (0.35, 0.65)

MIN_SIDE = 8


@dataclass(frozen=True)
class LcaParams:
    """The eight model parameters.

    rho is the ambient vapor density; beta_attach, alpha and theta_vapor
    gate attachment; kappa controls freezing; mu and gamma_melt control
    melting; sigma_noise scales the multiplicative vapor noise.
    """

    rho: float
    beta_attach: float
    alpha: float
    theta_vapor: float
    kappa: float
    mu: float
    gamma_melt: float
    sigma_noise: float

    def validate(self) -> None:
        for name in PARAM_ORDER:
            value = getattr(self, name)
            if not np.isfinite(value):
                raise ValueError(f"parameter {name} must be finite, got {value!r}")
        if self.rho <= 0:
            raise ValueError("rho must be positive")
        if self.beta_attach <= 0:
            raise ValueError("beta_attach must be positive")
        if self.alpha < 0:
            raise ValueError("alpha must be nonnegative")
        if self.theta_vapor < 0:
            raise ValueError("theta_vapor must be nonnegative")
        if not 0 < self.kappa <= 1:
            raise ValueError("kappa must lie in (0, 1]")
        if not 0 <= self.mu < 1:
            raise ValueError("mu must lie in [0, 1)")
        if not 0 <= self.gamma_melt < 1:
            raise ValueError("gamma_melt must lie in [0, 1)")
        if not 0 <= self.sigma_noise < 1:
            raise ValueError("sigma_noise must lie in [0, 1)")

    def as_tuple(self) -> tuple[float, ...]:
        return tuple(float(getattr(self, name)) for name in PARAM_ORDER)

    @classmethod
    def from_tuple(cls, values) -> "LcaParams":
        if len(values) != len(PARAM_ORDER):
            raise ValueError(f"expected {len(PARAM_ORDER)} parameters")
        return cls(**{name: float(v) for name, v in zip(PARAM_ORDER, values)})


@dataclass(frozen=True)
class RunConfig:
    """Everything about a run that is not a model parameter."""

    side: int = 128
    max_steps: int = 20000
    snapshot_every: int = 50
    halt_margin: int = 4
    boundary_mode: str = "reservoir"
    seed: int = 0
    fold_mode: str = "reflect"

    def validate(self) -> None:
        if self.side < MIN_SIDE:
            raise ValueError(f"side must be at least {MIN_SIDE}, got {self.side}")
        if self.max_steps < 0:
            raise ValueError("max_steps must be nonnegative")
        if self.snapshot_every < 1:
            raise ValueError("snapshot_every must be at least 1")
        if not 1 <= self.halt_margin < self.side - 1:
            raise ValueError("halt_margin must lie in [1, side - 1)")
        if self.boundary_mode not in BOUNDARY_MODES:
            raise ValueError(f"unknown boundary_mode: {self.boundary_mode!r}")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must fit in 64 bits")
        if self.fold_mode not in FOLD_MODES:
            raise ValueError(f"unknown fold_mode: {self.fold_mode!r}")


@dataclass
class LcaState:
    """Wedge fields at one raw step.  Arrays are treated as immutable."""

    attached: np.ndarray
    boundary_mass: np.ndarray
    crystal_mass: np.ndarray
    diffusive_mass: np.ndarray
    step_index: int = 0


@dataclass
class Trajectory:
    """A recorded run: snapshots of the attached field every snapshot_every
    raw steps, always including step 0 and the final state."""

    side: int
    frames: np.ndarray  # (frame_count, side, side) bool
    params: LcaParams
    seed: int
    snapshot_every: int
    source: str = "lca"
    raw_steps: int | None = field(default=None, compare=False)

    @property
    def frame_count(self) -> int:
        return int(self.frames.shape[0])


def init_state(params: LcaParams, cfg: RunConfig) -> LcaState:
    """Seed crystal at the origin, vapor density rho everywhere else."""
    params.validate()
    cfg.validate()
    s = cfg.side
    attached = np.zeros((s, s), dtype=bool)
    attached[0, 0] = True
    crystal = np.zeros((s, s))
    crystal[0, 0] = 1.0
    diffusive = np.full((s, s), float(params.rho))
    diffusive[0, 0] = 0.0
    return LcaState(
        attached=attached,
        boundary_mass=np.zeros((s, s)),
        crystal_mass=crystal,
        diffusive_mass=diffusive,
        step_index=0,
    )


def _extend(a: np.ndarray, far, mode: str) -> np.ndarray:
    """Pad a wedge field with one ghost ring.

    Ghosts along the two symmetry rays hold the folded real cells (reflected
    in "reflect" mode, rotated in "rotate" mode; the two read transposed
    cells).  Ghosts along the far walls hold `far`.  The (-1, -1) and
    (side, side) corners are never read by any neighbor offset.
    """
    s = a.shape[0]
    out = np.empty((s + 2, s + 2), dtype=a.dtype)
    out[1:-1, 1:-1] = a
    out[-1, :] = far
    out[:, -1] = far
    out[0, 0] = far
    if mode == "reflect":
        out[2:, 0] = a[:, 1]
        out[0, 2:] = a[1, :]
    else:
        out[2:, 0] = a[1, :]
        out[0, 2:] = a[:, 1]
    out[1, 0] = a[1, 0]
    out[0, 1] = a[0, 1]
    return out


def _shifted(ext: np.ndarray, di: int, dj: int, s: int) -> np.ndarray:
    """View of the padded array holding each cell's (di, dj) neighbor."""
    return ext[1 + di : 1 + di + s, 1 + dj : 1 + dj + s]


# Indices into NEIGHBOR_OFFSETS pairing each direction with its transpose
# image: E with N, W with S, NE with SW.  Summing each pair before adding it
# to the accumulator is what makes neighbor sums bitwise transpose-symmetric.
_TRANSPOSE_PAIRS = ((0, 2), (1, 3), (4, 5))


def _attached_neighbor_count(attached: np.ndarray, mode: str) -> np.ndarray:
    s = attached.shape[0]
    ext = _extend(attached, False, mode)
    acc = np.zeros((s, s), dtype=np.uint8)
    for di, dj in NEIGHBOR_OFFSETS:
        acc += _shifted(ext, di, dj, s)
    return acc


def _boundary(attached: np.ndarray, mode: str) -> np.ndarray:
    """Unattached cells with at least one attached neighbor."""
    return (~attached) & (_attached_neighbor_count(attached, mode) > 0)


def diffusion_step(state: LcaState, params: LcaParams, cfg: RunConfig) -> LcaState:
    """Average vapor over each cell's seven-cell neighborhood.

    Attached neighbors act as mirrors (they contribute the receiving cell's
    own value), as do the far walls in sealed mode.  In reservoir mode the
    outermost ring is pinned back to rho after averaging, so the far edge
    acts as a vapor source at fixed density.
    """
    s = cfg.side
    att = state.attached
    d = state.diffusive_mass
    sealed = cfg.boundary_mode == "sealed"
    d_ext = _extend(d, 0.0, cfg.fold_mode)
    a_ext = _extend(att, sealed, cfg.fold_mode)
    acc = d.copy()
    tmp = np.empty_like(d)
    pair = np.empty_like(d)
    for first, second in _TRANSPOSE_PAIRS:
        for k, out in ((first, pair), (second, tmp)):
            di, dj = NEIGHBOR_OFFSETS[k]
            np.copyto(out, _shifted(d_ext, di, dj, s))
            np.copyto(out, d, where=_shifted(a_ext, di, dj, s))
        pair += tmp
        acc += pair
    new_d = acc / 7.0
    new_d[att] = 0.0
    if not sealed:
        new_d[-1, ~att[-1, :]] = params.rho
        new_d[~att[:, -1], -1] = params.rho
    return replace(state, diffusive_mass=new_d)


def freezing_step(state: LcaState, params: LcaParams, cfg: RunConfig) -> LcaState:
    """Boundary cells convert vapor: fraction kappa to ice, rest to liquid."""
    boundary = _boundary(state.attached, cfg.fold_mode)
    d = state.diffusive_mass
    b = np.where(boundary, state.boundary_mass + (1.0 - params.kappa) * d,
                 state.boundary_mass)
    c = np.where(boundary, state.crystal_mass + params.kappa * d,
                 state.crystal_mass)
    new_d = np.where(boundary, 0.0, d)
    return replace(state, boundary_mass=b, crystal_mass=c, diffusive_mass=new_d)


def attachment_step(state: LcaState, params: LcaParams, cfg: RunConfig) -> LcaState:
    """Boundary cells join the crystal when their liquid mass and local
    vapor satisfy the neighbor-count-dependent thresholds."""
    s = cfg.side
    att = state.attached
    b = state.boundary_mass
    d = state.diffusive_mass
    natt = _attached_neighbor_count(att, cfg.fold_mode)
    boundary = (~att) & (natt > 0)
    far_d = params.rho if cfg.boundary_mode == "reservoir" else 0.0
    d_ext = _extend(d, far_d, cfg.fold_mode)
    nbhd = d.copy()
    for first, second in _TRANSPOSE_PAIRS:
        di, dj = NEIGHBOR_OFFSETS[first]
        ei, ej = NEIGHBOR_OFFSETS[second]
        nbhd += _shifted(d_ext, di, dj, s) + _shifted(d_ext, ei, ej, s)
    low = (natt <= 2) & (b >= params.beta_attach)
    mid = (natt == 3) & ((b >= 1.0) | ((nbhd < params.theta_vapor) & (b >= params.alpha)))
    high = natt >= 4
    cand = boundary & (low | mid | high)
    new_att = att | cand
    c = np.where(cand, state.crystal_mass + b, state.crystal_mass)
    new_b = np.where(cand, 0.0, b)
    return replace(state, attached=new_att, boundary_mass=new_b, crystal_mass=c)


def melting_step(state: LcaState, params: LcaParams, cfg: RunConfig) -> LcaState:
    """Boundary cells return fractions mu / gamma_melt of their liquid and
    ice to vapor.  Attached cells never change here."""
    boundary = _boundary(state.attached, cfg.fold_mode)
    b = state.boundary_mass
    c = state.crystal_mass
    d = state.diffusive_mass
    new_d = np.where(boundary, d + (params.mu * b + params.gamma_melt * c), d)
    new_b = np.where(boundary, (1.0 - params.mu) * b, b)
    new_c = np.where(boundary, (1.0 - params.gamma_melt) * c, c)
    return replace(state, boundary_mass=new_b, crystal_mass=new_c, diffusive_mass=new_d)


def noise_step(state: LcaState, params: LcaParams, cfg: RunConfig) -> LcaState:
    """Multiply each unattached cell's vapor by 1 +/- sigma_noise with equal
    probability.  Draws come from the (seed, step)-keyed stream, so the
    field for a given raw step is identical no matter how or where the step
    is computed.  sigma_noise = 0 is an exact no-op."""
    if params.sigma_noise == 0.0:
        return replace(state)
    u = rng.noise_uniforms(cfg.seed, state.step_index, cfg.side)
    mult = np.where(u < 0.5, 1.0 - params.sigma_noise, 1.0 + params.sigma_noise)
    new_d = np.where(state.attached, state.diffusive_mass,
                     state.diffusive_mass * mult)
    return replace(state, diffusive_mass=new_d)


def step(state: LcaState, params: LcaParams, cfg: RunConfig) -> LcaState:
    """One raw step: diffusion, freezing, attachment, melting, noise."""
    state = diffusion_step(state, params, cfg)
    state = freezing_step(state, params, cfg)
    state = attachment_step(state, params, cfg)
    state = melting_step(state, params, cfg)
    state = noise_step(state, params, cfg)
    return replace(state, step_index=state.step_index + 1)


def total_mass(state: LcaState) -> float:
    """Symmetry-weighted total of all three mass fields.

    Weights count each wedge cell's multiplicity in the full crystal
    (1 seed / 3 edge rays / 6 interior), so this equals the full-lattice
    total and is the quantity conserved by sealed dynamics.
    """
    w = wedge_orbit_weights(state.attached.shape[0])
    fields = state.boundary_mass + state.crystal_mass + state.diffusive_mass
    return float(np.sum(w * fields))


def _halted(state: LcaState, cfg: RunConfig) -> bool:
    lim = cfg.side - 1 - cfg.halt_margin
    return bool(state.attached[lim:, :].any() or state.attached[:, lim:].any())


def run(params: LcaParams, cfg: RunConfig) -> Trajectory:
    """Run until the crystal grows within halt_margin of the far edge or
    max_steps raw steps elapse, recording the attached field every
    snapshot_every steps plus the final state.

    Raises DegenerateRunError when max_steps > 0 and nothing beyond the
    seed ever attached.
    """
    state = init_state(params, cfg)
    frames = [state.attached.copy()]
    for _ in range(cfg.max_steps):
        state = step(state, params, cfg)
        if state.step_index % cfg.snapshot_every == 0:
            frames.append(state.attached.copy())
        if _halted(state, cfg):
            break
    if state.step_index % cfg.snapshot_every != 0:
        frames.append(state.attached.copy())
    if cfg.max_steps > 0 and int(state.attached.sum()) <= 1:
        raise DegenerateRunError(
            f"no growth beyond the seed after {state.step_index} steps "
            f"(rho={params.rho}, seed={cfg.seed})"
        )
    return Trajectory(
        side=cfg.side,
        frames=np.stack(frames),
        params=params,
        seed=cfg.seed,
        snapshot_every=cfg.snapshot_every,
        source="lca",
        raw_steps=state.step_index,
    )
