"""Trajectory files, dataset manifests, and batch generation.

File format (little-endian, magic "CGT1", version 1):

    offset  size  field
    0       4     magic b"CGT1"
    4       2     format version (u16)
    6       2     reserved (u16, written 0)
    8       4     side (u32)
    12      4     frame_count (u32)
    16      4     snapshot_every (u32)
    20      1     source (u8: 0 = lca, 1 = emulator)
    21      3     padding
    24      8     seed (u64)
    32      4     n_params (u32)
    36      4     padding
    40      24    padding up to the 64-byte header
    64      8*n   parameters (f64 each, canonical order: rho, beta_attach,
                  alpha, theta_vapor, kappa, mu, gamma_melt, sigma_noise)
    ...           frame_count frames, each ceil(side*side/8) bytes: the
                  attached field bit-packed row-major, least significant
                  bit first

Errors distinguish structural problems (FormatError: bad magic or version,
trailing bytes, nonzero padding bits), short files (TruncationError), and
well-formed files whose content breaks trajectory invariants
(InvariantViolationError: non-monotone frames, first frame not the bare
seed, invalid parameters).
"""

from __future__ import annotations

import dataclasses
import json
import struct
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import __version__, rng
from .errors import (
    FormatError,
    InvariantViolationError,
    SnowcrystalError,
    TruncationError,
)
from .lca import PARAM_ORDER, LcaParams, RunConfig, Trajectory, run

MAGIC = b"CGT1"
FORMAT_VERSION = 1
HEADER_SIZE = 64
_HEADER = struct.Struct("<4sHHIIIB3xQI4x")  # 40 bytes; zero-padded to 64

SOURCE_CODES = {"lca": 0, "emulator": 1}
SOURCE_NAMES = {v: k for k, v in SOURCE_CODES.items()}

SPLITS = ("train", "val", "test")


def frame_nbytes(side: int) -> int:
    return (side * side + 7) // 8


def expected_file_size(side: int, frame_count: int, n_params: int) -> int:
    return HEADER_SIZE + 8 * n_params + frame_count * frame_nbytes(side)


def validate_trajectory(traj: Trajectory) -> None:
    """Check the structural invariants every trajectory must satisfy."""
    frames = traj.frames
    if frames.ndim != 3 or frames.dtype != np.bool_:
        raise InvariantViolationError("frames must be a (t, side, side) bool array")
    t, h, w = frames.shape
    if t < 1:
        raise InvariantViolationError("a trajectory needs at least one frame")
    if h != traj.side or w != traj.side:
        raise InvariantViolationError(
            f"frame shape {h}x{w} does not match side {traj.side}"
        )
    first = frames[0]
    if int(first.sum()) != 1 or not bool(first[0, 0]):
        raise InvariantViolationError("first frame must contain exactly the seed cell")
    if t > 1 and bool(np.any(frames[:-1] & ~frames[1:])):
        raise InvariantViolationError("attached cells must never detach across frames")
    if traj.snapshot_every < 1:
        raise InvariantViolationError("snapshot_every must be at least 1")
    if traj.source not in SOURCE_CODES:
        raise InvariantViolationError(f"unknown source {traj.source!r}")
    if not 0 <= traj.seed < 2**64:
        raise InvariantViolationError("seed must fit in 64 bits")
    try:
        traj.params.validate()
    except ValueError as exc:
        raise InvariantViolationError(f"invalid parameters: {exc}") from exc


def write_trajectory(traj: Trajectory, path) -> None:
    validate_trajectory(traj)
    frames = traj.frames
    t = frames.shape[0]
    header = _HEADER.pack(
        MAGIC,
        FORMAT_VERSION,
        0,
        traj.side,
        t,
        traj.snapshot_every,
        SOURCE_CODES[traj.source],
        traj.seed,
        len(PARAM_ORDER),
    )
    packed = np.packbits(
        frames.reshape(t, -1), axis=1, bitorder="little"
    )
    with open(path, "wb") as fh:
        fh.write(header.ljust(HEADER_SIZE, b"\x00"))
        fh.write(np.asarray(traj.params.as_tuple(), dtype="<f8").tobytes())
        fh.write(packed.tobytes())


def read_trajectory(path) -> Trajectory:
    buf = Path(path).read_bytes()
    if len(buf) < 4 or buf[:4] != MAGIC:
        raise FormatError(f"{path}: bad magic, not a trajectory file")
    if len(buf) < HEADER_SIZE:
        raise TruncationError(f"{path}: header truncated at {len(buf)} bytes")
    magic, version, _reserved, side, frame_count, snapshot_every, source_code, \
        seed, n_params = _HEADER.unpack(buf[: _HEADER.size])
    if version != FORMAT_VERSION:
        raise FormatError(f"{path}: unsupported format version {version}")
    if side == 0 or frame_count == 0:
        raise FormatError(f"{path}: zero side or frame count")
    if source_code not in SOURCE_NAMES:
        raise FormatError(f"{path}: unknown source code {source_code}")
    if n_params != len(PARAM_ORDER):
        raise FormatError(f"{path}: expected {len(PARAM_ORDER)} parameters, header says {n_params}")
    expected = expected_file_size(side, frame_count, n_params)
    if len(buf) < expected:
        raise TruncationError(
            f"{path}: {len(buf)} bytes, header implies {expected}"
        )
    if len(buf) > expected:
        raise FormatError(f"{path}: {len(buf) - expected} trailing bytes")
    p0 = HEADER_SIZE
    p1 = p0 + 8 * n_params
    raw_params = np.frombuffer(buf[p0:p1], dtype="<f8")
    fb = frame_nbytes(side)
    packed = np.frombuffer(buf[p1:], dtype=np.uint8).reshape(frame_count, fb)
    bits = np.unpackbits(packed, axis=1, bitorder="little")
    pad = bits[:, side * side:]
    if pad.size and pad.any():
        raise FormatError(f"{path}: nonzero padding bits in frame data")
    frames = bits[:, : side * side].reshape(frame_count, side, side).astype(bool)
    try:
        params = LcaParams.from_tuple(raw_params)
    except ValueError as exc:
        raise InvariantViolationError(f"{path}: {exc}") from exc
    traj = Trajectory(
        side=side,
        frames=frames,
        params=params,
        seed=seed,
        snapshot_every=snapshot_every,
        source=SOURCE_NAMES[source_code],
    )
    try:
        validate_trajectory(traj)
    except InvariantViolationError as exc:
        raise InvariantViolationError(f"{path}: {exc}") from exc
    return traj


def downsample(traj: Trajectory, factor: int) -> Trajectory:
    """Keep frames 0, factor, 2*factor, ... plus the final frame."""
    if factor < 1:
        raise ValueError("downsample factor must be at least 1")
    t = traj.frames.shape[0]
    indices = list(range(0, t, factor))
    if indices[-1] != t - 1:
        indices.append(t - 1)
    return dataclasses.replace(
        traj,
        frames=traj.frames[indices].copy(),
        snapshot_every=traj.snapshot_every * factor,
    )


def split_of_seed(seed: int) -> str:
    """Deterministic 80/10/10 split keyed by the trajectory seed."""
    h = rng.mix64(seed) % 10
    if h < 8:
        return "train"
    return "val" if h == 8 else "test"


@dataclass
class ManifestEntry:
    index: int
    file: str | None
    rho: float
    seed: int
    split: str
    status: str  # "ok" | "failed"
    frame_count: int | None = None
    raw_steps: int | None = None
    error: str | None = None

    def to_json_dict(self) -> dict:
        return {
            "index": self.index,
            "file": self.file,
            "rho": self.rho,
            "seed": self.seed,
            "split": self.split,
            "status": self.status,
            "frame_count": self.frame_count,
            "raw_steps": self.raw_steps,
            "error": self.error,
        }

    @classmethod
    def from_json_dict(cls, data: dict) -> "ManifestEntry":
        return cls(**data)


@dataclass
class DatasetManifest:
    """Sidecar JSON describing a generated dataset.

    Creation metadata is deterministic on purpose (tool name and version,
    generation inputs, no wall clock), so regenerating with the same master
    seed reproduces the manifest byte for byte.
    """

    master_seed: int
    n_requested: int
    rho_range: tuple[float, float]
    fixed_params: dict
    run_config: dict
    entries: list[ManifestEntry]
    tool: dict | None = None
    schema: str = "trajectory-manifest/1"

    def __post_init__(self) -> None:
        if self.tool is None:
            self.tool = {"name": "snowcrystal", "version": __version__}

    def ok_entries(self) -> list[ManifestEntry]:
        return [e for e in self.entries if e.status == "ok"]

    def split_entries(self, split: str) -> list[ManifestEntry]:
        if split not in SPLITS:
            raise ValueError(f"unknown split {split!r}")
        return [e for e in self.ok_entries() if e.split == split]

    def to_json_dict(self) -> dict:
        return {
            "schema": self.schema,
            "tool": self.tool,
            "master_seed": self.master_seed,
            "n_requested": self.n_requested,
            "rho_range": [float(self.rho_range[0]), float(self.rho_range[1])],
            "fixed_params": self.fixed_params,
            "run_config": self.run_config,
            "entries": [e.to_json_dict() for e in self.entries],
        }

    def save(self, path) -> None:
        Path(path).write_text(
            json.dumps(self.to_json_dict(), indent=2) + "\n", encoding="utf-8"
        )

    @classmethod
    def from_json_dict(cls, data: dict) -> "DatasetManifest":
        return cls(
            master_seed=data["master_seed"],
            n_requested=data["n_requested"],
            rho_range=tuple(data["rho_range"]),
            fixed_params=dict(data["fixed_params"]),
            run_config=dict(data["run_config"]),
            entries=[ManifestEntry.from_json_dict(e) for e in data["entries"]],
            tool=dict(data["tool"]),
            schema=data.get("schema", "trajectory-manifest/1"),
        )

    @classmethod
    def load(cls, path) -> "DatasetManifest":
        return cls.from_json_dict(json.loads(Path(path).read_text(encoding="utf-8")))


MANIFEST_NAME = "manifest.json"


def generate_dataset(n: int,
                     params: LcaParams,
                     cfg: RunConfig,
                     out_dir,
                     rho_range: tuple[float, float] = (0.35, 0.65),
                     master_seed: int = 0,
                     workers: int | None = None) -> DatasetManifest:
    """Run n trajectories with rho drawn uniformly from rho_range and write
    them plus a manifest under out_dir.

    Per-run (rho, seed) pairs derive from the master seed alone, and every
    file's bytes depend only on its own run, so results are identical for
    any worker count.  A failed run (for instance no growth at low rho) is
    recorded in the manifest and does not abort the batch.
    """
    if n < 1:
        raise ValueError("n must be at least 1")
    lo, hi = float(rho_range[0]), float(rho_range[1])
    if not lo < hi:
        raise ValueError("rho_range must be increasing")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    gen = rng.keyed_generator(master_seed, rng.DOMAIN_DATASET)
    rhos = gen.uniform(lo, hi, size=n)
    seeds = gen.integers(0, 2**63, size=n, dtype=np.uint64)

    def one(idx: int) -> ManifestEntry:
        p = dataclasses.replace(params, rho=float(rhos[idx]))
        c = dataclasses.replace(cfg, seed=int(seeds[idx]))
        name = f"traj_{idx:05d}.cgt"
        entry = ManifestEntry(
            index=idx,
            file=name,
            rho=float(rhos[idx]),
            seed=int(seeds[idx]),
            split=split_of_seed(int(seeds[idx])),
            status="ok",
        )
        try:
            traj = run(p, c)
            write_trajectory(traj, out_dir / name)
            entry.frame_count = traj.frame_count
            entry.raw_steps = traj.raw_steps
        except SnowcrystalError as exc:
            entry.file = None
            entry.status = "failed"
            entry.error = str(exc)
        return entry

    if workers is None or workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            entries = list(pool.map(one, range(n)))
    else:
        entries = [one(i) for i in range(n)]

    fixed = {k: float(getattr(params, k)) for k in PARAM_ORDER if k != "rho"}
    run_config = {
        "side": cfg.side,
        "max_steps": cfg.max_steps,
        "snapshot_every": cfg.snapshot_every,
        "halt_margin": cfg.halt_margin,
        "boundary_mode": cfg.boundary_mode,
        "fold_mode": cfg.fold_mode,
    }
    manifest = DatasetManifest(
        master_seed=master_seed,
        n_requested=n,
        rho_range=(lo, hi),
        fixed_params=fixed,
        run_config=run_config,
        entries=entries,
    )
    manifest.save(out_dir / MANIFEST_NAME)
    return manifest
