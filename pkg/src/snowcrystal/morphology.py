"""Morphology statistics of full crystals.

Area counts attached cells; boundary length counts attached-to-unattached
edges (equivalently, sum over attached cells of 6 minus their attached
neighbor count).  Both are computed on the reconstructed full crystal, not
the wedge, so they match what a whole-plane simulation would report.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .grid import NEIGHBOR_OFFSETS, HexMask, reconstruct_full
from .lca import Trajectory

CSV_HEADER = ("rho", "area", "boundary_length")


@dataclass(frozen=True)
class MorphologySample:
    """One trajectory's summary: the vapor density it was grown at and the
    final crystal's area and boundary length."""

    rho: float
    area: int
    boundary_length: int


def area(mask: HexMask) -> int:
    """Number of attached cells."""
    return int(mask.cells.sum())


def boundary_length(mask: HexMask) -> int:
    """Number of lattice edges between attached and unattached cells."""
    cells = mask.cells
    n = cells.shape[0]
    padded = np.zeros((n + 2, n + 2), dtype=bool)
    padded[1:-1, 1:-1] = cells
    total = 0
    for di, dj in NEIGHBOR_OFFSETS:
        neighbor = padded[1 + di : 1 + di + n, 1 + dj : 1 + dj + n]
        total += int(np.sum(cells & ~neighbor))
    return total


def features(traj: Trajectory) -> MorphologySample:
    """Summary statistics of a trajectory's final frame."""
    mask = reconstruct_full(traj.frames[-1])
    return MorphologySample(
        rho=float(traj.params.rho),
        area=area(mask),
        boundary_length=boundary_length(mask),
    )


def write_samples_csv(samples, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_HEADER)
        for s in samples:
            writer.writerow([repr(float(s.rho)), s.area, s.boundary_length])


def read_samples_csv(path) -> list[MorphologySample]:
    with open(Path(path), newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ValueError(f"{path}: empty morphology file") from None
        if tuple(h.strip() for h in header) != CSV_HEADER:
            raise ValueError(
                f"{path}: expected columns {','.join(CSV_HEADER)}, got {','.join(header)}"
            )
        samples = []
        for row in reader:
            if not row:
                continue
            if len(row) != 3:
                raise ValueError(f"{path}: malformed row {row!r}")
            samples.append(
                MorphologySample(float(row[0]), int(row[1]), int(row[2]))
            )
    return samples
