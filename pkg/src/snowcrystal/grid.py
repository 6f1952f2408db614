"""Hexagonal-lattice geometry: axial coordinates, the folded wedge, full-crystal
reconstruction, and raster export.

Coordinates
-----------
A cell is an axial pair (i, j).  The two basis directions are 60 degrees
apart, so the center of cell (i, j) sits at Cartesian

    (x, y) = (i + j/2, j * sqrt(3)/2)

and the six neighbors of (i, j), in fixed order E, W, N, S, NE, SW, are

    (i+1, j), (i-1, j), (i, j+1), (i, j-1), (i+1, j-1), (i-1, j+1).

Wedge and symmetry
------------------
Simulations run on the wedge {0 <= i, j < side}.  Its two bounding rays
(j = 0 and i = 0) act as mirrors: a neighbor falling outside is folded back
by the reflections

    across the j = 0 ray:  (i, j) -> (i + j, -j)
    across the i = 0 ray:  (i, j) -> (-i, i + j)

These reflections and the 60-degree rotations generate the order-12 dihedral
symmetry group of the crystal.  A wedge evolved with folded edges stays
invariant under the transpose (i, j) -> (j, i) (the bisector mirror maps the
index square onto itself), and the full crystal is the union of the twelve
symmetry images of the wedge.  Cells on the two rays are covered by three
images each, the seed by all twelve, generic cells by six; hence the orbit
weights 1 / 3 / 6 used for full-lattice totals.

The far walls (i = side - 1 and j = side - 1) are not symmetry axes; for
folding purposes they act as plain mirrors, matching the sealed boundary
treatment of the simulation engine.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import SymmetryViolationError

Axial = tuple[int, int]

# Neighbor offsets in fixed order E, W, N, S, NE, SW.  Every piece of code
# (and the scalar reference used by the tests) iterates neighbors in exactly
# this order, so floating-point accumulations are reproducible.
NEIGHBOR_OFFSETS: tuple[Axial, ...] = (
    (1, 0), (-1, 0), (0, 1), (0, -1), (1, -1), (-1, 1),
)

SQRT3 = float(np.sqrt(3.0))

# The twelve symmetry transforms as integer matrices acting on column vectors
# (i, j): six rotations by multiples of 60 degrees, then the six mirrors
# across the axes at 0, 30, ..., 150 degrees.  m30 is the transpose.
SYMMETRY_MATRICES: tuple[np.ndarray, ...] = tuple(
    np.array(m, dtype=np.int64)
    for m in (
        ((1, 0), (0, 1)),      # identity
        ((0, -1), (1, 1)),     # rotate 60
        ((-1, -1), (1, 0)),    # rotate 120
        ((-1, 0), (0, -1)),    # rotate 180
        ((0, 1), (-1, -1)),    # rotate 240
        ((1, 1), (-1, 0)),     # rotate 300
        ((1, 1), (0, -1)),     # mirror across 0-degree axis (j = 0 ray)
        ((0, 1), (1, 0)),      # mirror across 30-degree bisector (transpose)
        ((-1, 0), (1, 1)),     # mirror across 60-degree axis (i = 0 ray)
        ((-1, -1), (0, 1)),    # mirror across 90 degrees
        ((0, -1), (-1, 0)),    # mirror across 120 degrees
        ((1, 0), (-1, -1)),    # mirror across 150 degrees
    )
)

FOLD_MODES = ("reflect", "rotate")


def hex_neighbors(c: Axial) -> list[Axial]:
    """The six neighbors of c in fixed E, W, N, S, NE, SW order."""
    i, j = c
    return [(i + di, j + dj) for di, dj in NEIGHBOR_OFFSETS]


def axial_to_cartesian(c: Axial | np.ndarray) -> tuple[float, float] | np.ndarray:
    """Cell center of c in Cartesian units of one lattice spacing."""
    if isinstance(c, np.ndarray):
        i = c[..., 0]
        j = c[..., 1]
        return np.stack([i + 0.5 * j, j * (SQRT3 / 2.0)], axis=-1)
    i, j = c
    return (i + j / 2.0, j * SQRT3 / 2.0)


def fold_into_wedge(c: Axial, side: int, mode: str = "reflect") -> Axial:
    """Map a neighbor coordinate of a wedge cell back into the wedge.

    Negative indices are folded across the wedge's two symmetry rays; in
    "reflect" mode by the mirror reflections, in "rotate" mode by the
    60-degree rotations (the two conventions read transposed cells, so for
    transpose-symmetric fields they are interchangeable).  Indices equal to
    `side` are mirrored across the far wall.  Coordinates more than one step
    outside the wedge are rejected.
    """
    if mode not in FOLD_MODES:
        raise ValueError(f"unknown fold mode: {mode!r}")
    i, j = c
    if not (-1 <= i <= side and -1 <= j <= side):
        raise ValueError(f"coordinate {c} is more than one step outside the wedge")
    # Symmetry folds first: a cell with a negative index is an image of a
    # real wedge cell, so it must be resolved before any far-wall mirroring.
    for _ in range(3):
        if i >= 0 and j >= 0:
            break
        if mode == "reflect":
            if j < 0:
                i, j = i + j, -j
            elif i < 0:
                i, j = -i, i + j
        else:
            if j < 0:
                i, j = -j, i + j      # rotate by +60
            elif i < 0:
                i, j = i + j, -i      # rotate by -60
    if i == side:
        i = side - 1
    if j == side:
        j = side - 1
    return (i, j)


def wedge_orbit_weights(side: int) -> np.ndarray:
    """Multiplicity of each wedge cell in the full crystal.

    The seed is its own orbit (weight 1), cells on the two bounding rays are
    covered by 3 of the 12 symmetry images, and interior cells by 6.  Summing
    field * weights over the wedge gives the exact full-lattice total.
    """
    w = np.full((side, side), 6.0)
    w[0, :] = 3.0
    w[:, 0] = 3.0
    w[0, 0] = 1.0
    return w


@dataclass
class HexMask:
    """A boolean field over a square block of axial coordinates.

    cells[a, b] holds coordinate (a - offset, b - offset); the extent covers
    i, j in [-offset, offset].
    """

    cells: np.ndarray
    offset: int

    def __post_init__(self) -> None:
        cells = np.asarray(self.cells, dtype=bool)
        if cells.ndim != 2 or cells.shape[0] != cells.shape[1]:
            raise ValueError("mask cells must be a square 2-d array")
        if cells.shape[0] != 2 * self.offset + 1:
            raise ValueError("mask extent does not match its offset")
        self.cells = cells

    @classmethod
    def empty(cls, offset: int) -> "HexMask":
        n = 2 * offset + 1
        return cls(np.zeros((n, n), dtype=bool), offset)

    @classmethod
    def from_coords(cls, coords: list[Axial], offset: int) -> "HexMask":
        mask = cls.empty(offset)
        for i, j in coords:
            mask.cells[i + offset, j + offset] = True
        return mask

    def coords(self) -> np.ndarray:
        """Attached coordinates as an (n, 2) integer array."""
        return np.argwhere(self.cells) - self.offset

    def __contains__(self, c: Axial) -> bool:
        i, j = c
        return (
            -self.offset <= i <= self.offset
            and -self.offset <= j <= self.offset
            and bool(self.cells[i + self.offset, j + self.offset])
        )


def reconstruct_full(wedge: np.ndarray, check: bool = True) -> HexMask:
    """Expand a wedge field into the full crystal mask.

    The wedge must be symmetric under the transpose; overlapping symmetry
    images then agree everywhere (all pairwise image overlaps trace back to
    transpose pairs of wedge cells).  An asymmetric wedge, which can only
    come from externally supplied data, raises SymmetryViolationError.
    """
    wedge = np.asarray(wedge, dtype=bool)
    if wedge.ndim != 2 or wedge.shape[0] != wedge.shape[1]:
        raise ValueError("wedge must be a square 2-d array")
    if check and not np.array_equal(wedge, wedge.T):
        raise SymmetryViolationError(
            "wedge is not transpose-symmetric; symmetry images disagree"
        )
    side = wedge.shape[0]
    offset = 2 * (side - 1)
    mask = HexMask.empty(offset)
    coords = np.argwhere(wedge)
    if coords.size == 0:
        return mask
    for m in SYMMETRY_MATRICES:
        image = coords @ m.T
        mask.cells[image[:, 0] + offset, image[:, 1] + offset] = True
    return mask


def _cube_round(fi: np.ndarray, fj: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Round fractional axial coordinates to the nearest cell center."""
    x = fi
    z = fj
    y = -x - z
    rx = np.rint(x)
    ry = np.rint(y)
    rz = np.rint(z)
    dx = np.abs(rx - x)
    dy = np.abs(ry - y)
    dz = np.abs(rz - z)
    fix_x = (dx > dy) & (dx > dz)
    fix_z = ~fix_x & (dz > dy)
    rx = np.where(fix_x, -ry - rz, rx)
    rz = np.where(fix_z, -rx - ry, rz)
    return rx.astype(np.int64), rz.astype(np.int64)


def render_cartesian(mask: HexMask, scale: int) -> np.ndarray:
    """Rasterize a mask as filled hexagons on a grayscale canvas.

    Each pixel is assigned to the lattice cell whose center is nearest (the
    cells' Voronoi regions are the hexagons), painted 255 when the cell is
    attached and 0 otherwise.  The canvas covers the mask's full extent, so
    an empty mask yields a blank image of the same size.  Row 0 of the image
    is the top (largest y).
    """
    if scale <= 0:
        raise ValueError("scale must be positive")
    off = mask.offset
    xmax = 1.5 * off + 1.0
    ymax = (SQRT3 / 2.0) * off + 1.0
    width = int(np.ceil(2.0 * xmax * scale))
    height = int(np.ceil(2.0 * ymax * scale))
    px = (np.arange(width) + 0.5) / scale - xmax
    py = ymax - (np.arange(height) + 0.5) / scale
    x = np.broadcast_to(px[None, :], (height, width))
    y = np.broadcast_to(py[:, None], (height, width))
    fj = y / (SQRT3 / 2.0)
    fi = x - fj / 2.0
    ci, cj = _cube_round(fi, fj)
    inside = (np.abs(ci) <= off) & (np.abs(cj) <= off)
    image = np.zeros((height, width), dtype=np.uint8)
    ii = np.clip(ci + off, 0, 2 * off)
    jj = np.clip(cj + off, 0, 2 * off)
    image[inside & mask.cells[ii, jj]] = 255
    return image


def write_pgm(image: np.ndarray, path) -> None:
    """Write a grayscale image as a binary PGM (magic P5, maxval 255)."""
    image = np.ascontiguousarray(image, dtype=np.uint8)
    if image.ndim != 2:
        raise ValueError("image must be 2-d")
    height, width = image.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{width} {height}\n255\n".encode("ascii"))
        fh.write(image.tobytes())
