"""Snow-crystal growth on a folded hexagonal wedge: simulation, morphology
statistics, and exact Wasserstein evaluation of surrogate models."""

__version__ = "0.1.0"

from .errors import (  # noqa: F401
    DegenerateRunError,
    FormatError,
    InvariantViolationError,
    SnowcrystalError,
    SymmetryViolationError,
    TransportSolverError,
    TruncationError,
    UnderPopulatedBinError,
)
from .grid import HexMask, fold_into_wedge, hex_neighbors, reconstruct_full  # noqa: F401
from .lca import LcaParams, LcaState, RunConfig, Trajectory, run, step  # noqa: F401
from .morphology import MorphologySample, features  # noqa: F401
from .transport import EwdReport, bootstrap_ci, ewd, w2  # noqa: F401
