"""Exception types shared across the package.

Every error raised on purpose by this package derives from SnowcrystalError,
so callers (and the command-line driver) can distinguish our failures from
genuine bugs.
"""


class SnowcrystalError(Exception):
    """Base class for all errors raised by snowcrystal."""


class SymmetryViolationError(SnowcrystalError):
    """A wedge field is not symmetric under the transpose (i, j) -> (j, i),
    so its symmetry images disagree on overlapping cells."""


class DegenerateRunError(SnowcrystalError):
    """A simulation finished without any attachment beyond the seed."""


class FormatError(SnowcrystalError):
    """A trajectory file is structurally malformed (bad magic, bad version,
    inconsistent field values, or trailing bytes)."""


class TruncationError(FormatError):
    """A trajectory file ends before the length implied by its header."""


class InvariantViolationError(SnowcrystalError):
    """Trajectory content breaks a structural invariant (non-monotone frames,
    first frame not the bare seed, out-of-range values)."""


class TransportSolverError(SnowcrystalError):
    """The exact optimal-transport solver failed to converge."""


class UnderPopulatedBinError(SnowcrystalError):
    """A distance aggregation was asked to use a bin with fewer samples than
    the configured minimum."""
