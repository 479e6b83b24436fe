"""Exception hierarchy.

Every domain error carries a stable ``code`` string that the CLI emits in its
structured error report.
"""


class WeakValsError(ValueError):
    code = "DOMAIN_ERROR"


class DimensionMismatch(WeakValsError):
    code = "DIMENSION_MISMATCH"


class BadFactorization(WeakValsError):
    code = "BAD_FACTORIZATION"


class NotSelfAdjoint(WeakValsError):
    code = "NOT_SELF_ADJOINT"


class NotProjector(WeakValsError):
    code = "NOT_PROJECTOR"


class NotNormalized(WeakValsError):
    code = "NOT_NORMALIZED"


class InvalidDensityMatrix(WeakValsError):
    code = "INVALID_DENSITY_MATRIX"


class InvalidPvm(WeakValsError):
    code = "INVALID_PVM"


class ZeroProbabilityBranch(WeakValsError):
    code = "ZERO_PROBABILITY_BRANCH"


class OverlapTooSmall(WeakValsError):
    code = "OVERLAP_TOO_SMALL"


class GridTooCoarse(WeakValsError):
    code = "GRID_TOO_COARSE"


class GridTooSmall(WeakValsError):
    code = "GRID_TOO_SMALL"


class ZeroPostSelectionProbability(WeakValsError):
    code = "ZERO_POSTSELECTION_PROBABILITY"


class EmptyBin(WeakValsError):
    code = "EMPTY_BIN"


class TargetUnmatched(WeakValsError):
    code = "TARGET_UNMATCHED"

    def __init__(self, message, unmatched=()):
        super().__init__(message)
        self.unmatched = tuple(unmatched)


class DegenerateSample(WeakValsError):
    code = "DEGENERATE_SAMPLE"
