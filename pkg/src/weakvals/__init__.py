"""Weak values, weak measurements and post-selection, simulated at desk scale."""

__version__ = "0.1.0"

from .errors import (  # noqa: E402
    BadFactorization,
    DegenerateSample,
    DimensionMismatch,
    EmptyBin,
    GridTooCoarse,
    GridTooSmall,
    NotProjector,
    NotSelfAdjoint,
    OverlapTooSmall,
    TargetUnmatched,
    WeakValsError,
    ZeroPostSelectionProbability,
    ZeroProbabilityBranch,
)
from .qkernel import DensityMatrix, Operator, Pvm, StateVector  # noqa: E402
from .weakvalue import WeakValueResult, extract_via_weak_operators, weak_value  # noqa: E402
