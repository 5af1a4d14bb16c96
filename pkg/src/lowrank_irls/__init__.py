"""Low-rank matrix recovery from linear measurements by iteratively reweighted least squares."""

from .estimator import IRLSMCompleter
from .exceptions import (
    FormatError,
    IllPosedError,
    InvalidArgumentError,
    InvalidInputError,
    LowRankError,
    NoKernelError,
    NumericalFailureError,
    OutOfRegimeError,
)
from .measure import CompletionOperator, DenseOperator, completion_op, gaussian_op, sample_mask
from .solver import SolverConfig, SolverReport, StopReason, WeightFactors, solve

__version__ = "0.1.0"

__all__ = [
    "CompletionOperator",
    "DenseOperator",
    "FormatError",
    "IRLSMCompleter",
    "IllPosedError",
    "InvalidArgumentError",
    "InvalidInputError",
    "LowRankError",
    "NoKernelError",
    "NumericalFailureError",
    "OutOfRegimeError",
    "SolverConfig",
    "SolverReport",
    "StopReason",
    "WeightFactors",
    "completion_op",
    "gaussian_op",
    "sample_mask",
    "solve",
]
