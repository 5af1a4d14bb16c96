"""Exception hierarchy shared by every module in the package."""


class LowRankError(Exception):
    """Base class for all errors raised by lowrank_irls."""


class InvalidInputError(LowRankError, ValueError):
    """Input data is malformed (wrong shape, non-finite entries, ...)."""


class InvalidArgumentError(LowRankError, ValueError):
    """A scalar parameter is outside its admissible range."""


class IllPosedError(LowRankError, ArithmeticError):
    """The constrained least-squares system has no (unique) solution.

    Raised when the measurement operator is not surjective, so the normal
    system built from it cannot be factored or its solution misses the data.
    """


class NumericalFailureError(LowRankError, ArithmeticError):
    """A factorization failed after the jitter retry, or an iterate went non-finite."""


class NoKernelError(LowRankError, ValueError):
    """The operator is injective, so there is nothing to sample from its kernel."""


class OutOfRegimeError(LowRankError, ValueError):
    """A guarantee formula was evaluated outside its stated preconditions."""


class FormatError(LowRankError, ValueError):
    """A file (PGM image, matrix text, mask file) could not be parsed."""
