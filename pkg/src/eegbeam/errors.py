"""Exception hierarchy. The CLI maps each family to a stable exit code."""
import numpy as np


class EegbeamError(Exception):
    pass


class ParameterError(EegbeamError, ValueError):
    """Invalid sizes or settings (CLI exit code 2)."""


class RankRequirementError(ParameterError):
    """Window shorter than the channel count: covariance cannot be full rank."""


class DataError(EegbeamError, ValueError):
    """Malformed, mis-shaped or non-finite input data (CLI exit code 3)."""


class NumericalError(EegbeamError, np.linalg.LinAlgError):
    """Numerical failure that no fallback could repair (CLI exit code 4)."""


class SingularMatrixError(NumericalError):
    pass


class SingularUpdateError(SingularMatrixError):
    """A rank-one update hit a vanishing pivot ``1 + tr(C^-1 E)``."""

    def __init__(self, message, term_index=None):
        super().__init__(message)
        self.term_index = term_index


class DegenerateLeadFieldError(NumericalError):
    pass


class UnresolvableSourceError(NumericalError):
    pass
