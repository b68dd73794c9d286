"""Exception types shared across the package."""


class LtvLqError(Exception):
    """Base class for all package errors."""


class InputError(LtvLqError, ValueError):
    """Malformed or dimensionally inconsistent input."""


class DivergenceError(LtvLqError):
    """Simulation produced a non-finite state."""

    def __init__(self, message, step=None, experiment=None):
        super().__init__(message)
        self.step = step
        self.experiment = experiment


class RankDeficiencyError(LtvLqError):
    """Data matrices do not satisfy the full-row-rank richness condition."""

    def __init__(self, message, k=None):
        super().__init__(message)
        self.k = k


class ConditioningError(LtvLqError):
    """A linear solve inside a recursion is too ill-conditioned to trust."""


class CertificationError(LtvLqError):
    """A solution fails a structural requirement needed for certification."""
