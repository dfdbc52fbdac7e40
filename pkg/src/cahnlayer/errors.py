"""Exception hierarchy."""


class CahnLayerError(Exception):
    """Base class for all package errors."""


class PotentialEvaluationError(CahnLayerError, ValueError):
    pass


class HypothesisViolation(CahnLayerError, ValueError):
    pass


class DomainError(CahnLayerError, ValueError):
    """An argument lies outside the operation's domain."""


class ConfigurationError(CahnLayerError, ValueError):
    pass


class AdmissibilityError(CahnLayerError, ValueError):
    """A profile does not satisfy the Dirichlet data it is evaluated against."""


class FitError(CahnLayerError, ValueError):
    pass


class SolverError(CahnLayerError, RuntimeError):
    def __init__(self, message, history=None):
        super().__init__(message)
        self.history = list(history or [])
