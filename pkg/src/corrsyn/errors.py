"""Exception hierarchy shared by every module."""


class CorrsynError(Exception):
    pass


class DomainError(CorrsynError, ValueError):
    """An argument lies outside the region where an operation is defined."""


class ScalingError(DomainError):
    """The synaptic-correlation level violates the q-scaling bound."""


class ConfigError(CorrsynError, ValueError):
    """Invalid experiment configuration (CLI exit code 2)."""


class NumericalError(CorrsynError, ArithmeticError):
    """Numerical failure during a computation (CLI exit code 3)."""


class EvaluationError(NumericalError):
    pass


class NotPositiveDefiniteError(NumericalError):
    def __init__(self, pivot, message=None):
        self.pivot = pivot
        super().__init__(message or f"matrix is not positive definite (pivot {pivot} <= 0)")


class ConvergenceError(NumericalError):
    pass


class PropagationError(NumericalError):
    pass


class DegenerateCovarianceError(NumericalError):
    pass


class TrainingError(NumericalError):
    pass
