"""Exception types raised across the package."""


class GrassromError(Exception):
    """Base class for all package errors."""


class ConvergenceError(GrassromError, ArithmeticError):
    """An iterative kernel hit its iteration cap.

    Attributes
    ----------
    residual : float
        Largest remaining relative off-orthogonality when the cap was hit.
    """

    def __init__(self, message, residual):
        super().__init__(f"{message} (residual={residual:.3e})")
        self.residual = residual


class RankDeficiencyError(GrassromError, ValueError):
    def __init__(self, message, column):
        super().__init__(message)
        self.column = column


class IllConditionedError(GrassromError, ValueError):
    def __init__(self, message, condition):
        super().__init__(message)
        self.condition = condition


class LogMapDomainError(IllConditionedError):
    """Target subspace lies outside the neighbourhood where the log map is defined."""


class MatrixFormatError(GrassromError, ValueError):
    pass


class FitnessError(GrassromError, ValueError):
    def __init__(self, message, genes):
        super().__init__(message)
        self.genes = genes


class ConfigError(GrassromError, ValueError):
    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line
