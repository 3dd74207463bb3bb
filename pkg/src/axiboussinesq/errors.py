"""Exception hierarchy shared by all modules."""


class AxiBQError(Exception):
    """Base class for every error raised by the package."""


class InvalidDimensionError(AxiBQError, ValueError):
    pass


class ParityMismatchError(AxiBQError, ValueError):
    pass


class GridMismatchError(AxiBQError, ValueError):
    pass


class GridTooCoarseError(AxiBQError, ValueError):
    pass


class SolverNonconvergenceError(AxiBQError, RuntimeError):
    """Raised when a linear solve misses its relative-residual tolerance."""

    def __init__(self, message, residual=float("nan")):
        super().__init__(f"{message} (relative residual {residual:.3e})")
        self.residual = residual


class NearOneBranchError(AxiBQError, ValueError):
    """kappa is too close to 1 for the general diagonalizing unknown."""


class WrongBranchError(AxiBQError, ValueError):
    """kappa is outside the near-one window required by the Gamma_1 monitor."""


class BlowUpError(AxiBQError, RuntimeError):
    def __init__(self, message, checkpoint=None):
        super().__init__(message)
        self.checkpoint = checkpoint


class MissingSeriesError(AxiBQError, KeyError):
    pass


class ConfigMismatchError(AxiBQError, ValueError):
    pass


class ConfigError(AxiBQError, ValueError):
    """Parse or validation failure in an experiment configuration."""

    def __init__(self, message, line=None, column=None, key=None):
        where = ""
        if line is not None:
            where = f" (line {line}, column {column})"
        super().__init__(f"{message}{where}")
        self.line = line
        self.column = column
        self.key = key


class MissingRunError(AxiBQError, FileNotFoundError):
    pass
