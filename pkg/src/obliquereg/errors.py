"""Exception hierarchy shared by all modules."""


class ObliqueRegError(Exception):
    """Base class for every error raised by this package."""


class InvalidInputError(ObliqueRegError, ValueError):
    pass


class NonDifferentiablePointError(ObliqueRegError):
    pass


class DegenerateFieldError(ObliqueRegError):
    pass


class PreconditionError(ObliqueRegError):
    pass


class FrameConstructionError(ObliqueRegError):
    pass


class GeometryError(ObliqueRegError):
    pass


class OutOfChartError(ObliqueRegError):
    pass


class ConvergenceError(ObliqueRegError):
    pass


class ContractionViolationError(ObliqueRegError):
    pass


class BoundarySingularityError(ObliqueRegError):
    pass


class ResolutionError(ObliqueRegError):
    pass


class QuadratureFailureError(ObliqueRegError):
    pass


class ContainmentError(ObliqueRegError):
    pass


class ExtensionFailureError(ObliqueRegError):
    pass


class FlatteningError(ObliqueRegError):
    pass


class SolverError(ObliqueRegError):
    """Linear solve failed; ``residual_history`` holds the recorded residuals."""

    def __init__(self, message, residual_history=()):
        super().__init__(message)
        self.residual_history = list(residual_history)


class ConfigError(ObliqueRegError):
    """Invalid experiment configuration; ``path`` points at the offending key."""

    def __init__(self, message, path=""):
        super().__init__(message)
        self.path = path if isinstance(path, str) else "/" + "/".join(str(p) for p in path)
