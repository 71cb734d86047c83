"""Exception hierarchy shared by all modules."""


class QsstsError(Exception):
    pass


class GeometryError(QsstsError):
    """Input curve is not simple or does not fit inside the outer circle."""


class MeshingError(QsstsError):
    pass


class TopologyError(QsstsError):
    pass


class ReversedTriangleError(QsstsError):
    """A mesh update produced a triangle with non-positive signed area.

    Recoverable: the caller is expected to shrink the step and retry.
    """

    def __init__(self, min_area: float):
        super().__init__(f"reversed triangle after deformation (min signed area {min_area:.3e})")
        self.min_area = min_area


class SolverError(QsstsError):
    def __init__(self, message: str, residual: float = float("nan")):
        super().__init__(message)
        self.residual = residual


class DegenerateFieldError(QsstsError):
    pass


class StalledError(QsstsError):
    """Backtracking drove the step below ``dt_min`` without an accepted update.

    ``result`` carries the partial run (history and last accepted geometry).
    """

    def __init__(self, message: str, result=None):
        super().__init__(message)
        self.result = result


class DomainError(QsstsError, ValueError):
    pass


class StepUnderflowError(QsstsError):
    pass


class ParseError(QsstsError, ValueError):
    def __init__(self, message: str, line: int | None = None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line
