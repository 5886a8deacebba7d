from typing import Any, Dict


class ChronoDeltaError(Exception):
    """Base class for every error raised by chronodelta."""

    def to_dict(self) -> Dict[str, Any]:
        payload: Dict[str, Any] = {"type": type(self).__name__, "message": str(self)}
        for key, value in vars(self).items():
            if not key.startswith("_"):
                payload[key] = value
        return payload


class NumericalError(ChronoDeltaError):
    """A computation could not produce a trustworthy result."""

    pass


class SizeError(NumericalError, ValueError):
    """Transform requested on a grid whose count is not a power of two."""

    pass


class GridMismatchError(NumericalError, ValueError):
    """Two signals that must share a grid do not."""

    pass


class ResolutionError(NumericalError, ValueError):
    """Grid too coarse for the requested construction."""

    def __init__(self, message: str, minimum_count: int):
        super().__init__(message)
        self.minimum_count = minimum_count


class DomainError(NumericalError, ValueError):
    """Parameters outside the validity range of an operation."""

    pass


class SupportError(NumericalError):
    """Signal is not compactly supported where it has to be."""

    pass


class WindowLeakageError(NumericalError):
    def __init__(self, message: str, leaked_mass: float):
        super().__init__(message)
        self.leaked_mass = leaked_mass


class TruncationError(NumericalError):
    def __init__(self, message: str, tail_fraction: float):
        super().__init__(message)
        self.tail_fraction = tail_fraction


class SingularityError(NumericalError, ValueError):
    """Kernel evaluated at its singular point."""

    pass


class StiffnessError(NumericalError):
    """Picard iteration does not contract even on the smallest allowed window."""

    def __init__(self, message: str, window: float, ratio: float):
        super().__init__(message)
        self.window = window
        self.ratio = ratio


class IterationLimitError(NumericalError):
    def __init__(self, message: str, iterations: int):
        super().__init__(message)
        self.iterations = iterations


class StepRejected(NumericalError):
    """A marching or stepping scheme refused a step."""

    pass


class FitRejected(NumericalError):
    def __init__(self, message: str, r_squared: float):
        super().__init__(message)
        self.r_squared = r_squared
