"""Exception types raised across the package."""


class CurveflowError(Exception):
    """Base class for all package errors."""


class ConvexityViolation(CurveflowError):
    """Radius of curvature is not positive at some node."""

    def __init__(self, index: int, value: float, tol: float = 0.0):
        self.index = int(index)
        self.value = float(value)
        self.tol = float(tol)
        super().__init__(
            f"ConvexityViolation: r[{self.index}] = {self.value:.6g} <= {self.tol:.3g}"
        )


class NonpositiveCurvature(CurveflowError):
    def __init__(self, index: int, value: float):
        self.index = int(index)
        self.value = float(value)
        super().__init__(f"NonpositiveCurvature: k[{self.index}] = {self.value:.6g}")


class InfeasibleLP(CurveflowError):
    pass


class NotConvexInput(CurveflowError):
    pass


class SmoothingFailed(CurveflowError):
    pass


class AliasedInput(CurveflowError):
    pass


class ModeUnderflow(CurveflowError):
    pass


class NumericalBlowup(CurveflowError):
    pass


class InsufficientSignal(CurveflowError):
    pass


class MismatchedSampling(CurveflowError):
    pass


class SnapshotFormatError(CurveflowError, ValueError):
    pass


class ConfigError(CurveflowError, ValueError):
    pass
