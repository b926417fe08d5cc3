"""Area-preserving nonlocal flow of convex plane curves, in support-function form."""

from .errors import (
    AliasedInput,
    ConvexityViolation,
    InfeasibleLP,
    InsufficientSignal,
    MismatchedSampling,
    ModeUnderflow,
    NonpositiveCurvature,
    NotConvexInput,
    NumericalBlowup,
    SmoothingFailed,
)
from .geometry import CurveQuantities, SupportCurve, ThetaGrid
from .solver import (
    AreaPreserving,
    Constant,
    FlowState,
    LengthPreserving,
    SolverConfig,
    Tabulated,
    run_flow,
)
from .spectral import FourierSupport, evolve_exact

__version__ = "0.1.0"
