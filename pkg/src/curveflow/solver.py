"""Explicit RK4 method-of-lines solvers for the nonlocal curve flow.

Two formulations on the tangent-angle grid, both spectral in space:

* support:   S_t = S'' + S - alpha
* curvature: k_t = k'' - (2/k) k'^2 + (k alpha - 1) k

alpha is re-evaluated from the stage data at every RK4 stage.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Optional

import numpy as np

from . import geometry
from .errors import ConvexityViolation, NonpositiveCurvature, NumericalBlowup
from .geometry import TWO_PI, SupportCurve, ThetaGrid

log = logging.getLogger(__name__)

CFL_SAFETY = 0.9
LINE_FACTOR = 1e3
POINT_FACTOR = 1e-3


# -- alpha laws ---------------------------------------------------------------


@dataclass(frozen=True)
class AreaPreserving:
    name = "area"

    def __call__(self, tau: float, L: float, int_r2: float) -> float:
        return int_r2 / L


@dataclass(frozen=True)
class LengthPreserving:
    name = "length"

    def __call__(self, tau, L, int_r2):
        return L / TWO_PI


@dataclass(frozen=True)
class Constant:
    c: float
    name = "constant"

    def __post_init__(self):
        if not (np.isfinite(self.c) and self.c > 0):
            raise ValueError(f"constant alpha must be positive and finite, got {self.c}")

    def __call__(self, tau, L, int_r2):
        return self.c


@dataclass(frozen=True)
class Tabulated:
    """Piecewise-linear alpha(t), held constant outside the table."""

    times: tuple
    values: tuple
    name = "tabulated"

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float)
        v = np.asarray(self.values, dtype=float)
        if t.ndim != 1 or t.shape != v.shape or len(t) < 1:
            raise ValueError("tabulated alpha needs equal-length, non-empty times and values")
        if np.any(np.diff(t) <= 0):
            raise ValueError("tabulated times must be strictly increasing")
        if not np.all(np.isfinite(v)):
            raise ValueError("tabulated values must be finite")
        object.__setattr__(self, "times", tuple(t))
        object.__setattr__(self, "values", tuple(v))

    def __call__(self, tau, L, int_r2):
        return float(np.interp(tau, self.times, self.values))


AlphaMode = AreaPreserving | LengthPreserving | Constant | Tabulated


# -- configuration and state --------------------------------------------------


def cfl_limit(M: int) -> float:
    return 0.25 * (TWO_PI / M) ** 2 * CFL_SAFETY


@dataclass(frozen=True)
class SolverConfig:
    M: int = 256
    dt: float = 1e-4
    t_end: float = 1.0
    record_every: int = 100
    solver_kind: str = "support"
    scheme: str = "rk4"

    def validate(self, strict_cfl: bool = True) -> None:
        ThetaGrid(self.M)
        if self.solver_kind not in ("support", "curvature"):
            raise ValueError(f"unknown solver kind {self.solver_kind!r}")
        if self.scheme != "rk4":
            raise ValueError("only the rk4 scheme is available")
        if not (np.isfinite(self.dt) and self.dt > 0):
            raise ValueError(f"dt must be positive, got {self.dt}")
        if not (np.isfinite(self.t_end) and self.t_end > 0):
            raise ValueError(f"t_end must be positive, got {self.t_end}")
        if int(self.record_every) != self.record_every or self.record_every < 1:
            raise ValueError("record_every must be a positive integer")
        limit = cfl_limit(self.M)
        if self.dt > limit:
            msg = f"dt = {self.dt:g} exceeds the explicit stability bound {limit:.4g} for M = {self.M}"
            if strict_cfl:
                raise ValueError(msg)
            log.warning(msg)

    @property
    def n_steps(self) -> int:
        return int(np.ceil(self.t_end / self.dt - 1e-9))


@dataclass(frozen=True)
class FlowState:
    """Solution at one time.

    ``data`` holds support values (support solver) or curvature values
    (curvature solver).  Derived geometry is computed on first access.
    """

    tau: float
    data: np.ndarray
    kind: str = "support"

    @cached_property
    def radius(self) -> np.ndarray:
        if self.kind == "support":
            return geometry.radius_from_support(self.data)
        return 1.0 / self.data

    @cached_property
    def curve(self) -> SupportCurve:
        if self.kind == "support":
            return SupportCurve(ThetaGrid(len(self.data)), self.data)
        return SupportCurve(ThetaGrid(len(self.data)), geometry.support_from_radius(self.radius))

    @cached_property
    def quantities(self) -> geometry.CurveQuantities:
        return geometry.quantities(self.curve)

    @property
    def length(self) -> float:
        return TWO_PI * float(np.mean(self.radius))

    @property
    def curvature(self) -> np.ndarray:
        return self.data if self.kind == "curvature" else 1.0 / self.radius

    def closure_residuals(self) -> tuple[float, float]:
        return geometry.closure_residuals(self.radius)


def alpha_eval(mode, state: FlowState) -> float:
    r = state.radius
    h = TWO_PI / len(r)
    return float(mode(state.tau, h * np.sum(r), h * np.sum(r * r)))


# -- right-hand sides ---------------------------------------------------------


def support_rhs(S: np.ndarray, alpha: float) -> np.ndarray:
    """S'' + S - alpha.  Callers check convexity of S beforehand."""
    return geometry.radius_from_support(S) - alpha


def curvature_rhs(k: np.ndarray, alpha: float) -> np.ndarray:
    i = int(np.argmin(k))
    if not k[i] > 0:
        raise NonpositiveCurvature(i, k[i])
    M = len(k)
    coef = np.fft.rfft(k)
    n = np.arange(M // 2 + 1, dtype=float)
    dk = np.fft.irfft(coef * 1j * np.where(n == M // 2, 0.0, n), n=M)
    d2k = np.fft.irfft(coef * (-(n**2)), n=M)
    return d2k - 2.0 * dk * dk / k + (k * alpha - 1.0) * k


def _support_stage(mode, tau, S):
    r = geometry.radius_from_support(S)
    h = TWO_PI / len(S)
    L = h * np.sum(S)
    return r - mode(tau, L, h * np.sum(r * r))


def _curvature_stage(mode, tau, k):
    inv = 1.0 / k
    h = TWO_PI / len(k)
    alpha = mode(tau, h * np.sum(inv), h * np.sum(inv * inv))
    return curvature_rhs(k, alpha)


def step(state: FlowState, dt: float, mode) -> FlowState:
    """One classical RK4 step, alpha recomputed at each stage."""
    f: Callable = _support_stage if state.kind == "support" else _curvature_stage
    t, y = state.tau, state.data
    k1 = f(mode, t, y)
    k2 = f(mode, t + 0.5 * dt, y + 0.5 * dt * k1)
    k3 = f(mode, t + 0.5 * dt, y + 0.5 * dt * k2)
    k4 = f(mode, t + dt, y + dt * k3)
    y_new = y + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    if not np.all(np.isfinite(y_new)):
        raise NumericalBlowup(f"non-finite values at tau = {t + dt:.6g}")
    new = FlowState(t + dt, y_new, state.kind)
    r = new.radius
    if state.kind == "curvature" and not np.all(y_new > 0):
        i = int(np.argmin(y_new))
        raise ConvexityViolation(i, 1.0 / y_new[i] if y_new[i] else -np.inf)
    geometry.check_radius(r, new.length)
    return new


# -- run loop -----------------------------------------------------------------

STATUS_COMPLETED = "completed"
STATUS_CONVEXITY = "ConvexityViolation"
STATUS_BLOWUP = "NumericalBlowup"
STATUS_LINE = "LineRegime"
STATUS_POINT = "PointRegime"


@dataclass
class FlowResult:
    states: list = field(default_factory=list)
    records: list = field(default_factory=list)
    status: str = STATUS_COMPLETED
    message: str = ""
    k_max_trend: Optional[list] = None

    @property
    def completed(self) -> bool:
        return self.status == STATUS_COMPLETED

    @property
    def final(self) -> FlowState:
        return self.states[-1]


def initial_state(curve: SupportCurve, kind: str = "support") -> FlowState:
    r = geometry.radius_of_curvature(curve)
    if kind == "support":
        return FlowState(0.0, np.array(curve.values), "support")
    return FlowState(0.0, 1.0 / r, "curvature")


def run_flow(
    initial: SupportCurve,
    config: SolverConfig,
    mode,
    *,
    strict_cfl: bool = True,
    with_records: bool = True,
    on_record: Optional[Callable[[int, FlowState], None]] = None,
) -> FlowResult:
    """Integrate to ``config.t_end``, keeping a state every ``record_every`` steps.

    The last state is always kept.  Failures stop the run and are reported in
    the result status with the partial trajectory retained.
    """
    from .diagnostics import record  # diagnostics only needs FlowState duck-typed

    config.validate(strict_cfl=strict_cfl)
    if initial.grid.M != config.M:
        raise ValueError(f"initial curve has M = {initial.grid.M}, config says {config.M}")
    state = initial_state(initial, config.solver_kind)
    L0 = state.length
    result = FlowResult()

    def keep(i, s):
        result.states.append(s)
        if with_records:
            result.records.append(record(s))
        if on_record is not None:
            on_record(len(result.states) - 1, s)

    keep(0, state)
    n = config.n_steps
    for i in range(1, n + 1):
        dt = min(config.dt, config.t_end - (i - 1) * config.dt)
        try:
            nxt = step(state, dt, mode)
        except (ConvexityViolation, NonpositiveCurvature) as exc:
            result.status, result.message = STATUS_CONVEXITY, str(exc)
            break
        except NumericalBlowup as exc:
            result.status, result.message = STATUS_BLOWUP, str(exc)
            break
        # pin the clock to the step index to avoid summation drift
        state = FlowState(min(i * config.dt, config.t_end), nxt.data, nxt.kind)
        L = state.length
        if L > LINE_FACTOR * L0:
            result.status = STATUS_LINE
            result.message = f"L grew past {LINE_FACTOR:g} x L(0) at tau = {state.tau:.6g}"
            keep(i, state)
            break
        if L < POINT_FACTOR * L0:
            result.status = STATUS_POINT
            result.message = f"L shrank below {POINT_FACTOR:g} x L(0) at tau = {state.tau:.6g}"
            keep(i, state)
            break
        if i % config.record_every == 0 or i == n:
            keep(i, state)

    if result.status == STATUS_LINE:
        result.k_max_trend = [float(np.max(s.curvature)) for s in result.states]
    if result.status != STATUS_COMPLETED:
        log.info("run stopped: %s", result.message)
    return result
