"""Time-series diagnostics: per-record scalars, decay fits, monotonicity and
oracle comparisons."""

from __future__ import annotations

import csv
from dataclasses import astuple, dataclass, fields
from typing import Optional, Sequence

import numpy as np

from . import geometry
from .errors import InsufficientSignal, MismatchedSampling
from .geometry import TWO_PI

DIAGNOSTICS_HEADER = (
    "tau,L,A,alpha,deficit,k_min,k_max,r_in,pan_yang,bonnesen,"
    "closure_cos,closure_sin,conv_kr,conv_k2piL"
)
DEFICIT_FLOOR = 1e-13


@dataclass(frozen=True)
class DiagnosticsRecord:
    tau: float
    L: float
    A: float
    alpha: float
    deficit: float  # raw, not clamped
    k_min: float
    k_max: float
    r_in: float
    pan_yang: float
    bonnesen: float
    closure_cos: float
    closure_sin: float
    conv_kr: float
    conv_k2piL: float

    def row(self) -> list[str]:
        return [f"{v:.17g}" for v in astuple(self)]


def record(state) -> DiagnosticsRecord:
    """Collect every monitored scalar for one flow state."""
    q = state.quantities
    k = state.curvature
    cc, cs = state.closure_residuals()
    return DiagnosticsRecord(
        tau=float(state.tau),
        L=q.L,
        A=q.A,
        alpha=q.alpha,
        deficit=q.deficit_raw,
        k_min=q.k_min,
        k_max=q.k_max,
        r_in=q.r_in,
        pan_yang=geometry.pan_yang_residual(q.L, q.A, q.alpha),
        bonnesen=geometry.bonnesen_residual(q.L, q.A, q.r_in),
        closure_cos=cc,
        closure_sin=cs,
        conv_kr=float(np.max(np.abs(k * q.r_in - 1.0))),
        conv_k2piL=float(np.max(np.abs(k - TWO_PI / q.L))),
    )


def series(records: Sequence[DiagnosticsRecord], key: str) -> np.ndarray:
    return np.array([getattr(r, key) for r in records], dtype=float)


def write_csv(path, records: Sequence[DiagnosticsRecord]) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(DIAGNOSTICS_HEADER + "\n")
        for rec in records:
            fh.write(",".join(rec.row()) + "\n")


def read_csv(path) -> list[DiagnosticsRecord]:
    names = [f.name for f in fields(DiagnosticsRecord)]
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    return [DiagnosticsRecord(**{n: float(row[n]) for n in names}) for row in rows]


@dataclass(frozen=True)
class DecayFit:
    rate: float
    intercept: float
    residual_rms: float
    window: tuple[float, float]
    samples: int


def fit_decay_rate(taus, deficits, window=None, scale: float = 1.0) -> DecayFit:
    """Least-squares slope of log(deficit) against tau over ``window``.

    ``scale`` is the L^2 used for the roundoff floor (deficit must exceed
    1e-13 * scale at every sample in the window).
    """
    taus = np.asarray(taus, dtype=float)
    d = np.asarray(deficits, dtype=float)
    lo, hi = (taus[0], taus[-1]) if window is None else window
    sel = (taus >= lo - 1e-12) & (taus <= hi + 1e-12)
    t, y = taus[sel], d[sel]
    if len(t) < 10:
        raise InsufficientSignal(f"only {len(t)} samples in window [{lo}, {hi}]; need 10")
    if t[-1] - t[0] < 1.0 - 1e-12:
        raise InsufficientSignal(f"window spans {t[-1] - t[0]:.3g} < 1.0 time units")
    floor = DEFICIT_FLOOR * scale
    if np.any(y <= floor):
        first = float(t[np.argmax(y <= floor)])
        raise InsufficientSignal(f"deficit reaches the roundoff floor at tau = {first:.4g}")
    logy = np.log(y)
    rate, intercept = np.polyfit(t, logy, 1)
    resid = logy - (rate * t + intercept)
    return DecayFit(
        rate=float(rate),
        intercept=float(intercept),
        residual_rms=float(np.sqrt(np.mean(resid**2))),
        window=(float(t[0]), float(t[-1])),
        samples=len(t),
    )


def signal_window(taus, deficits, scale: float = 1.0) -> Optional[tuple[float, float]]:
    """Longest leading window whose deficits stay above the roundoff floor."""
    taus = np.asarray(taus, dtype=float)
    below = np.asarray(deficits, dtype=float) <= DEFICIT_FLOOR * scale
    end = int(np.argmax(below)) if below.any() else len(taus)
    if end < 10 or taus[end - 1] - taus[0] < 1.0:
        return None
    return float(taus[0]), float(taus[end - 1])


@dataclass(frozen=True)
class MonotoneVerdict:
    passed: bool
    index: Optional[int] = None  # first j with s[j] violating against s[j-1]
    excess: float = 0.0

    def __bool__(self):
        return self.passed


def assert_monotone(values, direction: str = "down", tol: float = 0.0) -> MonotoneVerdict:
    """Check s[j+1] <= s[j] + tol (down) or s[j+1] >= s[j] - tol (up)."""
    s = np.asarray(values, dtype=float)
    if len(s) < 2:
        raise ValueError("need at least two samples")
    if direction == "down":
        diff = np.diff(s)
    elif direction == "up":
        diff = -np.diff(s)
    else:
        raise ValueError(f"direction must be 'down' or 'up', got {direction!r}")
    bad = np.nonzero(diff > tol)[0]
    if len(bad) == 0:
        return MonotoneVerdict(True)
    j = int(bad[0])
    return MonotoneVerdict(False, j + 1, float(diff[j]))


@dataclass(frozen=True)
class ComparisonRow:
    tau: float
    sup_err: float
    L_err: float
    A_err: float


def compare_trajectories(states, oracle, tol: float = 1e-12) -> list[ComparisonRow]:
    """Sup-norm node error of finite-difference states against the spectral oracle."""
    if len(states) > len(oracle.taus):
        raise MismatchedSampling(f"{len(states)} states but {len(oracle.taus)} oracle samples")
    rows = []
    for j, st in enumerate(states):
        if abs(st.tau - oracle.taus[j]) > tol * max(1.0, abs(st.tau)):
            raise MismatchedSampling(f"sample {j}: tau {st.tau} vs oracle {oracle.taus[j]}")
        F = oracle.states[j]
        exact = F.support(st.curve.theta)
        sup = float(np.max(np.abs(st.curve.values - exact)))
        h = TWO_PI / len(exact)
        L_fd = h * float(np.sum(st.curve.values))
        A_fd = 0.5 * h * float(np.sum(st.curve.values * st.radius))
        rows.append(ComparisonRow(float(st.tau), sup, abs(L_fd - F.L), abs(A_fd - F.A)))
    return rows
