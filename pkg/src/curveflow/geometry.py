"""Support-function representation of strictly convex plane curves.

A convex curve is stored as samples of its support function S on a uniform
grid of normal angles theta_i = 2*pi*i/M.  The unit vector
z(theta) = (cos theta, sin theta) is the inward normal, so S > 0 whenever the
origin lies inside the curve.  In this gauge

    r = S'' + S            (radius of curvature, 1/k)
    L = int S dtheta
    A = 1/2 int S r dtheta
    alpha = (1/L) int r^2 dtheta   (= (1/L) int (1/k) ds)

Derivatives are spectral (FFT) and integrals use the trapezoidal rule, which
is exact for trigonometric polynomials of degree < M.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.optimize import linprog
from scipy.spatial import ConvexHull, QhullError

from .errors import (
    ConvexityViolation,
    InfeasibleLP,
    NotConvexInput,
    SmoothingFailed,
    SnapshotFormatError,
)

log = logging.getLogger(__name__)

TWO_PI = 2.0 * np.pi
CONVEXITY_RTOL = 1e-8
SNAPSHOT_HEADER = "theta,S,x,y,r"


@dataclass(frozen=True)
class ThetaGrid:
    """Uniform periodic grid of M normal angles on [0, 2pi)."""

    M: int

    def __post_init__(self):
        if int(self.M) != self.M or self.M < 16 or self.M % 2:
            raise ValueError(f"grid size must be an even integer >= 16, got {self.M}")

    @property
    def nodes(self) -> np.ndarray:
        return TWO_PI * np.arange(self.M) / self.M

    @property
    def h(self) -> float:
        return TWO_PI / self.M

    @property
    def wavenumbers(self) -> np.ndarray:
        return np.arange(self.M // 2 + 1, dtype=float)

    def integrate(self, values: np.ndarray) -> float:
        return float(self.h * np.sum(values))


def spectral_derivative(values: np.ndarray, order: int = 1) -> np.ndarray:
    """Periodic FFT derivative of samples on a uniform [0, 2pi) grid."""
    M = values.shape[-1]
    coef = np.fft.rfft(values)
    k = np.arange(M // 2 + 1, dtype=float)
    if order % 2:
        factor = (1j * k) ** order
        factor[-1] = 0.0  # odd derivatives of the Nyquist mode are not representable
    else:
        factor = (-(k**2)) ** (order // 2)
    return np.fft.irfft(coef * factor, n=M)


def radius_from_support(values: np.ndarray) -> np.ndarray:
    """S'' + S computed in one Fourier multiply (first harmonics cancel exactly)."""
    M = values.shape[-1]
    k = np.arange(M // 2 + 1, dtype=float)
    return np.fft.irfft(np.fft.rfft(values) * (1.0 - k**2), n=M)


def support_from_radius(r: np.ndarray) -> np.ndarray:
    """Invert S'' + S = r on the grid.

    The kernel of the operator (first harmonics) is a translation; this choice
    drops it, and also drops any first harmonic present in ``r`` (which a closed
    curve does not have).
    """
    M = r.shape[-1]
    k = np.arange(M // 2 + 1, dtype=float)
    denom = 1.0 - k**2
    denom[1] = np.inf
    return np.fft.irfft(np.fft.rfft(r) / denom, n=M)


@dataclass(frozen=True)
class SupportCurve:
    grid: ThetaGrid
    values: np.ndarray

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        if vals.shape != (self.grid.M,):
            raise ValueError(f"expected {self.grid.M} samples, got shape {vals.shape}")
        if not np.all(np.isfinite(vals)):
            raise ValueError("support values must be finite")
        vals = vals.copy()
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    @classmethod
    def from_function(cls, func, M: int) -> "SupportCurve":
        grid = ThetaGrid(M)
        return cls(grid, func(grid.nodes))

    @property
    def theta(self) -> np.ndarray:
        return self.grid.nodes

    def translated(self, c1: float, c2: float) -> "SupportCurve":
        """Add c1 cos + c2 sin; moves the curve by (-c1, -c2)."""
        th = self.theta
        return SupportCurve(self.grid, self.values + c1 * np.cos(th) + c2 * np.sin(th))


@dataclass(frozen=True)
class CurveQuantities:
    L: float
    A: float
    alpha: float
    deficit: float
    k_min: float
    k_max: float
    r_in: float
    deficit_raw: float = 0.0


def convexity_tolerance(L: float) -> float:
    return CONVEXITY_RTOL * L / TWO_PI


def radius_of_curvature(curve: SupportCurve) -> np.ndarray:
    """Per-node radius of curvature; raises ConvexityViolation if min r is not positive."""
    r = radius_from_support(curve.values)
    check_radius(r, curve.grid.integrate(curve.values))
    return r


def check_radius(r: np.ndarray, L: float) -> None:
    tol = convexity_tolerance(abs(L))
    i = int(np.argmin(r))
    if not r[i] > tol:
        raise ConvexityViolation(i, r[i], tol)


def closure_residuals(r: np.ndarray) -> tuple[float, float]:
    """First-harmonic moments int r cos, int r sin; zero for a closed curve."""
    M = r.shape[-1]
    th = TWO_PI * np.arange(M) / M
    h = TWO_PI / M
    return float(h * np.sum(r * np.cos(th))), float(h * np.sum(r * np.sin(th)))


def length(curve: SupportCurve) -> float:
    radius_of_curvature(curve)
    return curve.grid.integrate(curve.values)


def area(curve: SupportCurve) -> float:
    r = radius_of_curvature(curve)
    return 0.5 * curve.grid.integrate(curve.values * r)


def alpha_area(curve: SupportCurve) -> float:
    """The nonlocal average (1/L) int (1/k) ds that keeps the area fixed."""
    r = radius_of_curvature(curve)
    return curve.grid.integrate(r * r) / curve.grid.integrate(curve.values)


def deficit_raw(curve: SupportCurve) -> float:
    L = length(curve)
    return L * L - 4.0 * np.pi * area(curve)


def deficit(curve: SupportCurve) -> float:
    """Isoperimetric deficit L^2 - 4 pi A, clamped at zero."""
    raw = deficit_raw(curve)
    if raw < 0.0:
        L = length(curve)
        if raw < -1e-10 * L * L:
            log.warning("deficit %.3e below roundoff tolerance", raw)
        log.debug("clamping raw deficit %.3e to 0", raw)
        return 0.0
    return raw


def reconstruct_points(curve: SupportCurve) -> np.ndarray:
    """Curve points gamma = -S z - S' z_theta, one per node, shape (M, 2).

    The polygon is positively oriented.
    """
    radius_of_curvature(curve)
    S = curve.values
    dS = spectral_derivative(S, 1)
    th = curve.theta
    c, s = np.cos(th), np.sin(th)
    return np.column_stack((-S * c + dS * s, -S * s - dS * c))


def support_of_points(points: np.ndarray, theta: np.ndarray) -> np.ndarray:
    """max_j <p_j, -z(theta_i)> for every angle."""
    pts = np.asarray(points, dtype=float)
    z = np.column_stack((np.cos(theta), np.sin(theta)))
    return np.max(-z @ pts.T, axis=1)


def inradius(curve: SupportCurve, return_center: bool = False):
    """Radius of the largest disk inside the curve.

    Solves max t s.t. <c, -z_i> + t <= S_i with HiGHS, then re-evaluates t as
    min_i(S_i + <c, z_i>) at the returned centre so the value is exactly
    feasible.
    """
    radius_of_curvature(curve)
    th = curve.theta
    S = curve.values
    A_ub = np.column_stack((-np.cos(th), -np.sin(th), np.ones_like(th)))
    res = linprog(
        c=[0.0, 0.0, -1.0],
        A_ub=A_ub,
        b_ub=S,
        bounds=[(None, None)] * 3,
        method="highs",
    )
    if res.status != 0 or res.x is None:
        raise InfeasibleLP(f"inradius LP failed: {res.message}")
    center = res.x[:2]
    t = float(np.min(S - A_ub[:, :2] @ center))
    if return_center:
        return t, (float(center[0]), float(center[1]))
    return t


def quantities(curve: SupportCurve, with_inradius: bool = True) -> CurveQuantities:
    r = radius_of_curvature(curve)
    grid = curve.grid
    L = grid.integrate(curve.values)
    A = 0.5 * grid.integrate(curve.values * r)
    raw = L * L - 4.0 * np.pi * A
    return CurveQuantities(
        L=L,
        A=A,
        alpha=grid.integrate(r * r) / L,
        deficit=max(raw, 0.0),
        k_min=1.0 / float(np.max(r)),
        k_max=1.0 / float(np.min(r)),
        r_in=inradius(curve) if with_inradius else float("nan"),
        deficit_raw=raw,
    )


def check_pan_yang(curve: SupportCurve) -> float:
    """alpha*L - (L^2 - 2 pi A)/pi; nonnegative for closed convex C^2 curves."""
    q = quantities(curve, with_inradius=False)
    return pan_yang_residual(q.L, q.A, q.alpha)


def pan_yang_residual(L: float, A: float, alpha: float) -> float:
    return alpha * L - (L * L - 2.0 * np.pi * A) / np.pi


def check_bonnesen(curve: SupportCurve) -> float:
    """(L^2/A - 4 pi) - (L - 2 pi r_in)^2 / A; nonnegative."""
    q = quantities(curve)
    return bonnesen_residual(q.L, q.A, q.r_in)


def bonnesen_residual(L: float, A: float, r_in: float) -> float:
    return (L * L / A - 4.0 * np.pi) - (L - TWO_PI * r_in) ** 2 / A


def _polygon_coefficients(vertices: np.ndarray, n_max: int) -> np.ndarray:
    """Exact complex Fourier coefficients s_n, n = 0..n_max, of a polygon's support.

    ``vertices`` must be in counterclockwise order.  The radius of curvature of
    a polygon is sum_e len_e * delta(theta - theta_e) over edges with inward
    normal angle theta_e, so s_n = r_n / (1 - n^2) except for the translation
    mode n = 1, which is integrated piecewise over the vertex arcs.
    """
    edges = np.roll(vertices, -1, axis=0) - vertices
    lengths = np.hypot(edges[:, 0], edges[:, 1])
    normal_angle = np.arctan2(edges[:, 0], -edges[:, 1])  # inward normal (-dy, dx)
    n = np.arange(n_max + 1)
    r_hat = (lengths[None, :] * np.exp(-1j * np.outer(n, normal_angle))).sum(axis=1) / TWO_PI
    denom = 1.0 - n.astype(float) ** 2
    denom[1] = np.inf
    s_hat = r_hat / denom

    # vertex j supports the arc between the normals of edges j-1 and j
    start = np.roll(normal_angle, 1)
    stop = start + np.mod(normal_angle - start, TWO_PI)
    x, y = vertices[:, 0], vertices[:, 1]

    def antiderivative(t):
        cc = t / 2 + np.sin(2 * t) / 4
        sc = np.sin(t) ** 2 / 2
        ss = t / 2 - np.sin(2 * t) / 4
        # -(x cos + y sin)(cos - i sin)
        return -(x * cc + y * sc) + 1j * (x * sc + y * ss)

    s_hat[1] = np.sum(antiderivative(stop) - antiderivative(start)) / TWO_PI
    return s_hat


def _fejer_weights(n_keep: int) -> np.ndarray:
    w = 1.0 - np.arange(n_keep + 1) / (n_keep + 1.0)
    w[:2] = 1.0  # mean and translation modes are kept as they are
    return w


def support_from_polygon(points, grid: ThetaGrid) -> SupportCurve:
    """Smoothed support function of a convex polygon sampled on ``grid``.

    Points are recentred on their centroid, the polygon support is sampled at
    the grid angles and then restricted to the lowest M//3 harmonics.  Sharp
    truncation is tried first (spectrally accurate for samples of smooth
    curves).  Polygons with genuine corners make the truncated r oscillate
    negative, so they fall back to a Fejer-weighted projection of the exact
    (unaliased) polygon coefficients, whose kernel is nonnegative.
    """
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 2 or len(pts) < 3:
        raise NotConvexInput("need at least 3 points of shape (n, 2)")
    if not np.all(np.isfinite(pts)):
        raise NotConvexInput("non-finite coordinates")
    try:
        hull = ConvexHull(pts)
    except QhullError as exc:
        raise NotConvexInput(f"degenerate point set: {exc}".splitlines()[0]) from None
    unique = np.unique(pts, axis=0)
    if len(hull.vertices) != len(unique):
        raise NotConvexInput(
            f"{len(unique) - len(hull.vertices)} of {len(unique)} points are not hull vertices"
        )

    pts = pts - pts.mean(axis=0)
    raw = support_of_points(pts, grid.nodes)
    n_keep = grid.M // 3
    coef = np.fft.rfft(raw)
    k = grid.wavenumbers

    sharp = np.fft.irfft(np.where(k <= n_keep, coef, 0.0), n=grid.M)
    L = grid.integrate(sharp)
    if np.min(radius_from_support(sharp)) > convexity_tolerance(L):
        return SupportCurve(grid, sharp)

    hull_pts = pts[hull.vertices]
    s_hat = _polygon_coefficients(hull_pts, n_keep) * _fejer_weights(n_keep)
    spec = np.zeros(grid.M // 2 + 1, dtype=complex)
    spec[: n_keep + 1] = grid.M * s_hat
    fejer = np.fft.irfft(spec, n=grid.M)
    r = radius_from_support(fejer)
    if np.min(r) > convexity_tolerance(grid.integrate(fejer)):
        log.debug("polygon smoothed with Fejer weights (%d modes)", n_keep)
        return SupportCurve(grid, fejer)
    raise SmoothingFailed(
        f"projection onto {n_keep} harmonics is not strictly convex (min r = {np.min(r):.3g})"
    )


def write_snapshot(path, curve: SupportCurve) -> None:
    r = radius_of_curvature(curve)
    pts = reconstruct_points(curve)
    data = np.column_stack((curve.theta, curve.values, pts, r))
    np.savetxt(path, data, delimiter=",", header=SNAPSHOT_HEADER, comments="", fmt="%.17g")


def read_snapshot(path) -> SupportCurve:
    """Load the theta and S columns of a snapshot file."""
    text = Path(path).read_text().splitlines()
    if not text or text[0].strip() != SNAPSHOT_HEADER:
        raise SnapshotFormatError(f"{path}: missing header {SNAPSHOT_HEADER!r}")
    rows = []
    for lineno, line in enumerate(text[1:], start=2):
        if not line.strip():
            continue
        fields = line.split(",")
        if len(fields) != 5:
            raise SnapshotFormatError(f"{path}:{lineno}: expected 5 fields, got {len(fields)}")
        try:
            rows.append([float(f) for f in fields])
        except ValueError:
            raise SnapshotFormatError(f"{path}:{lineno}: unparseable number") from None
    data = np.array(rows).reshape(-1, 5)
    M = len(data)
    if M < 16 or M % 2:
        raise SnapshotFormatError(f"{path}: {M} rows is not a valid grid size")
    grid = ThetaGrid(M)
    if not np.allclose(data[:, 0], grid.nodes, rtol=0, atol=1e-12):
        raise SnapshotFormatError(f"{path}: theta column is not the uniform grid of size {M}")
    return SupportCurve(grid, data[:, 1])
