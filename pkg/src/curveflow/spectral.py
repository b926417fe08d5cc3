"""Closed-form evolution of the area-preserving flow in harmonic coordinates.

Write S = L/2pi + u with u = sum_n a_n cos(n theta) + b_n sin(n theta).  Under
S_t = S'' + S - alpha with the area-preserving alpha, every harmonic obeys

    a_n(t) = a_n(0) * exp((1 - n^2) t)

(n = 1 is a translation and stays put), the area is constant, and the length
follows from the identity

    L^2 = 4 pi A + 2 pi^2 sum_{n>=2} (n^2 - 1)(a_n^2 + b_n^2).

Subtracting L/2pi and scaling by exp(-t) turns r = 1/k into a solution of the
heat equation on the circle, whose n-th mode decays as exp(-n^2 t).
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import geometry
from .errors import AliasedInput, ConvexityViolation, ModeUnderflow, SnapshotFormatError
from .geometry import TWO_PI, SupportCurve, ThetaGrid

DEFAULT_MODES = 64
IDENTITY_RTOL = 1e-8
ALIAS_RTOL = 1e-8
MODE_FLOOR = 1e-14
SPECTRAL_HEADER = "n,a,b"


@dataclass(frozen=True)
class FourierSupport:
    """Harmonics n = 1..N of u = S - L/2pi, plus the invariant payload (L, A).

    ``a[n-1]`` and ``b[n-1]`` are the cosine and sine coefficients of mode n.
    """

    a: np.ndarray
    b: np.ndarray
    L: float
    A: float
    validate: bool = field(default=True, repr=False, compare=False)

    def __post_init__(self):
        a = np.array(self.a, dtype=float)
        b = np.array(self.b, dtype=float)
        if a.shape != b.shape or a.ndim != 1:
            raise ValueError("cosine and sine coefficient arrays must have equal 1-d shape")
        for arr in (a, b):
            arr.setflags(write=False)
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)
        if self.validate:
            self._check()

    @property
    def n_modes(self) -> int:
        return len(self.a)

    @property
    def n(self) -> np.ndarray:
        return np.arange(1, self.n_modes + 1, dtype=float)

    @classmethod
    def from_harmonics(cls, L: float, a=(), b=()) -> "FourierSupport":
        """Build from L and harmonics, filling A from the length identity."""
        a = np.asarray(a, dtype=float)
        b = np.asarray(b, dtype=float)
        size = max(len(a), len(b))
        a = np.pad(a, (0, size - len(a)))
        b = np.pad(b, (0, size - len(b)))
        n = np.arange(1, size + 1, dtype=float)
        A = (L * L - 2.0 * np.pi**2 * np.sum((n**2 - 1.0) * (a * a + b * b))) / (4.0 * np.pi)
        return cls(a, b, L, A)

    def harmonic_energy(self) -> float:
        """sum (n^2 - 1)(a_n^2 + b_n^2), the deficit divided by 2 pi^2."""
        n = self.n
        return float(np.sum((n * n - 1.0) * (self.a**2 + self.b**2)))

    def identity_residual(self) -> float:
        """Relative defect of L^2 = 4 pi A + 2 pi^2 sum (n^2-1)(a^2+b^2)."""
        rhs = 4.0 * np.pi * self.A + 2.0 * np.pi**2 * self.harmonic_energy()
        return abs(self.L**2 - rhs) / self.L**2

    def support(self, theta) -> np.ndarray:
        theta = np.asarray(theta, dtype=float)
        nt = np.outer(theta, self.n)
        return self.L / TWO_PI + np.cos(nt) @ self.a + np.sin(nt) @ self.b

    def radius(self, theta) -> np.ndarray:
        theta = np.asarray(theta, dtype=float)
        n = self.n
        nt = np.outer(theta, n)
        w = 1.0 - n * n
        return self.L / TWO_PI + np.cos(nt) @ (w * self.a) + np.sin(nt) @ (w * self.b)

    def min_radius(self) -> tuple[int, float, float]:
        """(index, theta, r) at the smallest radius on a grid fine enough for N modes."""
        M = max(256, 8 * (self.n_modes + 1))
        n = self.n
        spec = np.zeros(M // 2 + 1, dtype=complex)
        spec[0] = M * self.L / TWO_PI
        spec[1 : self.n_modes + 1] = 0.5 * M * (1.0 - n * n) * (self.a - 1j * self.b)
        r = np.fft.irfft(spec, n=M)
        i = int(np.argmin(r))
        return i, TWO_PI * i / M, float(r[i])

    def _check(self):
        if not (self.L > 0 and self.A > 0):
            raise ValueError(f"need L > 0 and A > 0, got L={self.L}, A={self.A}")
        res = self.identity_residual()
        if res > IDENTITY_RTOL:
            raise ValueError(f"length/area/harmonic identity violated (relative defect {res:.3e})")
        i, _, r = self.min_radius()
        tol = geometry.convexity_tolerance(self.L)
        if not r > tol:
            raise ConvexityViolation(i, r, tol)


def to_fourier(curve: SupportCurve, n_modes: int = DEFAULT_MODES) -> FourierSupport:
    M = curve.grid.M
    if not 1 <= n_modes <= M // 2 - 1:
        raise ValueError(f"n_modes must lie in [1, {M // 2 - 1}] for M = {M}, got {n_modes}")
    geometry.radius_of_curvature(curve)
    coef = np.fft.rfft(curve.values) / M
    kept = coef[1 : n_modes + 1]
    dropped = coef[n_modes + 1 :]
    # Parseval with the real-signal weighting (interior modes count twice)
    weights = np.full(len(coef), 2.0)
    weights[0] = 1.0
    weights[-1] = 1.0
    total = float(np.sum(weights * np.abs(coef) ** 2))
    high = float(np.sum(weights[n_modes + 1 :] * np.abs(dropped) ** 2))
    if high > ALIAS_RTOL * total:
        raise AliasedInput(
            f"{high / total:.3e} of the energy lies above mode {n_modes}; raise n_modes or smooth"
        )
    return FourierSupport(
        a=2.0 * kept.real,
        b=-2.0 * kept.imag,
        L=TWO_PI * coef[0].real,
        A=geometry.area(curve),
    )


def from_fourier(F: FourierSupport, grid: ThetaGrid) -> SupportCurve:
    curve = SupportCurve(grid, F.support(grid.nodes))
    geometry.radius_of_curvature(curve)
    return curve


def evolve_exact(F0: FourierSupport, tau: float) -> FourierSupport:
    """Advance the harmonics by ``tau``; A is carried over untouched."""
    if tau < 0:
        raise ValueError("tau must be nonnegative")
    n = F0.n
    decay = np.exp((1.0 - n * n) * tau)
    a = F0.a * decay
    b = F0.b * decay
    energy = np.sum((n * n - 1.0) * (a * a + b * b))
    L = float(np.sqrt(4.0 * np.pi * F0.A + 2.0 * np.pi**2 * energy))
    return replace(F0, a=a, b=b, L=L)


def deficit_closed_form(F0: FourierSupport, tau: float = 0.0) -> float:
    n = F0.n
    w = (n * n - 1.0) * (F0.a**2 + F0.b**2)
    return float(2.0 * np.pi**2 * np.sum(w * np.exp(2.0 * (1.0 - n * n) * tau)))


def alpha_closed_form(F: FourierSupport, tau: float = 0.0) -> float:
    if tau:
        F = evolve_exact(F, tau)
    n = F.n
    s = np.sum((n * n - 1.0) ** 2 * (F.a**2 + F.b**2))
    return float(F.L / TWO_PI + np.pi / F.L * s)


def length_rate(F: FourierSupport) -> float:
    """dL/dt = L - 2 pi alpha in harmonic form."""
    n = F.n
    s = np.sum((n * n - 1.0) ** 2 * (F.a**2 + F.b**2))
    return float(-2.0 * np.pi**2 / F.L * s)


@dataclass(frozen=True)
class SpectralTrajectory:
    initial: FourierSupport
    taus: np.ndarray
    states: tuple
    L: np.ndarray
    alpha: np.ndarray
    deficit: np.ndarray

    def curve(self, j: int, grid: ThetaGrid) -> SupportCurve:
        return from_fourier(self.states[j], grid)


def spectral_trajectory(F0: FourierSupport, taus) -> SpectralTrajectory:
    taus = np.asarray(taus, dtype=float)
    if taus.ndim != 1 or len(taus) == 0 or taus[0] != 0.0 or np.any(np.diff(taus) <= 0):
        raise ValueError("sample times must start at 0 and increase strictly")
    states = tuple(evolve_exact(F0, t) for t in taus)
    return SpectralTrajectory(
        initial=F0,
        taus=taus,
        states=states,
        L=np.array([F.L for F in states]),
        alpha=np.array([alpha_closed_form(F) for F in states]),
        deficit=np.array([deficit_closed_form(F0, t) for t in taus]),
    )


@dataclass(frozen=True)
class ModeDecay:
    n: int
    measured: float
    expected: float

    @property
    def rel_error(self) -> float:
        return abs(self.measured - self.expected) / self.expected


def _heat_modes(r: np.ndarray, tau: float) -> np.ndarray:
    """Complex harmonics of w = (r - L/2pi) exp(-tau)."""
    M = len(r)
    L = TWO_PI * float(np.mean(r))
    w = (r - L / TWO_PI) * np.exp(-tau)
    return 2.0 * np.fft.rfft(w) / M


def heat_mode_check(tau1: float, r1, tau2: float, r2, modes=None) -> list[ModeDecay]:
    """Compare measured decay of the heat variable w with exp(-n^2 (tau2 - tau1)).

    ``r1`` and ``r2`` are samples of 1/k on the same uniform grid.  Without an
    explicit ``modes`` list, every mode whose amplitude at ``tau1`` clears the
    underflow floor is reported.  Requested modes below the floor, or modes
    that decay below it by ``tau2``, raise ModeUnderflow.
    """
    r1 = np.asarray(r1, dtype=float)
    r2 = np.asarray(r2, dtype=float)
    if r1.shape != r2.shape:
        raise ValueError("radius samples must share a grid")
    if not tau2 > tau1:
        raise ValueError("need tau1 < tau2")
    w1 = _heat_modes(r1, tau1)
    w2 = _heat_modes(r2, tau2)
    top = len(r1) // 2 - 1
    if modes is None:
        modes = [n for n in range(1, top + 1) if abs(w1[n]) >= MODE_FLOOR]
    report = []
    for n in modes:
        if not 1 <= n <= top:
            raise ValueError(f"mode {n} outside 1..{top}")
        if abs(w1[n]) < MODE_FLOOR or abs(w2[n]) < MODE_FLOOR:
            raise ModeUnderflow(f"mode {n}: |w| = {abs(w1[n]):.2e} -> {abs(w2[n]):.2e}")
        ratio = abs(w2[n]) / abs(w1[n])
        report.append(ModeDecay(n, ratio, float(np.exp(-(n * n) * (tau2 - tau1)))))
    return report


def write_spectral_state(path, F: FourierSupport) -> None:
    rows = np.column_stack((F.n, F.a, F.b))
    rows = np.vstack(([0.0, F.L, F.A], rows))
    with open(path, "w") as fh:
        fh.write(SPECTRAL_HEADER + "\n")
        for n, a, b in rows:
            fh.write(f"{int(n)},{a:.17g},{b:.17g}\n")


def read_spectral_state(path) -> FourierSupport:
    lines = Path(path).read_text().splitlines()
    if not lines or lines[0].strip() != SPECTRAL_HEADER:
        raise SnapshotFormatError(f"{path}: missing header {SPECTRAL_HEADER!r}")
    try:
        rows = [[float(x) for x in ln.split(",")] for ln in lines[1:] if ln.strip()]
        data = np.array(rows).reshape(-1, 3)
    except ValueError:
        raise SnapshotFormatError(f"{path}: malformed row") from None
    if len(data) < 2 or not np.array_equal(data[:, 0], np.arange(len(data))):
        raise SnapshotFormatError(f"{path}: rows must be numbered 0..N")
    return FourierSupport(data[1:, 1], data[1:, 2], L=data[0, 1], A=data[0, 2])
