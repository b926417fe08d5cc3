import numpy as np
import pytest

from curveflow import geometry as g
from curveflow import solver as sv
from curveflow import spectral as sp
from curveflow.errors import ConvexityViolation, NonpositiveCurvature
from curveflow.geometry import SupportCurve, ThetaGrid

from .conftest import harmonic


def state_of(curve, tau=0.0, kind="support"):
    s = sv.initial_state(curve, kind)
    return sv.FlowState(tau, s.data, kind)


class TestAlpha:
    def test_circle_all_modes_agree(self):
        c = SupportCurve.from_function(lambda t: np.full_like(t, 2.0), 64)
        s = state_of(c)
        assert sv.alpha_eval(sv.AreaPreserving(), s) == pytest.approx(2.0, rel=1e-14)
        assert sv.alpha_eval(sv.LengthPreserving(), s) == pytest.approx(2.0, rel=1e-14)

    def test_harmonic(self):
        s = state_of(harmonic(2, 0.1, M=64))
        assert sv.alpha_eval(sv.AreaPreserving(), s) == pytest.approx(1.045, rel=1e-12)
        assert sv.alpha_eval(sv.LengthPreserving(), s) == pytest.approx(1.0, rel=1e-14)

    def test_constant(self):
        s = state_of(harmonic(2, 0.1, M=64))
        assert sv.alpha_eval(sv.Constant(0.7), s) == 0.7
        for bad in (0.0, -1.0, np.inf):
            with pytest.raises(ValueError):
                sv.Constant(bad)

    def test_tabulated(self):
        mode = sv.Tabulated((0.0, 1.0), (1.0, 3.0))
        assert mode(0.5, 1.0, 1.0) == 2.0
        assert mode(-1.0, 1.0, 1.0) == 1.0
        assert mode(7.0, 1.0, 1.0) == 3.0
        with pytest.raises(ValueError):
            sv.Tabulated((1.0, 0.0), (1.0, 2.0))
        with pytest.raises(ValueError):
            sv.Tabulated((0.0, 1.0), (1.0,))


class TestRHS:
    def test_support_circle_is_stationary(self):
        S = np.full(64, 1.3)
        assert np.max(np.abs(sv.support_rhs(S, 1.3))) <= 1e-14

    def test_support_harmonic(self):
        eps = 0.1
        c = harmonic(2, eps, M=64)
        alpha = 1 + 4.5 * eps**2
        expected = -3 * eps * np.cos(2 * c.theta) - 4.5 * eps**2
        assert np.max(np.abs(sv.support_rhs(c.values, alpha) - expected)) <= 1e-13

    def test_curvature_circle(self):
        k = np.full(64, 0.5)
        # (k alpha - 1) k with alpha = 1/k vanishes
        assert np.max(np.abs(sv.curvature_rhs(k, 2.0))) <= 1e-15
        # away from equilibrium the nonlocal term is k^2 (alpha - 1/k)
        assert np.allclose(sv.curvature_rhs(k, 2.1), 0.25 * 0.1, atol=1e-15)

    def test_curvature_matches_support_form(self):
        # k_t = -k^2 r_t with r_t = (S_t)'' + S_t
        c = SupportCurve.from_function(lambda t: 1 + 0.04 * np.cos(3 * t) + 0.02 * np.sin(2 * t), 128)
        r = g.radius_of_curvature(c)
        alpha = 1.1
        St = sv.support_rhs(c.values, alpha)
        kt = -(1 / r) ** 2 * g.radius_from_support(St)
        assert np.max(np.abs(sv.curvature_rhs(1 / r, alpha) - kt)) <= 1e-10

    def test_curvature_rejects_nonpositive(self):
        k = np.ones(32)
        k[5] = 0.0
        with pytest.raises(NonpositiveCurvature):
            sv.curvature_rhs(k, 1.0)


class TestStep:
    def test_circle_fixed(self):
        c = SupportCurve.from_function(lambda t: np.full_like(t, 1.7), 64)
        s = state_of(c)
        for _ in range(10):
            s = sv.step(s, 1e-3, sv.AreaPreserving())
        assert np.max(np.abs(s.data - 1.7)) <= 1e-13

    def test_one_step_matches_exact(self):
        c = harmonic(2, 0.1, M=256)
        s1 = sv.step(state_of(c), 1e-4, sv.AreaPreserving())
        F = sp.evolve_exact(sp.to_fourier(c, 64), 1e-4)
        assert np.max(np.abs(s1.data - F.support(c.theta))) <= 1e-12
        assert s1.tau == 1e-4

    def test_curvature_step_tracks_support_step(self):
        c = SupportCurve.from_function(lambda t: 1 + 0.05 * np.cos(3 * t) + 0.03 * np.sin(2 * t), 64)
        a = state_of(c)
        b = state_of(c, kind="curvature")
        for _ in range(800):
            a = sv.step(a, 2.5e-4, sv.AreaPreserving())
            b = sv.step(b, 2.5e-4, sv.AreaPreserving())
        assert np.max(np.abs(a.curvature - b.curvature)) <= 1e-11
        assert max(abs(x) for x in b.closure_residuals()) <= 1e-11

    def test_rejects_convexity_loss(self):
        # r = 1 - 0.96 cos 3theta; at dt = 0.375 the RK4 amplification of mode 3 exceeds 1
        c = harmonic(3, 0.12, M=64)
        with pytest.raises(ConvexityViolation):
            sv.step(state_of(c), 0.375, sv.Constant(1.0))


class TestConfig:
    def test_cfl(self):
        assert sv.cfl_limit(256) == pytest.approx(1.3553839e-4, rel=1e-7)
        sv.SolverConfig(M=256, dt=1e-4).validate()
        with pytest.raises(ValueError):
            sv.SolverConfig(M=256, dt=2e-4).validate()
        sv.SolverConfig(M=256, dt=2e-4).validate(strict_cfl=False)

    @pytest.mark.parametrize(
        "kw", [dict(M=15), dict(M=8), dict(dt=0.0), dict(t_end=-1.0), dict(record_every=0),
               dict(solver_kind="level"), dict(scheme="euler")]
    )
    def test_invalid(self, kw):
        with pytest.raises(ValueError):
            sv.SolverConfig(**{"M": 64, "dt": 1e-4, **kw}).validate()

    def test_steps(self):
        assert sv.SolverConfig(dt=1e-4, t_end=1.0).n_steps == 10000
        assert sv.SolverConfig(dt=0.3, t_end=1.0).n_steps == 4


class TestRunFlow:
    def test_records_and_final_time(self):
        c = harmonic(2, 0.1, M=64)
        res = sv.run_flow(c, sv.SolverConfig(M=64, dt=1e-3, t_end=0.25, record_every=100),
                          sv.AreaPreserving())
        assert res.completed
        assert [s.tau for s in res.states] == [0.0, 0.1, 0.2, 0.25]
        assert len(res.records) == 4

    def test_uneven_final_step(self):
        c = harmonic(2, 0.1, M=64)
        res = sv.run_flow(c, sv.SolverConfig(M=64, dt=2e-3, t_end=0.005, record_every=100),
                          sv.AreaPreserving())
        assert res.final.tau == 0.005
        F = sp.evolve_exact(sp.to_fourier(c, 31), 0.005)
        assert np.max(np.abs(res.final.data - F.support(c.theta))) <= 1e-12

    def test_grid_mismatch(self):
        with pytest.raises(ValueError):
            sv.run_flow(harmonic(2, 0.1, M=64), sv.SolverConfig(M=128), sv.AreaPreserving())

    def test_blowup_without_cfl_guard(self):
        c = harmonic(2, 0.1, M=64)
        cfg = sv.SolverConfig(M=64, dt=1e-2, t_end=1.0, record_every=10)
        res = sv.run_flow(c, cfg, sv.AreaPreserving(), strict_cfl=False)
        assert res.status in (sv.STATUS_BLOWUP, sv.STATUS_CONVEXITY)
        assert res.states and res.final.tau < 1.0

    def test_length_preserving(self):
        c = harmonic(2, 0.1, M=64)
        res = sv.run_flow(c, sv.SolverConfig(M=64, dt=1e-3, t_end=3.0, record_every=100),
                          sv.LengthPreserving())
        L = np.array([r.L for r in res.records])
        A = np.array([r.A for r in res.records])
        assert np.max(np.abs(L - L[0])) / L[0] <= 1e-12
        assert np.all(np.diff(A) >= -1e-13 * A[0])
        assert res.records[-1].deficit <= 1e-6 * res.records[0].deficit

    def test_constant_alpha_line_regime(self):
        c = harmonic(2, 0.1, M=64)
        res = sv.run_flow(c, sv.SolverConfig(M=64, dt=1e-3, t_end=20.0, record_every=200),
                          sv.Constant(0.5), with_records=False)
        assert res.status == sv.STATUS_LINE
        assert res.k_max_trend[-1] < 0.01 * res.k_max_trend[0]

    def test_tabulated_point_regime(self):
        c = harmonic(2, 0.1, M=64)
        res = sv.run_flow(c, sv.SolverConfig(M=64, dt=1e-3, t_end=20.0, record_every=200),
                          sv.Tabulated((0.0, 3.0), (1.0, 1.5)), with_records=False)
        assert res.status == sv.STATUS_POINT

    def test_callback(self):
        seen = []
        c = harmonic(2, 0.1, M=64)
        sv.run_flow(c, sv.SolverConfig(M=64, dt=1e-3, t_end=0.05, record_every=10),
                    sv.AreaPreserving(), on_record=lambda j, s: seen.append((j, s.tau)))
        assert [j for j, _ in seen] == list(range(6))


class TestEccentricEllipse:
    """A 4:1 ellipse leaves the convex class under the exact harmonic evolution.

    The finite-difference solver must report this rather than continue, and
    the exact solution must confirm the loss independently.
    """

    @staticmethod
    def ellipse(M, a=2.0, b=0.5):
        return SupportCurve.from_function(
            lambda t: np.sqrt(a * a * np.cos(t) ** 2 + b * b * np.sin(t) ** 2), M
        )

    def test_oracle_loses_convexity(self):
        F = sp.to_fourier(self.ellipse(4096), 2047)
        assert F.min_radius()[2] > 0.12
        with pytest.raises(ConvexityViolation):
            sp.evolve_exact(F, 0.1)
        raw = sp.FourierSupport(F.a, F.b, F.L, F.A, validate=False)
        assert sp.evolve_exact(raw, 0.04).min_radius()[2] > 0
        assert sp.evolve_exact(raw, 0.1).min_radius()[2] < -0.05

    def test_solver_reports_violation(self):
        c = self.ellipse(256)
        res = sv.run_flow(c, sv.SolverConfig(M=256, dt=1e-4, t_end=0.3, record_every=100),
                          sv.AreaPreserving(), with_records=False)
        assert res.status == sv.STATUS_CONVEXITY
        # last kept record is the one before the violating step
        assert res.final.tau == pytest.approx(0.04)
        assert "r[" in res.message

    @pytest.mark.parametrize("ratio", [1.5, 2.0, 3.0])
    def test_moderate_ellipses_stay_convex(self, ratio):
        F = sp.to_fourier(self.ellipse(2048, ratio, 1.0), 1023)
        for t in (0.02, 0.05, 0.1, 0.2, 0.5):
            assert sp.evolve_exact(F, t).min_radius()[2] > 0
