"""
Unit tests for the hybrid closed-loop simulation engine.

Fast tests use short horizons; the full 30 s Lorenz benchmark runs are
marked slow.
"""

import math

import numpy as np
import pytest

from src.controllers.hybridsim import (
    BracketInvalidError,
    HybridSimulator,
    NonFiniteStateError,
    locate_event,
    simulate,
)
from src.controllers.regulation import BackstepLaw, PolynomialGain, build_observer, lorenz_rho
from src.controllers.trigger import LorenzCoupling, TriggerPolicy, ZeroCoupling
from src.models.data_models import InitialConditions, SimConfig
from src.models.enums import ControllerMode, SimStatus
from src.models.exogen import Exosystem, SteadyStateGenerator, synthesize
from src.models.plant import LorenzParams, OutputFeedbackPlant, lorenz_exosystem, lorenz_plant
from src.utils.analysis import compute_metrics
from src.utils.matlib import DimensionMismatchError, companion


BENCH_W = np.array([0.5, -0.4, 0.1, -0.3, 0.2, -0.3, 0.4])

BENCH_INIT = dict(
    v=[-0.34, -0.94],
    z=[0.13, -0.67],
    x=[0.50, 0.30],
    xi_hat=[-1.40, -5.96],
    eta=[-0.35, 1.50, -1.49, 0.31],
)

ZERO_INIT = dict(v=[0.0, 0.0], z=[0.0, 0.0], x=[0.0, 0.0], xi_hat=[0.0, 0.0], eta=[0.0, 0.0, 0.0, 0.0])


def lorenz_components(delta=0.1, sigma=0.4, init=None, paper_literal=False, **cfg_fields):
    """Benchmark plant, exosystem and controller with a configurable run."""
    im = synthesize(
        SteadyStateGenerator(varrho=[-9.0, 0.0, -10.0, 0.0]),
        M=companion([-4.0, -12.0, -13.0, -6.0]),
        N=[0.0, 0.0, 0.0, 1.0],
    )
    gains = build_observer([2.0, 2.0])
    law = BackstepLaw(rho=lorenz_rho(), sigma=sigma, paper_literal_vartheta1=paper_literal)
    policy = TriggerPolicy(
        sigma=sigma, delta=delta, pi_r=LorenzCoupling(im.Psi, gains.lam), rho_r=law.rho[-1], n_eta=4
    )
    cfg_fields.setdefault("t_end", 30.0)
    cfg = SimConfig(w=BENCH_W, init=InitialConditions(**(init or BENCH_INIT)), **cfg_fields)
    plant = lorenz_plant(LorenzParams(w=BENCH_W))
    return plant, lorenz_exosystem(), gains, law, im, policy, cfg


class TestLocateEvent:
    """Test cases for crossing localization by bisection."""

    def test_linear_crossing(self):
        """Test g(t) = t - 1 on [0.5, 1.5]."""
        t_star = locate_event((0.5, -0.5), (1.5, 0.5), lambda t: t - 1.0, 1e-9)
        assert abs(t_star - 1.0) <= 1e-9
        assert t_star >= 1.0

    def test_quadratic_crossing(self):
        """Test g(t) = t^2 - 4 on [1, 3]."""
        t_star = locate_event((1.0, -3.0), (3.0, 5.0), lambda t: t * t - 4.0, 1e-10)
        assert abs(t_star - 2.0) <= 1e-10

    def test_no_sign_change(self):
        """Test that a bracket without a crossing is rejected."""
        with pytest.raises(BracketInvalidError, match="no sign change"):
            locate_event((0.0, 1.0), (1.0, 2.0), lambda t: t + 1.0, 1e-9)

    def test_empty_bracket(self):
        """Test that t_lo >= t_hi is rejected."""
        with pytest.raises(BracketInvalidError, match="empty bracket"):
            locate_event((1.0, -1.0), (1.0, 1.0), lambda t: t, 1e-9)

    def test_closed_loop_crossing_residual(self):
        """Test |g(t*)| is at the level of the localization tolerance on a real step."""
        sim = HybridSimulator(*lorenz_components(t_end=1.0, h=1e-3))
        y0 = sim._pack()
        latched = sim.latch_at(0.0, y0, 0)
        g0 = sim.trigger_at(y0, latched)
        # Find the first node where the rule fires, then localize inside that step.
        y, t = y0, 0.0
        while True:
            y_next = sim.step(y, sim.cfg.h, latched)
            g_next = sim.trigger_at(y_next, latched)
            if g_next >= 0.0:
                break
            y, t, g0 = y_next, t + sim.cfg.h, g_next
        y_start, t_start = y, t

        def g_of(tau):
            return sim.trigger_at(sim.step(y_start, tau - t_start, latched), latched)

        t_star = locate_event((t_start, g0), (t_start + sim.cfg.h, g_next), g_of, 1e-9)
        g_star = g_of(t_star)
        assert g_star >= 0.0
        # Local slope of g over the step bounds the residual
        slope = abs(g_next - g0) / sim.cfg.h
        assert g_star <= 10.0 * slope * 1e-9 + 1e-12


class TestSimulateEquilibrium:
    """Test cases for runs that start at the equilibrium."""

    def test_no_triggers_at_equilibrium(self):
        """Test e = 0, no triggers and zero states from zero initial data."""
        res = simulate(*lorenz_components(init=ZERO_INIT, t_end=2.0, h=1e-3))
        assert res.status is SimStatus.COMPLETED
        assert res.trigger_count == 0
        np.testing.assert_array_equal(res.column("e"), 0.0)
        assert np.max(np.abs(res.trace[:, 1:])) <= 1e-12

    def test_max_triggers_with_zero_delta(self):
        """Test that delta = 0 keeps firing until the trigger budget is spent."""
        res = simulate(*lorenz_components(delta=0.0, init=ZERO_INIT, t_end=1.0, h=1e-3, max_triggers=5))
        assert res.status is SimStatus.MAX_TRIGGERS
        assert res.trigger_count == 5

    def test_zeno_guard(self):
        """Test that an inter-event time below the guard stops the run."""
        res = simulate(*lorenz_components(
            delta=0.0, init=ZERO_INIT, t_end=1.0, h=1e-3, min_dwell_guard=1e-2
        ))
        assert res.status is SimStatus.ZENO_GUARD
        assert res.trigger_count == 0
        assert res.trace[-1, 0] < 1.0

    @pytest.mark.slow
    def test_equilibrium_full_horizon(self):
        """Test that the equilibrium is held over [0, 30] at the default step."""
        res = simulate(*lorenz_components(init=ZERO_INIT))
        assert res.trigger_count == 0
        assert np.max(np.abs(res.trace[:, 1:])) <= 1e-12


class TestSimulateLorenzShort:
    """Test cases for a short benchmark run."""

    @classmethod
    def setup_class(cls):
        """Run the benchmark for one second, once for the class."""
        cls.components = lorenz_components(t_end=1.0, h=1e-4, report_stride=10)
        cls.res = simulate(*cls.components)

    def test_completes_with_triggers(self):
        """Test that the run completes and the trigger fires."""
        assert self.res.status is SimStatus.COMPLETED
        assert self.res.trigger_count > 0
        assert self.res.initial_latch is not None and self.res.initial_latch.t_k == 0.0

    def test_trace_layout(self):
        """Test trace columns, first and last rows."""
        assert self.res.trace_columns[:5] == ("t", "e", "y", "y0", "u")
        assert self.res.trace_columns[-2:] == ("xihat1", "xihat2")
        assert self.res.trace.shape[1] == 5 + 2 + 2 + 2 + 4 + 2
        assert self.res.trace[0, 0] == 0.0
        assert self.res.trace[-1, 0] == pytest.approx(1.0, abs=1e-12)
        np.testing.assert_allclose(self.res.column("e"), self.res.column("y") - self.res.column("y0"), atol=1e-15)

    def test_initial_error(self):
        """Test e(0) = x1(0) - v1(0) = 0.84."""
        assert self.res.column("e")[0] == pytest.approx(0.84, abs=1e-15)

    def test_post_latch_values(self):
        """Test that every re-latch resets g to -sigma^2 rho_r(xi_check) xi_check^2 - delta^2."""
        policy = self.components[5]
        for rec in self.res.trigger_log:
            xi = rec.xi_check_r
            expected = -policy.sigma ** 2 * (policy.rho_r(xi) * xi * xi) - policy.delta ** 2
            assert rec.g_post == pytest.approx(expected, abs=1e-12)

    def test_pre_latch_values_localized(self):
        """Test that the localized crossing has g >= 0 up to rounding."""
        for rec in self.res.trigger_log:
            assert rec.g_pre >= -1e-9, f"trigger {rec.k}: g_pre={rec.g_pre}"

    def test_log_ordering(self):
        """Test strictly increasing trigger times, consecutive indices and positive dwell."""
        times = [rec.t_k for rec in self.res.trigger_log]
        assert all(b > a for a, b in zip(times, times[1:]))
        assert [rec.k for rec in self.res.trigger_log] == list(range(1, len(times) + 1))
        assert min(rec.dwell for rec in self.res.trigger_log) > 10 * 1e-9

    def test_no_missed_events_at_nodes(self):
        """Test that the rule is not satisfied at any reported node."""
        lhs, rhs = self.res.condition[:, 1], self.res.condition[:, 2]
        assert np.all(lhs < rhs)

    def test_zoh_mode_agrees(self):
        """Test that the zero-order-hold controller reproduces the continuous run."""
        plant, exo, gains, law, im, policy, _ = self.components
        cfg = SimConfig(
            t_end=1.0, h=1e-4, w=BENCH_W, init=InitialConditions(**BENCH_INIT),
            controller_mode=ControllerMode.ZOH,
        )
        res = simulate(plant, exo, gains, law, im, policy, cfg)
        assert res.status is SimStatus.COMPLETED
        assert abs(res.trigger_count - self.res.trigger_count) <= 1
        np.testing.assert_allclose(res.trace[-1, 1], self.res.trace[-1, 1], atol=1e-3)


class TestSimulateErrors:
    """Test cases for dimension checks and blow-up."""

    def test_dimension_mismatch(self):
        """Test that initial data of the wrong size is rejected."""
        init = dict(BENCH_INIT, eta=[0.0, 0.0])
        with pytest.raises(DimensionMismatchError, match="eta\\(0\\) has size 2"):
            HybridSimulator(*lorenz_components(init=init, t_end=1.0))

    def test_non_finite_state(self):
        """Test that a finite-escape plant raises NonFiniteStateError."""
        plant = OutputFeedbackPlant(
            r=1, n_z=0,
            f=lambda z, y, v, w: np.zeros(0),
            g=(lambda z, y, v, w: 1e6 * y * y * y,),
            b=lambda w: 1.0,
        )
        exo = Exosystem(S=np.zeros((1, 1)), q=lambda v, w: float(v[0]))
        im = synthesize(SteadyStateGenerator(varrho=[0.0]))
        gains = build_observer([1.0])
        law = BackstepLaw(rho=(PolynomialGain([1.0]),), sigma=0.4)
        policy = TriggerPolicy(sigma=0.4, delta=0.1, pi_r=ZeroCoupling(), rho_r=law.rho[-1], n_eta=1)
        init = InitialConditions(v=[0.0], z=np.zeros(0), x=[1e3], eta=[0.0], xi_hat=[0.0])
        cfg = SimConfig(t_end=1.0, h=1e-3, w=np.zeros(1), init=init)
        with np.errstate(over="ignore", invalid="ignore"):
            with pytest.raises(NonFiniteStateError, match="non-finite"):
                simulate(plant, exo, gains, law, im, policy, cfg)


def _in_range(count, nominal):
    return 0.8 * nominal <= count <= 1.2 * nominal


@pytest.mark.slow
class TestLorenzBenchmark:
    """Full-length benchmark runs on [0, 30] at h = 1e-4."""

    @classmethod
    def setup_class(cls):
        """Run both delta values once for the whole class."""
        cls.runs = {}
        for delta in (0.1, 0.01):
            res = simulate(*lorenz_components(delta=delta))
            cls.runs[delta] = (res, compute_metrics(res, (25.0, 30.0)))

    def _count_in_range(self, delta, nominal):
        res, _ = self.runs[delta]
        if _in_range(res.trigger_count, nominal):
            return True
        literal = simulate(*lorenz_components(delta=delta, paper_literal=True))
        return _in_range(literal.trigger_count, nominal)

    def test_delta_01_tail_error(self):
        """Test tail sup |e| <= 0.022 on [25, 30] for delta = 0.1."""
        assert self.runs[0.1][1].tail_sup_error <= 0.022

    def test_delta_001_tail_error(self):
        """Test tail sup |e| <= 0.0088 on [25, 30] for delta = 0.01."""
        assert self.runs[0.01][1].tail_sup_error <= 0.0088

    def test_trigger_counts(self):
        """Test trigger counts within 20% of 271 and 478."""
        assert self._count_in_range(0.1, 271)
        assert self._count_in_range(0.01, 478)

    def test_no_zeno(self):
        """Test completed runs with a minimum dwell well above the localization tolerance."""
        for res, metrics in self.runs.values():
            assert res.status is SimStatus.COMPLETED
            assert metrics.min_dwell > 10 * 1e-9

    def test_ordering(self):
        """Test that a smaller delta gives more triggers and a smaller tail error."""
        coarse, fine = self.runs[0.1], self.runs[0.01]
        assert fine[0].trigger_count > coarse[0].trigger_count
        assert fine[1].tail_sup_error < coarse[1].tail_sup_error

    def test_bounded_states(self):
        """Test that all states stay bounded."""
        for res, _ in self.runs.values():
            assert np.all(np.isfinite(res.trace))
            assert np.max(np.abs(res.trace[:, 1:])) < 1e3

    def test_latch_reset_invariant(self):
        """Test the post-latch trigger value at every logged trigger."""
        for delta, (res, _) in self.runs.items():
            for rec in res.trigger_log:
                xi = rec.xi_check_r
                rho = 12.0 * (xi * xi + 1.0)
                expected = -0.16 * rho * xi * xi - delta ** 2
                assert rec.g_post == pytest.approx(expected, abs=1e-12, rel=1e-12)

    def test_grid_convergence(self):
        """Test that halving h changes the count by <= 2% and the tail error by <= 5%."""
        res, metrics = self.runs[0.1]
        half = simulate(*lorenz_components(delta=0.1, h=5e-5, report_stride=20))
        half_metrics = compute_metrics(half, (25.0, 30.0))
        assert abs(half.trigger_count - res.trigger_count) <= max(1, math.ceil(0.02 * res.trigger_count))
        assert abs(half_metrics.tail_sup_error - metrics.tail_sup_error) <= 0.05 * metrics.tail_sup_error
