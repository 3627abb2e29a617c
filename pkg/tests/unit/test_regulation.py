"""
Unit tests for the event-triggered output feedback regulator.

Covers the observer gains, checked coordinates, the held control law, the
controller vector field and its exact zero-order-hold update.
"""

import numpy as np
import pytest

from src.controllers.regulation import (
    BackstepLaw,
    InvalidLawError,
    ObserverNotHurwitzError,
    PolynomialGain,
    ZohController,
    build_observer,
    checked_coords,
    control_input,
    controller_rates,
    controller_zoh_step,
    lorenz_rho,
    observer_matrix,
    rho_probe_failures,
    take_latch,
)
from src.models.data_models import ControllerState, Latched
from src.models.exogen import NotHurwitzError, SteadyStateGenerator, synthesize
from src.utils.matlib import DimensionMismatchError, companion


def lorenz_internal_model():
    """Internal model of the Lorenz benchmark (Psi = [-5, 12, 3, 6])."""
    return synthesize(
        SteadyStateGenerator(varrho=[-9.0, 0.0, -10.0, 0.0]),
        M=companion([-4.0, -12.0, -13.0, -6.0]),
        N=[0.0, 0.0, 0.0, 1.0],
    )


def make_latch(e_k=0.0, xi_hat_k=(0.0, 0.0), eta_k=(0.0, 0.0, 0.0, 0.0), u_k=0.0, t_k=0.0):
    return Latched(t_k=t_k, e_k=e_k, eta_k=np.array(eta_k), xi_hat_k=np.array(xi_hat_k), u_k=u_k)


def rk4_controller(cs, latched, gains, im, dt, h):
    """Fine-step RK4 of controller_rates with the latched input held."""
    eta, xi = cs.eta.copy(), cs.xi_hat.copy()
    n_steps = int(round(dt / h))

    def rates(eta_, xi_):
        return controller_rates(ControllerState(eta=eta_, xi_hat=xi_), latched, gains, im, latched.u_k)

    for _ in range(n_steps):
        k1 = rates(eta, xi)
        k2 = rates(eta + 0.5 * h * k1[0], xi + 0.5 * h * k1[1])
        k3 = rates(eta + 0.5 * h * k2[0], xi + 0.5 * h * k2[1])
        k4 = rates(eta + h * k3[0], xi + h * k3[1])
        eta = eta + (h / 6.0) * (k1[0] + 2 * k2[0] + 2 * k3[0] + k4[0])
        xi = xi + (h / 6.0) * (k1[1] + 2 * k2[1] + 2 * k3[1] + k4[1])
    return eta, xi


class TestObserver:
    """Test cases for observer gains."""

    def test_benchmark_gains(self):
        """Test lambda = (2, 2) gives A_o = [[-2, 1], [-2, 0]]."""
        gains = build_observer([2.0, 2.0])
        np.testing.assert_array_equal(gains.A_o, [[-2.0, 1.0], [-2.0, 0.0]])
        np.testing.assert_array_equal(gains.B, [0.0, 1.0])
        assert gains.r == 2

    def test_zero_gains_rejected(self):
        """Test that lambda = (0, 0) is rejected."""
        with pytest.raises(ObserverNotHurwitzError, match="not Hurwitz"):
            build_observer([0.0, 0.0])

    def test_rejection_is_a_hurwitz_failure(self):
        """Test that the observer error is also a NotHurwitzError."""
        with pytest.raises(NotHurwitzError):
            build_observer([-1.0, 2.0])

    def test_factored_gains_accepted(self):
        """Test lambda = (3, 2), characteristic polynomial l^2 + 3 l + 2."""
        a_o = observer_matrix([3.0, 2.0])
        np.testing.assert_allclose(np.poly(a_o), [1.0, 3.0, 2.0], atol=1e-12)
        build_observer([3.0, 2.0])


class TestBackstepLaw:
    """Test cases for backstepping gains and checked coordinates."""

    def setup_method(self):
        """Set up the benchmark law."""
        self.law = BackstepLaw(rho=lorenz_rho(), sigma=0.4)

    def test_polynomial_gain_values(self):
        """Test rho_1(1) = 12 and rho_2(1) = 24."""
        rho1, rho2 = lorenz_rho()
        assert rho1(1.0) == 12.0
        assert rho2(1.0) == 24.0
        assert rho2 == PolynomialGain([12.0, 0.0, 12.0])

    def test_zero_chain(self):
        """Test that the origin maps to zero checked coordinates."""
        np.testing.assert_array_equal(checked_coords(0.0, np.zeros(2), self.law), [0.0, 0.0])

    def test_checked_coordinate_positive_error(self):
        """Test e = 1, xi_hat_2 = 2 gives xi_check_2 = 14."""
        np.testing.assert_allclose(checked_coords(1.0, np.array([0.0, 2.0]), self.law), [1.0, 14.0])

    def test_checked_coordinate_negative_error(self):
        """Test e = -1, xi_hat_2 = 12 gives xi_check_2 = 0."""
        np.testing.assert_allclose(checked_coords(-1.0, np.array([0.0, 12.0]), self.law), [-1.0, 0.0])

    def test_literal_first_coordinate(self):
        """Test the printed variant xi_check_2 = xi_hat_2 + rho_1(e)."""
        law = BackstepLaw(rho=lorenz_rho(), sigma=0.4, paper_literal_vartheta1=True)
        np.testing.assert_allclose(checked_coords(-1.0, np.array([0.0, 12.0]), law), [-1.0, 24.0])

    def test_virtual_control_sign(self):
        """Test sign(vartheta_i(s)) = -sign(s) for both stages over a wide range of s."""
        grid = np.concatenate([-np.logspace(-6, 3, 40), np.logspace(-6, 3, 40)])
        for i in (1, 2):
            for s in grid:
                assert np.sign(self.law.vartheta(i, s)) == -np.sign(s), f"vartheta_{i}({s})"
        assert self.law.vartheta(1, 0.0) == 0.0

    def test_wrong_observer_length(self):
        """Test that xi_hat must have r entries."""
        with pytest.raises(DimensionMismatchError, match="xi_hat must have length 2"):
            checked_coords(0.0, np.zeros(3), self.law)

    def test_sigma_out_of_range(self):
        """Test that sigma must lie in (0, 1)."""
        with pytest.raises(InvalidLawError, match="sigma must lie in"):
            BackstepLaw(rho=lorenz_rho(), sigma=1.0)

    def test_non_positive_gain_rejected(self):
        """Test that a gain with a sign change is rejected."""
        with pytest.raises(InvalidLawError, match="rho_2 is not positive"):
            BackstepLaw(rho=(PolynomialGain([1.0]), PolynomialGain([1.0, 1.0])), sigma=0.4)

    def test_gain_grid_failures_listed(self):
        """Test that every failing gain is named."""
        failures = rho_probe_failures((PolynomialGain([0.0]), PolynomialGain([1.0]), PolynomialGain([-1.0])))
        assert len(failures) == 2
        assert failures[0].startswith("rho_1")
        assert failures[1].startswith("rho_3")


class TestControlInput:
    """Test cases for the held control law."""

    def setup_method(self):
        """Set up law and internal model."""
        self.law = BackstepLaw(rho=lorenz_rho(), sigma=0.4)
        self.im = lorenz_internal_model()

    def test_zero_latch(self):
        """Test that all-zero latched values give u = 0."""
        assert control_input(make_latch(), self.law, self.im) == 0.0

    def test_backstepping_term(self):
        """Test xi_check_2 = 1, eta = 0 gives u = -24."""
        latched = make_latch(e_k=0.0, xi_hat_k=(0.0, 1.0))
        assert control_input(latched, self.law, self.im) == pytest.approx(-24.0, abs=1e-12)

    def test_internal_model_term(self):
        """Test xi_check_2 = 0, eta = e_1 gives u = Psi_1 = -5."""
        latched = make_latch(eta_k=(1.0, 0.0, 0.0, 0.0))
        assert control_input(latched, self.law, self.im) == pytest.approx(-5.0, abs=1e-9)

    def test_independent_of_current_state(self):
        """Test that moving the controller state away from the latch leaves u unchanged."""
        gains = build_observer([2.0, 2.0])
        cs = ControllerState(eta=[-0.35, 1.50, -1.49, 0.31], xi_hat=[-1.40, -5.96])
        latched = take_latch(0.0, 0.84, cs, self.law, self.im, k=0)
        u_before = control_input(latched, self.law, self.im)
        eta, xi_hat = controller_zoh_step(latched, gains, self.im, 0.05)
        assert not np.allclose(xi_hat, latched.xi_hat_k)
        cs.eta[:] = eta
        cs.xi_hat[:] = xi_hat
        assert control_input(latched, self.law, self.im) == u_before
        assert latched.u_k == u_before

    def test_take_latch_computes_control_once(self):
        """Test that take_latch stores the held control and copies the state."""
        cs = ControllerState(eta=[0.0, 0.0, 0.0, 0.0], xi_hat=[0.0, 1.0])
        latched = take_latch(0.5, 0.0, cs, self.law, self.im, k=3)
        cs.xi_hat[1] = 99.0
        assert latched.u_k == pytest.approx(-24.0, abs=1e-12)
        assert latched.xi_hat_k[1] == 1.0
        assert latched.k == 3 and latched.t_k == 0.5


class TestControllerRates:
    """Test cases for the controller vector field."""

    def setup_method(self):
        """Set up gains and internal model."""
        self.gains = build_observer([2.0, 2.0])
        self.im = lorenz_internal_model()

    def test_zero_everything(self):
        """Test that zero states and latch give zero rates."""
        cs = ControllerState(eta=np.zeros(4), xi_hat=np.zeros(2))
        eta_dot, xi_dot = controller_rates(cs, make_latch(), self.gains, self.im, 0.0)
        np.testing.assert_array_equal(eta_dot, np.zeros(4))
        np.testing.assert_array_equal(xi_dot, np.zeros(2))

    def test_injection_channel(self):
        """Test xi_hat = 0, e_k = 1, u = Psi eta_k gives xi_hat' = lambda."""
        eta_k = np.array([0.1, -0.2, 0.3, 0.4])
        u = float(self.im.Psi @ eta_k)
        cs = ControllerState(eta=np.zeros(4), xi_hat=np.zeros(2))
        _, xi_dot = controller_rates(cs, make_latch(e_k=1.0, eta_k=eta_k), self.gains, self.im, u)
        np.testing.assert_allclose(xi_dot, [2.0, 2.0], atol=1e-14)

    def test_internal_model_drive(self):
        """Test eta = 0, u = -24 gives eta' = (0, 0, 0, -24)."""
        cs = ControllerState(eta=np.zeros(4), xi_hat=np.zeros(2))
        eta_dot, _ = controller_rates(cs, make_latch(), self.gains, self.im, -24.0)
        np.testing.assert_array_equal(eta_dot, [0.0, 0.0, 0.0, -24.0])

    def test_shape_mismatch(self):
        """Test that states of the wrong size are rejected."""
        cs = ControllerState(eta=np.zeros(3), xi_hat=np.zeros(2))
        with pytest.raises(DimensionMismatchError, match="do not match"):
            controller_rates(cs, make_latch(), self.gains, self.im, 0.0)


class TestZohStep:
    """Test cases for the exact zero-order-hold controller update."""

    def setup_method(self):
        """Set up benchmark gains, law and a latch from the benchmark initial data."""
        self.gains = build_observer([2.0, 2.0])
        self.im = lorenz_internal_model()
        self.law = BackstepLaw(rho=lorenz_rho(), sigma=0.4)
        cs = ControllerState(eta=[-0.35, 1.50, -1.49, 0.31], xi_hat=[-1.40, -5.96])
        # e(0) = x1(0) - v1(0) = 0.50 + 0.34
        self.latched = take_latch(0.0, 0.84, cs, self.law, self.im, k=0)

    def test_zero_latch_stays_zero(self):
        """Test that a zero latch is a fixed point."""
        eta, xi = controller_zoh_step(make_latch(), self.gains, self.im, 0.01)
        np.testing.assert_array_equal(eta, np.zeros(4))
        np.testing.assert_array_equal(xi, np.zeros(2))

    def test_matches_fine_rk4(self):
        """Test agreement with RK4 at h = 1e-5 over 0.01 s."""
        eta, xi = controller_zoh_step(self.latched, self.gains, self.im, 0.01)
        start = ControllerState(eta=self.latched.eta_k, xi_hat=self.latched.xi_hat_k)
        eta_ref, xi_ref = rk4_controller(start, self.latched, self.gains, self.im, 0.01, 1e-5)
        np.testing.assert_allclose(eta, eta_ref, atol=1e-8)
        np.testing.assert_allclose(xi, xi_ref, atol=1e-8)

    def test_small_interval_matches_single_rk4_step(self):
        """Test the continuous limit against one RK4 micro-step."""
        dt = 1e-6
        eta, xi = controller_zoh_step(self.latched, self.gains, self.im, dt)
        start = ControllerState(eta=self.latched.eta_k, xi_hat=self.latched.xi_hat_k)
        eta_ref, xi_ref = rk4_controller(start, self.latched, self.gains, self.im, dt, dt)
        np.testing.assert_allclose(eta, eta_ref, atol=1e-12)
        np.testing.assert_allclose(xi, xi_ref, atol=1e-12)

    def test_cached_discretization_reused(self):
        """Test that repeated steps of one length share a discretization."""
        zoh = ZohController(gains=self.gains, im=self.im)
        start = ControllerState(eta=self.latched.eta_k, xi_hat=self.latched.xi_hat_k)
        first = zoh.advance(start, self.latched, 1e-3)
        second = zoh.advance(start, self.latched, 1e-3)
        assert len(zoh._cache) == 1
        np.testing.assert_array_equal(first.eta, second.eta)
