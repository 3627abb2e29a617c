"""
Unit tests for data models.

Tests the Latched, ClosedLoopState, SimConfig, SimResult and Metrics
dataclasses for proper validation and behavior.
"""

import math

import numpy as np
import pytest
from src.models import (
    ClosedLoopState,
    ControllerState,
    InitialConditions,
    Latched,
    Metrics,
    SimConfig,
    SimResult,
    TriggerRecord,
)
from src.models.enums import SimStatus


def make_init():
    return InitialConditions(v=[0.1, 0.2], z=[0.0, 0.0], x=[0.5, 0.3], eta=[0.0] * 4, xi_hat=[0.0, 0.0])


def make_latch(t_k=0.0, k=0):
    return Latched(t_k=t_k, e_k=0.2, eta_k=np.zeros(4), xi_hat_k=np.zeros(2), u_k=1.5, k=k)


def make_record(k, t_k, dwell):
    return TriggerRecord(k=k, t_k=t_k, dwell=dwell, g_pre=0.0, g_post=-0.01, xi_check_r=0.0)


class TestControllerState:
    """Test cases for the ControllerState dataclass."""

    def test_coercion(self):
        """Test lists are coerced to float vectors."""
        cs = ControllerState(eta=[1, 2], xi_hat=[3])
        assert cs.eta.dtype == np.float64
        np.testing.assert_array_equal(cs.xi_hat, [3.0])

    def test_copy_is_independent(self):
        """Test that copy() does not share storage."""
        cs = ControllerState(eta=[1.0], xi_hat=[2.0])
        dup = cs.copy()
        dup.eta[0] = 9.0
        assert cs.eta[0] == 1.0

    def test_non_finite_rejected(self):
        """Test ControllerState rejects NaN entries."""
        with pytest.raises(ValueError, match="eta must have finite entries"):
            ControllerState(eta=[math.nan], xi_hat=[0.0])


class TestLatched:
    """Test cases for the Latched dataclass."""

    def test_creation(self):
        """Test creating a latch with valid data."""
        latch = make_latch(k=3)
        assert latch.k == 3
        assert latch.u_k == 1.5

    def test_frozen(self):
        """Test that a latch cannot be modified."""
        latch = make_latch()
        with pytest.raises(AttributeError):
            latch.u_k = 0.0

    def test_negative_index(self):
        """Test Latched rejects a negative trigger index."""
        with pytest.raises(ValueError, match="non-negative integer"):
            make_latch(k=-1)

    def test_invalid_type(self):
        """Test Latched raises TypeError for a non-numeric held input."""
        with pytest.raises(TypeError, match="u_k must be a number"):
            Latched(t_k=0.0, e_k=0.0, eta_k=[0.0], xi_hat_k=[0.0], u_k="1.0")

    def test_infinite_value(self):
        """Test Latched rejects an infinite output sample."""
        with pytest.raises(ValueError, match="e_k must be finite"):
            Latched(t_k=0.0, e_k=math.inf, eta_k=[0.0], xi_hat_k=[0.0], u_k=0.0)


class TestClosedLoopState:
    """Test cases for the ClosedLoopState dataclass."""

    def test_tracking_error(self):
        """Test e = x_1 - q(v, w)."""
        state = ClosedLoopState(
            t=1.0, v=[0.1, 0.2], z=[0.0, 0.0], x=[0.5, 0.3], eta=[0.0] * 4, xi_hat=[0.0, 0.0], latched=make_latch()
        )
        assert state.tracking_error(lambda v, w: v[0], np.zeros(7)) == pytest.approx(0.4)
        np.testing.assert_array_equal(state.controller.eta, np.zeros(4))

    def test_latch_after_current_time(self):
        """Test that the latch time cannot exceed the current time."""
        with pytest.raises(ValueError, match="latch time"):
            ClosedLoopState(
                t=1.0, v=[0.0], z=[], x=[0.0], eta=[0.0], xi_hat=[0.0], latched=make_latch(t_k=2.0)
            )


class TestSimConfig:
    """Test cases for the SimConfig dataclass."""

    def test_defaults(self):
        """Test default step, tolerance and guards."""
        cfg = SimConfig(t_end=30.0, w=np.zeros(7), init=make_init())
        assert cfg.h == 1e-4
        assert cfg.event_tol == 1e-9
        assert cfg.min_dwell_guard == 1e-7
        assert cfg.report_stride == 10

    def test_timing_order(self):
        """Test that event_tol < h < t_end is enforced."""
        with pytest.raises(ValueError, match="0 < event_tol < h < t_end"):
            SimConfig(t_end=30.0, w=np.zeros(7), init=make_init(), h=1e-4, event_tol=1e-3)
        with pytest.raises(ValueError, match="0 < event_tol < h < t_end"):
            SimConfig(t_end=1e-5, w=np.zeros(7), init=make_init())

    def test_max_triggers(self):
        """Test that max_triggers must be at least 1."""
        with pytest.raises(ValueError, match="max_triggers"):
            SimConfig(t_end=1.0, w=np.zeros(7), init=make_init(), max_triggers=0)

    def test_controller_mode_type(self):
        """Test that controller_mode must be an enum member."""
        with pytest.raises(TypeError, match="ControllerMode"):
            SimConfig(t_end=1.0, w=np.zeros(7), init=make_init(), controller_mode="zoh")


class TestSimResult:
    """Test cases for the SimResult dataclass."""

    def _result(self, log):
        return SimResult(
            trace=np.array([[0.0, 0.84], [1.0, 0.1]]),
            trace_columns=("t", "e"),
            condition=np.zeros((2, 3)),
            trigger_log=log,
            status=SimStatus.COMPLETED,
            t_end=1.0,
            sigma=0.4,
            delta=0.1,
        )

    def test_column_lookup(self):
        """Test named column access and trigger count."""
        res = self._result([make_record(1, 0.5, 0.5)])
        np.testing.assert_array_equal(res.column("e"), [0.84, 0.1])
        assert res.trigger_count == 1

    def test_unknown_column(self):
        """Test that an unknown column raises KeyError."""
        with pytest.raises(KeyError, match="unknown trace column"):
            self._result([]).column("u")

    def test_trigger_times_increasing(self):
        """Test SimResult rejects out-of-order trigger times."""
        with pytest.raises(ValueError, match="strictly increasing"):
            self._result([make_record(1, 0.5, 0.5), make_record(2, 0.5, 0.1)])


class TestMetrics:
    """Test cases for the Metrics dataclass."""

    def test_windowed_counts_must_add_up(self):
        """Test that per-window counts sum to the total."""
        with pytest.raises(ValueError, match="add up"):
            Metrics(tail_sup_error=0.0, tail_window=(0.0, 1.0), trigger_count_total=3, trigger_counts_windowed=[1, 1])

    def test_window_order(self):
        """Test that the tail window must be non-empty."""
        with pytest.raises(ValueError, match="t_a < t_b"):
            Metrics(tail_sup_error=0.0, tail_window=(1.0, 1.0), trigger_count_total=0)
