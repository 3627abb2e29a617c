"""
Core data models for the event-triggered regulation simulator.

This module defines the plain value types owned by a single simulation run:
controller states, the sample-and-hold latch, the closed-loop state, run
configuration, the trigger log and the run result with its derived metrics.
"""

import math
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Tuple

import numpy as np
import numpy.typing as npt

from .enums import ControllerMode, SimStatus


FloatArray = npt.NDArray[np.float64]


def _finite_array(values, name: str) -> FloatArray:
    arr = np.array(values, dtype=np.float64).reshape(-1)
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} must have finite entries")
    return arr


@dataclass
class ControllerState:
    """Continuous controller states: internal model eta and observer xi_hat."""
    eta: FloatArray
    xi_hat: FloatArray

    def __post_init__(self):
        """Coerce to float vectors and validate finiteness."""
        self.eta = _finite_array(self.eta, "eta")
        self.xi_hat = _finite_array(self.xi_hat, "xi_hat")

    def copy(self) -> "ControllerState":
        return ControllerState(eta=self.eta.copy(), xi_hat=self.xi_hat.copy())


@dataclass(frozen=True)
class Latched:
    """Sample-and-hold values frozen at a triggering time t_k.

    The held control u_k is computed once when the latch is taken, so every
    consumer between t_k and t_{k+1} sees the identical input.
    """
    t_k: float
    e_k: float
    eta_k: FloatArray
    xi_hat_k: FloatArray
    u_k: float
    k: int = 0

    def __post_init__(self):
        """Validate latch data."""
        if not isinstance(self.k, int) or self.k < 0:
            raise ValueError("trigger index k must be a non-negative integer")
        for name in ("t_k", "e_k", "u_k"):
            value = getattr(self, name)
            if not isinstance(value, (int, float)):
                raise TypeError(f"{name} must be a number")
            if not math.isfinite(value):
                raise ValueError(f"{name} must be finite")
        object.__setattr__(self, "eta_k", _finite_array(self.eta_k, "eta_k"))
        object.__setattr__(self, "xi_hat_k", _finite_array(self.xi_hat_k, "xi_hat_k"))


@dataclass
class ClosedLoopState:
    """Full hybrid state of plant, exosystem and controller at time t.

    The tracking error is never stored; it is recomputed from x and v.
    """
    t: float
    v: FloatArray
    z: FloatArray
    x: FloatArray
    eta: FloatArray
    xi_hat: FloatArray
    latched: Latched

    def __post_init__(self):
        """Validate finiteness and latch ordering."""
        for name in ("v", "z", "x", "eta", "xi_hat"):
            setattr(self, name, _finite_array(getattr(self, name), name))
        if self.latched.t_k > self.t:
            raise ValueError("latch time must not be later than the current time")

    def tracking_error(self, q: Callable[[FloatArray, FloatArray], float], w: FloatArray) -> float:
        """Return e = x_1 - q(v, w)."""
        return float(self.x[0] - q(self.v, w))

    @property
    def controller(self) -> ControllerState:
        return ControllerState(eta=self.eta, xi_hat=self.xi_hat)


@dataclass
class InitialConditions:
    """Initial values for exosystem, plant and controller states."""
    v: FloatArray
    z: FloatArray
    x: FloatArray
    eta: FloatArray
    xi_hat: FloatArray

    def __post_init__(self):
        """Coerce all fields to finite float vectors."""
        for name in ("v", "z", "x", "eta", "xi_hat"):
            setattr(self, name, _finite_array(getattr(self, name), name))


@dataclass
class SimConfig:
    """Run configuration for the hybrid simulator.

    Enforces 0 < event_tol < h < t_end and max_triggers >= 1.
    """
    t_end: float
    w: FloatArray
    init: InitialConditions
    h: float = 1e-4
    event_tol: float = 1e-9
    max_triggers: int = 1_000_000
    min_dwell_guard: float = 1e-7
    report_stride: int = 10
    controller_mode: ControllerMode = ControllerMode.CONTINUOUS

    def __post_init__(self):
        """Validate the timing constraints."""
        self.w = _finite_array(self.w, "w")
        if not isinstance(self.init, InitialConditions):
            raise TypeError("init must be an InitialConditions instance")
        if not isinstance(self.controller_mode, ControllerMode):
            raise TypeError("controller_mode must be a ControllerMode enum")
        if not 0.0 < self.event_tol < self.h < self.t_end:
            raise ValueError(
                f"timing must satisfy 0 < event_tol < h < t_end "
                f"(got event_tol={self.event_tol}, h={self.h}, t_end={self.t_end})"
            )
        if not isinstance(self.max_triggers, int) or self.max_triggers < 1:
            raise ValueError("max_triggers must be an integer >= 1")
        if self.min_dwell_guard < 0.0:
            raise ValueError("min_dwell_guard must be non-negative")
        if not isinstance(self.report_stride, int) or self.report_stride < 1:
            raise ValueError("report_stride must be an integer >= 1")


@dataclass(frozen=True)
class TriggerRecord:
    """One logged triggering event.

    g_pre is the trigger value at the localized crossing against the old latch;
    g_post is the value right after re-latching.
    """
    k: int
    t_k: float
    dwell: float
    g_pre: float
    g_post: float
    xi_check_r: float


@dataclass
class SimResult:
    """Trajectory, trigger log and termination status of one run.

    ``trace`` rows follow ``trace_columns``; ``condition`` rows are
    (t, lhs, rhs) of the firing rule sampled at the same instants.
    """
    trace: FloatArray
    trace_columns: Tuple[str, ...]
    condition: FloatArray
    trigger_log: List[TriggerRecord]
    status: SimStatus
    t_end: float
    sigma: float
    delta: float
    initial_latch: Optional[Latched] = None
    wall_time: float = 0.0

    def __post_init__(self):
        """Validate trigger-log ordering."""
        times = [rec.t_k for rec in self.trigger_log]
        if any(b <= a for a, b in zip(times, times[1:])):
            raise ValueError("trigger_log times must be strictly increasing")
        if any(rec.dwell <= 0.0 for rec in self.trigger_log):
            raise ValueError("inter-event times must be positive")

    @property
    def trigger_count(self) -> int:
        return len(self.trigger_log)

    def column(self, name: str) -> FloatArray:
        """Return one named trace column."""
        try:
            index = self.trace_columns.index(name)
        except ValueError:
            raise KeyError(f"unknown trace column: {name}") from None
        return self.trace[:, index]


@dataclass
class Metrics:
    """Derived figures of merit for a run."""
    tail_sup_error: float
    tail_window: Tuple[float, float]
    trigger_count_total: int
    trigger_counts_windowed: List[int] = field(default_factory=list)
    count_window: float = 5.0
    min_dwell: float = math.inf
    mean_dwell: float = math.nan

    def __post_init__(self):
        """Validate metric values."""
        if self.tail_window[0] >= self.tail_window[1]:
            raise ValueError("tail window must satisfy t_a < t_b")
        if self.trigger_count_total < 0:
            raise ValueError("trigger_count_total must be non-negative")
        if self.trigger_counts_windowed and sum(self.trigger_counts_windowed) != self.trigger_count_total:
            raise ValueError("windowed trigger counts must add up to the total")
