"""
Hybrid closed-loop simulation engine.

The engine integrates the stacked continuous state (v, z, x, eta, xi_hat)
with fixed-step classical RK4 while the latched samples are held, evaluates
the trigger function at every node, localizes crossings by bisection,
re-latches at the crossing and continues on the same time grid. Runs end at
t_end, or early when an inter-event time falls below the Zeno guard or the
trigger budget is exhausted.
"""

import logging
import math
import time
from typing import Callable, List, Optional, Tuple

import numpy as np

from .regulation import (
    BackstepLaw,
    ObserverGains,
    ZohController,
    take_latch,
)
from .trigger import TriggerPolicy, condition_sides, deviations, fires, trigger_value
from ..models.data_models import (
    ControllerState,
    FloatArray,
    Latched,
    SimConfig,
    SimResult,
    TriggerRecord,
)
from ..models.enums import ControllerMode, SimStatus
from ..models.exogen import Exosystem, InternalModel
from ..models.plant import OutputFeedbackPlant, chain_rates
from ..utils.matlib import DimensionMismatchError


logger = logging.getLogger(__name__)

TimedValue = Tuple[float, float]


class SimulationError(Exception):
    """Base exception for simulation failures."""
    pass


class NonFiniteStateError(SimulationError):
    """Raised when the integrated state leaves the finite range."""
    pass


class BracketInvalidError(SimulationError, ValueError):
    """Raised when an event bracket does not straddle a crossing."""
    pass


def locate_event(
    lo: TimedValue,
    hi: TimedValue,
    evaluator: Callable[[float], float],
    event_tol: float,
) -> float:
    """Localize the first time the trigger value reaches zero by bisection.

    Args:
        lo: (t, g) with g < 0
        hi: (t, g) with g >= 0 and a later time
        evaluator: Trigger value as a function of time inside the bracket
        event_tol: Final bracket width

    Returns:
        The right endpoint of the final bracket (g >= 0 there)

    Raises:
        BracketInvalidError: If the bracket is empty or does not straddle zero
    """
    t_lo, g_lo = lo
    t_hi, g_hi = hi
    if not t_lo < t_hi:
        raise BracketInvalidError(f"empty bracket [{t_lo}, {t_hi}]")
    if not (g_lo < 0.0 <= g_hi):
        raise BracketInvalidError(f"no sign change on bracket: g_lo={g_lo}, g_hi={g_hi}")

    while t_hi - t_lo > event_tol:
        mid = 0.5 * (t_lo + t_hi)
        if mid <= t_lo or mid >= t_hi:
            break
        if fires(evaluator(mid)):
            t_hi = mid
        else:
            t_lo = mid
    return t_hi


class HybridSimulator:
    """Runs one closed loop of plant, exosystem and event-triggered controller.

    A simulator instance owns its run state exclusively; component
    definitions and the configuration are treated as read-only.
    """

    def __init__(
        self,
        plant: OutputFeedbackPlant,
        exo: Exosystem,
        gains: ObserverGains,
        law: BackstepLaw,
        im: InternalModel,
        policy: TriggerPolicy,
        cfg: SimConfig,
    ):
        """Initialize the simulator and check dimensional consistency.

        Raises:
            DimensionMismatchError: If component or initial-condition sizes disagree
        """
        self.plant = plant
        self.exo = exo
        self.gains = gains
        self.law = law
        self.im = im
        self.policy = policy
        self.cfg = cfg

        self._check_dimensions()

        n_v, n_z, r, s = exo.n_v, plant.n_z, plant.r, im.s
        self._v = slice(0, n_v)
        self._z = slice(n_v, n_v + n_z)
        self._x = slice(n_v + n_z, n_v + n_z + r)
        self._eta = slice(n_v + n_z + r, n_v + n_z + r + s)
        self._xi = slice(n_v + n_z + r + s, n_v + n_z + 2 * r + s)
        self._size = n_v + n_z + 2 * r + s

        self._zoh: Optional[ZohController] = None
        if cfg.controller_mode is ControllerMode.ZOH:
            self._zoh = ZohController(gains=gains, im=im)

        self.trace_columns = (
            ("t", "e", "y", "y0", "u")
            + tuple(f"v{i}" for i in range(1, n_v + 1))
            + tuple(f"z{i}" for i in range(1, n_z + 1))
            + tuple(f"x{i}" for i in range(1, r + 1))
            + tuple(f"eta{i}" for i in range(1, s + 1))
            + tuple(f"xihat{i}" for i in range(1, r + 1))
        )

    def _check_dimensions(self) -> None:
        init = self.cfg.init
        r, s = self.plant.r, self.im.s
        checks = [
            ("v(0)", init.v.size, self.exo.n_v),
            ("z(0)", init.z.size, self.plant.n_z),
            ("x(0)", init.x.size, r),
            ("eta(0)", init.eta.size, s),
            ("xi_hat(0)", init.xi_hat.size, r),
            ("observer order", self.gains.r, r),
            ("backstepping stages", self.law.r, r),
            ("trigger eta dimension", self.policy.n_eta, s),
        ]
        for name, got, expected in checks:
            if got != expected:
                raise DimensionMismatchError(f"{name} has size {got}, expected {expected}")

    # Continuous dynamics

    def _pack(self) -> FloatArray:
        init = self.cfg.init
        return np.concatenate([init.v, init.z, init.x, init.eta, init.xi_hat])

    def _rates(self, y: FloatArray, latched: Latched, injection: FloatArray) -> FloatArray:
        v = y[self._v]
        x = y[self._x]
        u = latched.u_k
        dy = np.zeros(self._size)
        dy[self._v] = self.exo.S @ v
        dz, dx = chain_rates(self.plant, y[self._z], x, u, v, self.cfg.w)
        dy[self._z] = dz
        dy[self._x] = dx
        if self._zoh is None:
            dy[self._eta] = self.im.M @ y[self._eta] + self.im.N * u
            dy[self._xi] = self.gains.A_o @ y[self._xi] + injection
        return dy

    def _injection(self, latched: Latched) -> FloatArray:
        return self.gains.lam * latched.e_k + self.gains.B * (
            latched.u_k - float(self.im.Psi @ latched.eta_k)
        )

    def step(self, y: FloatArray, dt: float, latched: Latched) -> FloatArray:
        """Advance the stacked state by one RK4 step with the latch held."""
        injection = self._injection(latched)
        k1 = self._rates(y, latched, injection)
        k2 = self._rates(y + 0.5 * dt * k1, latched, injection)
        k3 = self._rates(y + 0.5 * dt * k2, latched, injection)
        k4 = self._rates(y + dt * k3, latched, injection)
        y_next = y + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if self._zoh is not None:
            cs = ControllerState(eta=y[self._eta], xi_hat=y[self._xi])
            nxt = self._zoh.advance(cs, latched, dt)
            y_next[self._eta] = nxt.eta
            y_next[self._xi] = nxt.xi_hat
        return y_next

    # Output and trigger evaluation

    def tracking_error(self, y: FloatArray) -> float:
        return float(y[self._x][0] - self.exo.q(y[self._v], self.cfg.w))

    def trigger_at(self, y: FloatArray, latched: Latched) -> float:
        """Trigger value of state y measured against a latch."""
        dev = deviations(self.tracking_error(y), y[self._eta], y[self._xi], latched, self.law)
        return trigger_value(dev, dev.xi_check_r, self.policy)

    def latch_at(self, t: float, y: FloatArray, k: int) -> Latched:
        cs = ControllerState(eta=y[self._eta], xi_hat=y[self._xi])
        return take_latch(t, self.tracking_error(y), cs, self.law, self.im, k)

    def _trace_row(self, t: float, y: FloatArray, latched: Latched) -> Tuple[List[float], List[float]]:
        e = self.tracking_error(y)
        y0 = float(self.exo.q(y[self._v], self.cfg.w))
        row = [t, e, float(y[self._x][0]), y0, latched.u_k]
        row.extend(y.tolist())
        dev = deviations(e, y[self._eta], y[self._xi], latched, self.law)
        lhs, rhs = condition_sides(dev, dev.xi_check_r, self.policy)
        return row, [t, lhs, rhs]

    # Main loop

    def run(self) -> SimResult:
        """Execute the run.

        Returns:
            SimResult with trace, trigger log and termination status

        Raises:
            NonFiniteStateError: If the state blows up
        """
        cfg = self.cfg
        started = time.perf_counter()
        logger.info(
            f"Simulation start: t_end={cfg.t_end}, h={cfg.h}, sigma={self.policy.sigma}, "
            f"delta={self.policy.delta}, mode={cfg.controller_mode.value}"
        )

        y = self._pack()
        latched = self.latch_at(0.0, y, 0)
        initial_latch = latched
        g_a = self.trigger_at(y, latched)

        trace: List[List[float]] = []
        condition: List[List[float]] = []
        log: List[TriggerRecord] = []
        status = SimStatus.COMPLETED

        row, cond = self._trace_row(0.0, y, latched)
        trace.append(row)
        condition.append(cond)

        n_nodes = max(1, math.ceil(cfg.t_end / cfg.h - 1e-9))
        t_a = 0.0
        for n in range(1, n_nodes + 1):
            t_n = cfg.t_end if n == n_nodes else n * cfg.h
            y_a = y
            stop = False
            while True:
                y_b = self.step(y_a, t_n - t_a, latched)
                if not np.all(np.isfinite(y_b)):
                    raise NonFiniteStateError(f"state became non-finite near t={t_n:.6g}")
                g_b = self.trigger_at(y_b, latched)
                if not fires(g_b):
                    break

                if fires(g_a):
                    t_star, y_star = t_n, y_b
                else:
                    y_start, t_start, held = y_a, t_a, latched
                    t_star = locate_event(
                        (t_a, g_a),
                        (t_n, g_b),
                        lambda tau: self.trigger_at(self.step(y_start, tau - t_start, held), held),
                        cfg.event_tol,
                    )
                    y_star = y_b if t_star >= t_n else self.step(y_a, t_star - t_a, latched)
                    if not np.all(np.isfinite(y_star)):
                        raise NonFiniteStateError(f"state became non-finite near t={t_star:.6g}")
                g_pre = self.trigger_at(y_star, latched)
                dwell = t_star - latched.t_k

                if dwell < cfg.min_dwell_guard:
                    logger.warning(f"Zeno guard: inter-event time {dwell:.3e} s at t={t_star:.9f}")
                    status = SimStatus.ZENO_GUARD
                    y_b, t_n = y_star, t_star
                    stop = True
                    break
                if len(log) >= cfg.max_triggers:
                    logger.warning(f"Trigger budget of {cfg.max_triggers} exhausted at t={t_star:.9f}")
                    status = SimStatus.MAX_TRIGGERS
                    y_b, t_n = y_star, t_star
                    stop = True
                    break

                latched = self.latch_at(t_star, y_star, latched.k + 1)
                dev = deviations(latched.e_k, latched.eta_k, latched.xi_hat_k, latched, self.law)
                g_post = trigger_value(dev, dev.xi_check_r, self.policy)
                log.append(TriggerRecord(
                    k=latched.k,
                    t_k=t_star,
                    dwell=dwell,
                    g_pre=g_pre,
                    g_post=g_post,
                    xi_check_r=dev.xi_check_r,
                ))
                logger.debug(
                    f"Trigger k={latched.k} t={t_star:.9f} dwell={dwell:.3e} "
                    f"g_pre={g_pre:.3e} g_post={g_post:.3e}"
                )

                t_a, y_a, g_a = t_star, y_star, g_post
                if t_star >= t_n:
                    y_b, g_b = y_star, g_post
                    break

            y, t_a, g_a = y_b, t_n, g_b
            if stop or n % cfg.report_stride == 0 or n == n_nodes:
                row, cond = self._trace_row(t_n, y, latched)
                trace.append(row)
                condition.append(cond)
            if stop:
                break

        wall = time.perf_counter() - started
        logger.info(
            f"Simulation finished: status={status}, triggers={len(log)}, "
            f"t={t_a:.6g}, wall={wall:.2f}s"
        )
        return SimResult(
            trace=np.array(trace),
            trace_columns=self.trace_columns,
            condition=np.array(condition),
            trigger_log=log,
            status=status,
            t_end=cfg.t_end,
            sigma=self.policy.sigma,
            delta=self.policy.delta,
            initial_latch=initial_latch,
            wall_time=wall,
        )


def simulate(
    plant: OutputFeedbackPlant,
    exo: Exosystem,
    gains: ObserverGains,
    law: BackstepLaw,
    im: InternalModel,
    policy: TriggerPolicy,
    cfg: SimConfig,
) -> SimResult:
    """Run the event-triggered closed loop from t0 = 0 (a latch instant) to cfg.t_end."""
    return HybridSimulator(plant, exo, gains, law, im, policy, cfg).run()
