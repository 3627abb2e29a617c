"""
Event-triggered output feedback regulator.

This module provides the controller pieces driven by the latched output
error: the sampled-output observer, the recursive checked coordinates of
the backstepping design with virtual controls vartheta_i(s) = -rho_i(s) s,
the composite control law u = vartheta_r(xi_check_r(t_k)) + Psi eta(t_k),
and the exact zero-order-hold form of the controller dynamics.
"""

import logging
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Sequence, Tuple

import numpy as np
from numpy.polynomial import polynomial as P

from ..models.data_models import ControllerState, FloatArray, Latched
from ..models.exogen import InternalModel, NotHurwitzError
from ..utils.matlib import (
    DimensionMismatchError,
    Matrix,
    Vector,
    as_vector,
    is_hurwitz,
    zoh_discretize,
)


logger = logging.getLogger(__name__)

GainFunction = Callable[[float], float]


class RegulationError(Exception):
    """Base exception for controller construction."""
    pass


class ObserverNotHurwitzError(RegulationError, NotHurwitzError):
    """Raised when the observer matrix A_o is not Hurwitz."""
    pass


class InvalidLawError(RegulationError, ValueError):
    """Raised when backstepping gains violate their invariants."""
    pass


def observer_matrix(lam: Sequence[float]) -> Matrix:
    """Assemble A_o: -lambda in the first column, identity on the superdiagonal."""
    lam_vec = as_vector(lam, "lambda")
    r = lam_vec.size
    a_o = np.zeros((r, r))
    a_o[:, 0] = -lam_vec
    if r > 1:
        a_o[:-1, 1:] += np.eye(r - 1)
    return a_o


def input_vector(r: int) -> Vector:
    """B = (0, ..., 0, 1)."""
    b = np.zeros(r)
    b[-1] = 1.0
    return b


@dataclass(frozen=True)
class ObserverGains:
    """Observer injection gains lambda and the derived matrix A_o."""
    lam: Vector
    A_o: Matrix
    B: Vector

    @property
    def r(self) -> int:
        return int(self.lam.size)


def build_observer(lam: Sequence[float]) -> ObserverGains:
    """Build observer gains, checking that A_o is Hurwitz.

    Raises:
        ObserverNotHurwitzError: If A_o is not Hurwitz
    """
    lam_vec = as_vector(lam, "lambda")
    a_o = observer_matrix(lam_vec)
    if not is_hurwitz(a_o):
        raise ObserverNotHurwitzError(
            f"observer matrix A_o is not Hurwitz for lambda={np.array2string(lam_vec)}"
        )
    logger.debug(f"Observer gains accepted: lambda={np.array2string(lam_vec)}")
    return ObserverGains(lam=lam_vec, A_o=a_o, B=input_vector(lam_vec.size))


class PolynomialGain:
    """Gain rho(s) = c_0 + c_1 s + ... + c_n s^n.

    Coefficients are in ascending order. Instances are picklable, so laws
    built from them can be shipped to worker processes.
    """

    def __init__(self, coefficients: Sequence[float]):
        self.coefficients = as_vector(coefficients, "gain coefficients")

    def __call__(self, s: float) -> float:
        return float(P.polyval(s, self.coefficients))

    def __repr__(self) -> str:
        return f"PolynomialGain({self.coefficients.tolist()})"

    def __eq__(self, other: object) -> bool:
        return isinstance(other, PolynomialGain) and np.array_equal(self.coefficients, other.coefficients)


def lorenz_rho() -> Tuple[PolynomialGain, PolynomialGain]:
    """The benchmark pair rho_1(s) = 6(s^6 + 1), rho_2(s) = 12(s^2 + 1)."""
    return (
        PolynomialGain([6.0, 0.0, 0.0, 0.0, 0.0, 0.0, 6.0]),
        PolynomialGain([12.0, 0.0, 12.0]),
    )


# Positivity of rho_i is probed on +-s for s log-spaced over this range
RHO_PROBE_GRID = np.concatenate([-np.logspace(-6, 3, 64), [0.0], np.logspace(-6, 3, 64)])


@dataclass(frozen=True)
class BackstepLaw:
    """Backstepping gains rho_1..rho_r and the trigger weight sigma.

    With ``paper_literal_vartheta1`` the first checked coordinate is formed as
    xi_check_2 = xi_hat_2 + rho_1(e), the printed form of the benchmark law,
    instead of xi_hat_2 + rho_1(e) e.
    """
    rho: Tuple[GainFunction, ...]
    sigma: float
    paper_literal_vartheta1: bool = False

    def __post_init__(self):
        """Validate sigma and probe rho_i > 0."""
        object.__setattr__(self, "rho", tuple(self.rho))
        if not self.rho:
            raise InvalidLawError("at least one gain function rho_i is required")
        if not isinstance(self.sigma, (int, float)) or not 0.0 < self.sigma < 1.0:
            raise InvalidLawError(f"sigma must lie in (0, 1), got {self.sigma}")
        failures = rho_probe_failures(self.rho)
        if failures:
            raise InvalidLawError(failures[0])

    @property
    def r(self) -> int:
        return len(self.rho)

    def vartheta(self, i: int, s: float) -> float:
        """Virtual control vartheta_i(s) = -rho_i(s) s (1-based stage index)."""
        return -self.rho[i - 1](s) * s


def checked_coords(e: float, xi_hat: FloatArray, law: BackstepLaw) -> Vector:
    """Recursive checked coordinates.

    xi_check_1 = e and xi_check_{i+1} = xi_hat_{i+1} - vartheta_i(xi_check_i).

    Args:
        e: Tracking error
        xi_hat: Observer state (length r; xi_hat_1 is not used)
        law: Backstepping law

    Returns:
        The r checked coordinates
    """
    r = law.r
    if len(xi_hat) != r:
        raise DimensionMismatchError(f"xi_hat must have length {r}, got {len(xi_hat)}")
    checked = np.empty(r)
    checked[0] = e
    for i in range(1, r):
        if i == 1 and law.paper_literal_vartheta1:
            checked[i] = xi_hat[i] + law.rho[0](checked[0])
        else:
            checked[i] = xi_hat[i] - law.vartheta(i, checked[i - 1])
    return checked


def held_control(e: float, xi_hat: FloatArray, eta: FloatArray, law: BackstepLaw, im: InternalModel) -> float:
    """vartheta_r(xi_check_r) + Psi eta for sampled values (e, xi_hat, eta)."""
    xi_check_r = checked_coords(e, xi_hat, law)[-1]
    return law.vartheta(law.r, xi_check_r) + float(im.Psi @ eta)


def control_input(latched: Latched, law: BackstepLaw, im: InternalModel) -> float:
    """u = -rho_r(xi_check_r(t_k)) xi_check_r(t_k) + Psi eta(t_k)."""
    return held_control(latched.e_k, latched.xi_hat_k, latched.eta_k, law, im)


def take_latch(
    t: float,
    e: float,
    cs: ControllerState,
    law: BackstepLaw,
    im: InternalModel,
    k: int,
) -> Latched:
    """Freeze (e, eta, xi_hat) at time t and compute the held control once."""
    u_k = held_control(e, cs.xi_hat, cs.eta, law, im)
    return Latched(
        t_k=float(t),
        e_k=float(e),
        eta_k=cs.eta.copy(),
        xi_hat_k=cs.xi_hat.copy(),
        u_k=float(u_k),
        k=k,
    )


def controller_rates(
    cs: ControllerState,
    latched: Latched,
    gains: ObserverGains,
    im: InternalModel,
    u: float,
) -> Tuple[Vector, Vector]:
    """Controller vector field with the latched inputs held.

    xi_hat' = A_o xi_hat + lambda e_k + B (u - Psi eta_k) and eta' = M eta + N u.

    Returns:
        Tuple (eta_dot, xi_hat_dot)
    """
    if cs.eta.shape != (im.s,) or cs.xi_hat.shape != (gains.r,):
        raise DimensionMismatchError(
            f"controller state shapes eta{cs.eta.shape}, xi_hat{cs.xi_hat.shape} "
            f"do not match s={im.s}, r={gains.r}"
        )
    injection = gains.lam * latched.e_k + gains.B * (u - float(im.Psi @ latched.eta_k))
    xi_hat_dot = gains.A_o @ cs.xi_hat + injection
    eta_dot = im.M @ cs.eta + im.N * u
    return eta_dot, xi_hat_dot


@dataclass
class ZohController:
    """Exact zero-order-hold propagation of (eta, xi_hat) between events.

    Discretizations are cached per step length, so a fixed-step run pays for
    the matrix exponentials once.
    """
    gains: ObserverGains
    im: InternalModel
    _cache: Dict[float, Tuple[Matrix, Matrix, Matrix, Matrix]] = field(default_factory=dict, repr=False)

    def _maps(self, dt: float) -> Tuple[Matrix, Matrix, Matrix, Matrix]:
        maps = self._cache.get(dt)
        if maps is None:
            a_xi, b_xi = zoh_discretize(self.gains.A_o, np.eye(self.gains.r), dt)
            a_eta, b_eta = zoh_discretize(self.im.M, self.im.N, dt)
            maps = (a_xi, b_xi, a_eta, b_eta[:, 0])
            if len(self._cache) > 64:
                self._cache.clear()
            self._cache[dt] = maps
        return maps

    def advance(self, cs: ControllerState, latched: Latched, dt: float) -> ControllerState:
        """Return the controller state dt after cs with the latched inputs held."""
        a_xi, b_xi, a_eta, b_eta = self._maps(dt)
        injection = self.gains.lam * latched.e_k + self.gains.B * (
            latched.u_k - float(self.im.Psi @ latched.eta_k)
        )
        return ControllerState(
            eta=a_eta @ cs.eta + b_eta * latched.u_k,
            xi_hat=a_xi @ cs.xi_hat + b_xi @ injection,
        )


def controller_zoh_step(
    latched: Latched,
    gains: ObserverGains,
    im: InternalModel,
    dt: float,
) -> Tuple[Vector, Vector]:
    """Digital controller update over [t_k, t_k + dt] starting from the latch.

    Returns:
        Tuple (eta_next, xi_hat_next)
    """
    start = ControllerState(eta=latched.eta_k, xi_hat=latched.xi_hat_k)
    nxt = ZohController(gains=gains, im=im).advance(start, latched, dt)
    return nxt.eta, nxt.xi_hat


def rho_probe_failures(rho: Sequence[GainFunction]) -> List[str]:
    """Describe every gain function that is not positive on the probe grid."""
    failures = []
    for i, rho_i in enumerate(rho, start=1):
        values = np.array([rho_i(float(s)) for s in RHO_PROBE_GRID])
        if not np.all(values > 0.0):
            worst = RHO_PROBE_GRID[int(np.argmin(values))]
            failures.append(f"rho_{i} is not positive (rho_{i}({worst:.3g}) <= 0)")
    return failures
