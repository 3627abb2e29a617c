"""
Output-based event-triggered mechanism.

The mechanism compares the current controller/output values with the last
latch through the deviations e~ = e(t_k) - e(t), eta~ = eta(t_k) - eta(t),
xi~ = xi_hat(t_k) - xi_hat(t) and vartheta~_r, and fires when

    vartheta~_r^2 + pi_r(eta~, e~) - sigma^2 rho_r(xi_check_r) xi_check_r^2 >= delta^2.
"""

import logging
from dataclasses import dataclass
from typing import Callable, Tuple

import numpy as np

from .regulation import BackstepLaw, GainFunction, checked_coords
from ..models.data_models import FloatArray, Latched
from ..utils.matlib import DimensionMismatchError, Vector, as_vector


logger = logging.getLogger(__name__)

CouplingFunction = Callable[[FloatArray, float], float]


class TriggerPolicyError(ValueError):
    """Raised when a trigger policy violates its invariants."""
    pass


class ZeroCoupling:
    """pi_r identically zero."""

    def __call__(self, eta_tilde: FloatArray, e_tilde: float) -> float:
        return 0.0

    def __repr__(self) -> str:
        return "ZeroCoupling()"


class QuadraticCoupling:
    """pi_r = weight * (||eta~||^2 + e~^2)."""

    def __init__(self, weight: float = 1.0):
        if weight < 0.0:
            raise TriggerPolicyError("quadratic coupling weight must be non-negative")
        self.weight = float(weight)

    def __call__(self, eta_tilde: FloatArray, e_tilde: float) -> float:
        return self.weight * (float(eta_tilde @ eta_tilde) + e_tilde * e_tilde)

    def __repr__(self) -> str:
        return f"QuadraticCoupling(weight={self.weight})"


def lorenz_pi(eta_tilde: FloatArray, e_tilde: float, psi: FloatArray, lam: FloatArray) -> float:
    """Benchmark coupling 5 ||B Psi eta~ - lambda e~||^4 + |lambda_r e~|^2.

    B Psi eta~ is the r-vector (0, ..., 0, Psi eta~).
    """
    diff = -lam * e_tilde
    diff[-1] += float(psi @ eta_tilde)
    sq_norm = float(diff @ diff)
    tail = lam[-1] * e_tilde
    return 5.0 * sq_norm * sq_norm + tail * tail


class LorenzCoupling:
    """lorenz_pi bound to the design's Psi and lambda."""

    def __init__(self, psi: FloatArray, lam: FloatArray):
        self.psi = as_vector(psi, "Psi")
        self.lam = as_vector(lam, "lambda")

    def __call__(self, eta_tilde: FloatArray, e_tilde: float) -> float:
        return lorenz_pi(eta_tilde, e_tilde, self.psi, self.lam)

    def __repr__(self) -> str:
        return f"LorenzCoupling(psi={self.psi.tolist()}, lam={self.lam.tolist()})"


# pi_r is probed for non-negativity on deviations scaled by these factors
_PI_PROBE_SCALES = (1e-3, 1e-1, 1.0, 10.0)


@dataclass(frozen=True)
class TriggerPolicy:
    """Event rule parameters (sigma, delta, pi_r, rho_r) for eta~ of size n_eta."""
    sigma: float
    delta: float
    pi_r: CouplingFunction
    rho_r: GainFunction
    n_eta: int

    def __post_init__(self):
        """Validate sigma, delta and pi_r."""
        if not 0.0 < self.sigma < 1.0:
            raise TriggerPolicyError(f"sigma must lie in (0, 1), got {self.sigma}")
        if not self.delta >= 0.0:
            raise TriggerPolicyError(f"delta must be non-negative, got {self.delta}")
        if not callable(self.pi_r) or not callable(self.rho_r):
            raise TypeError("pi_r and rho_r must be callable")
        if self.pi_r(np.zeros(self.n_eta), 0.0) != 0.0:
            raise TriggerPolicyError("pi_r must vanish at zero deviation")
        rng = np.random.default_rng(0)
        for scale in _PI_PROBE_SCALES:
            for _ in range(8):
                eta_tilde = scale * rng.standard_normal(self.n_eta)
                e_tilde = scale * float(rng.standard_normal())
                if self.pi_r(eta_tilde, e_tilde) < 0.0:
                    raise TriggerPolicyError("pi_r must be non-negative")
        if self.delta == 0.0:
            logger.warning("delta = 0: positive dwell time is not guaranteed, relying on the Zeno guard")


@dataclass(frozen=True)
class Deviations:
    """Differences between latched and current values.

    xi_check_r is the current last checked coordinate, kept so the trigger
    value can be formed without recomputing the chain.
    """
    e_tilde: float
    eta_tilde: Vector
    xi_tilde: Vector
    vartheta_tilde_r: float
    xi_check_r: float = 0.0


def deviations(
    e: float,
    eta: FloatArray,
    xi_hat: FloatArray,
    latched: Latched,
    law: BackstepLaw,
) -> Deviations:
    """Compute the deviation signals against a latch.

    Raises:
        DimensionMismatchError: If current and latched shapes differ
    """
    if eta.shape != latched.eta_k.shape or xi_hat.shape != latched.xi_hat_k.shape:
        raise DimensionMismatchError("current controller state does not match the latch dimensions")
    r = law.r
    xi_check_now = checked_coords(e, xi_hat, law)[-1]
    xi_check_latched = checked_coords(latched.e_k, latched.xi_hat_k, law)[-1]
    return Deviations(
        e_tilde=latched.e_k - e,
        eta_tilde=latched.eta_k - eta,
        xi_tilde=latched.xi_hat_k - xi_hat,
        vartheta_tilde_r=law.vartheta(r, xi_check_latched) - law.vartheta(r, xi_check_now),
        xi_check_r=float(xi_check_now),
    )


def condition_sides(dev: Deviations, xi_check_r: float, pol: TriggerPolicy) -> Tuple[float, float]:
    """Return (lhs, rhs) of the firing rule lhs >= rhs."""
    lhs = dev.vartheta_tilde_r ** 2 + pol.pi_r(dev.eta_tilde, dev.e_tilde)
    rhs = pol.sigma ** 2 * (pol.rho_r(xi_check_r) * xi_check_r * xi_check_r) + pol.delta ** 2
    return lhs, rhs


def trigger_value(dev: Deviations, xi_check_r: float, pol: TriggerPolicy) -> float:
    """g = vartheta~_r^2 + pi_r - sigma^2 rho_r(xi_check_r) xi_check_r^2 - delta^2.

    The mechanism fires when g >= 0.
    """
    lhs = dev.vartheta_tilde_r ** 2 + pol.pi_r(dev.eta_tilde, dev.e_tilde)
    return lhs - pol.sigma ** 2 * (pol.rho_r(xi_check_r) * xi_check_r * xi_check_r) - pol.delta ** 2


def lorenz_trigger_value(
    dev: Deviations,
    xi_check_2: float,
    law: BackstepLaw,
    psi: FloatArray,
    lam: FloatArray,
    sigma: float,
    delta: float,
) -> float:
    """Benchmark rule evaluated as printed: f~ - sigma^2 |vartheta_2(xi_check_2) xi_check_2| - delta^2."""
    f_tilde = dev.vartheta_tilde_r ** 2 + lorenz_pi(dev.eta_tilde, dev.e_tilde, psi, lam)
    return f_tilde - sigma ** 2 * abs(law.vartheta(2, xi_check_2) * xi_check_2) - delta ** 2


def fires(g: float) -> bool:
    """Firing test; ties at exactly zero fire."""
    return g >= 0.0
