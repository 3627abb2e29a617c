"""
Output-feedback-form plants and the hyper-chaotic Lorenz benchmark.

A plant in output feedback form has a zero-dynamics block z' = f(z, y, v, w)
and a chain of integrators x_i' = g_i(z, y, v, w) + x_{i+1}, ending with
x_r' = g_r(z, y, v, w) + b(w) u, with output y = x_1. Plants are supplied as
plain callables plus dimension metadata; callables must be reentrant.
"""

import itertools
import logging
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence, Tuple

import numpy as np

from .exogen import Exosystem
from .data_models import FloatArray
from ..utils.matlib import DimensionMismatchError, Vector, as_vector


logger = logging.getLogger(__name__)

ZeroDynamics = Callable[[FloatArray, float, FloatArray, FloatArray], FloatArray]
ChainTerm = Callable[[FloatArray, float, FloatArray, FloatArray], float]
InputGain = Callable[[FloatArray], float]

# Equilibrium spot-checks accept residuals up to this size
EQUILIBRIUM_TOLERANCE = 1e-12

# Half-width of the benchmark uncertainty box |w_i| <= 1
LORENZ_W_RADIUS = 1.0


class PlantError(Exception):
    """Base exception for plant construction and evaluation."""
    pass


class InvalidParamsError(PlantError, ValueError):
    """Raised when plant parameters violate their invariants."""
    pass


@dataclass(frozen=True)
class OutputFeedbackPlant:
    """Plant in output feedback form with relative degree r."""
    r: int
    n_z: int
    f: ZeroDynamics
    g: Tuple[ChainTerm, ...]
    b: InputGain
    name: str = "plant"

    def __post_init__(self):
        """Validate dimensions and callables."""
        if not isinstance(self.r, int) or self.r < 1:
            raise InvalidParamsError("relative degree r must be a positive integer")
        if not isinstance(self.n_z, int) or self.n_z < 0:
            raise InvalidParamsError("n_z must be a non-negative integer")
        object.__setattr__(self, "g", tuple(self.g))
        if len(self.g) != self.r:
            raise InvalidParamsError(f"expected {self.r} chain terms g_i, got {len(self.g)}")
        if not callable(self.f) or not callable(self.b) or not all(callable(gi) for gi in self.g):
            raise TypeError("f, g_i and b must be callable")

    def validate(self, w_samples: Iterable[FloatArray], n_v: int) -> None:
        """Spot-check b(w) > 0 and the equilibrium conditions on sampled w.

        Raises:
            InvalidParamsError: On the first failing sample
        """
        zero_z = np.zeros(self.n_z)
        zero_v = np.zeros(n_v)
        for w in w_samples:
            w_vec = np.asarray(w, dtype=np.float64)
            gain = float(self.b(w_vec))
            if not gain > 0.0:
                raise InvalidParamsError(f"input gain b(w) must be positive, got {gain} at w={w_vec}")
            if self.n_z and np.max(np.abs(self.f(zero_z, 0.0, zero_v, w_vec))) > EQUILIBRIUM_TOLERANCE:
                raise InvalidParamsError(f"f(0, 0, 0, w) != 0 at w={w_vec}")
            for i, gi in enumerate(self.g, start=1):
                if abs(gi(zero_z, 0.0, zero_v, w_vec)) > EQUILIBRIUM_TOLERANCE:
                    raise InvalidParamsError(f"g_{i}(0, 0, 0, w) != 0 at w={w_vec}")


@dataclass
class PlantState:
    """Plant state (z, x); the output is y = x_1."""
    z: FloatArray
    x: FloatArray

    def __post_init__(self):
        """Coerce to finite float vectors."""
        self.z = np.array(self.z, dtype=np.float64).reshape(-1)
        self.x = as_vector(self.x, "x")
        if not np.all(np.isfinite(self.z)):
            raise ValueError("z must have finite entries")

    @property
    def y(self) -> float:
        return float(self.x[0])


def plant_rates(
    plant: OutputFeedbackPlant,
    st: PlantState,
    u: float,
    v: FloatArray,
    w: FloatArray,
) -> Tuple[Vector, Vector]:
    """Evaluate the output-feedback-form vector field.

    Returns:
        Tuple (z_dot, x_dot)

    Raises:
        DimensionMismatchError: If the state does not match the plant
    """
    if st.z.shape != (plant.n_z,) or st.x.shape != (plant.r,):
        raise DimensionMismatchError(
            f"state shapes z{st.z.shape}, x{st.x.shape} do not match n_z={plant.n_z}, r={plant.r}"
        )
    return chain_rates(plant, st.z, st.x, u, v, w)


def chain_rates(
    plant: OutputFeedbackPlant,
    z: FloatArray,
    x: FloatArray,
    u: float,
    v: FloatArray,
    w: FloatArray,
) -> Tuple[Vector, Vector]:
    """Unchecked vector field used inside the integrator loop."""
    y = x[0]
    z_dot = np.asarray(plant.f(z, y, v, w), dtype=np.float64) if plant.n_z else np.zeros(0)
    x_dot = np.empty(plant.r)
    for i, gi in enumerate(plant.g):
        x_dot[i] = gi(z, y, v, w)
    x_dot[:-1] += x[1:]
    x_dot[-1] += plant.b(w) * u
    return z_dot, x_dot


# Nominal Lorenz parameters (a_1, ..., a_6, b)
LORENZ_NOMINAL = (-8.0, 1.0, -6.0, 2.0, -1.0, -2.0, 1.0)


@dataclass(frozen=True)
class LorenzParams:
    """Uncertain parameters of the hyper-chaotic Lorenz plant.

    The actual parameters are a = a_bar + w and must satisfy a_1 < 0,
    a_3 < 0 and b = a_7 > 0.
    """
    w: Vector = field(default_factory=lambda: np.zeros(7))
    a_bar: Vector = field(default_factory=lambda: np.array(LORENZ_NOMINAL))

    def __post_init__(self):
        """Validate the sign constraints of a = a_bar + w."""
        w = as_vector(self.w, "w")
        a_bar = as_vector(self.a_bar, "a_bar")
        if w.size != 7 or a_bar.size != 7:
            raise InvalidParamsError("Lorenz parameters need 7 nominal values and 7 uncertainties")
        object.__setattr__(self, "w", w)
        object.__setattr__(self, "a_bar", a_bar)
        a = self.a
        if not (a[0] < 0.0 and a[2] < 0.0 and a[6] > 0.0):
            raise InvalidParamsError(
                f"Lorenz parameters require a1 < 0, a3 < 0, b > 0; got a={np.array2string(a)}"
            )

    @property
    def a(self) -> Vector:
        return self.a_bar + self.w

    @property
    def b(self) -> float:
        return float(self.a[6])


def lorenz_plant(p: LorenzParams) -> OutputFeedbackPlant:
    """Build the r = 2, n_z = 2 hyper-chaotic Lorenz plant.

    z1' = a1 z1 + a2 x1, z2' = a3 z2 + z1 x1,
    x1' = x2 + a4 z1 + a5 x1 - z1 z2, x2' = b u + a6 z1.

    The returned callables take the uncertainty w as an argument and add it to
    the nominal values, so one plant serves any w in the uncertainty box.
    """
    a_bar = p.a_bar.copy()

    def f(z: FloatArray, y: float, v: FloatArray, w: FloatArray) -> FloatArray:
        a = a_bar + w
        return np.array([a[0] * z[0] + a[1] * y, a[2] * z[1] + z[0] * y])

    def g1(z: FloatArray, y: float, v: FloatArray, w: FloatArray) -> float:
        return (a_bar[3] + w[3]) * z[0] + (a_bar[4] + w[4]) * y - z[0] * z[1]

    def g2(z: FloatArray, y: float, v: FloatArray, w: FloatArray) -> float:
        return (a_bar[5] + w[5]) * z[0]

    def b(w: FloatArray) -> float:
        return float(a_bar[6] + w[6])

    plant = OutputFeedbackPlant(r=2, n_z=2, f=f, g=(g1, g2), b=b, name="lorenz")
    plant.validate(itertools.chain([p.w], uncertainty_corners(lorenz_uncertainty_box(a_bar))), n_v=2)
    logger.debug(f"Lorenz plant built with b(w)={p.b:.3f}")
    return plant


def uncertainty_corners(bounds: Sequence[Tuple[float, float]]) -> Iterable[FloatArray]:
    """Yield every corner of a box of uncertainty values."""
    for corner in itertools.product(*bounds):
        yield np.array(corner, dtype=np.float64)


def lorenz_uncertainty_box(a_bar: FloatArray, radius: float = LORENZ_W_RADIUS) -> Tuple[Tuple[float, float], ...]:
    """Bounds of |w_i| <= radius, with w_7 kept above -a_bar_7 / 2 so that b(w) > 0."""
    bounds = [(-radius, radius)] * 6
    bounds.append((max(-radius, -0.5 * float(a_bar[6])), radius))
    return tuple(bounds)


def lorenz_exosystem() -> Exosystem:
    """Harmonic-oscillator exosystem v1' = v2, v2' = -v1 with y0 = v1."""
    def q(v: FloatArray, w: FloatArray) -> float:
        return float(v[0])

    return Exosystem(S=np.array([[0.0, 1.0], [-1.0, 0.0]]), q=q)
