"""
Exosystem representation and internal-model synthesis.

The exosystem generates reference and disturbance signals. The internal
model embeds a copy of the steady-state input generator: its companion pair
(Phi, Gamma) is mapped onto a user-chosen stable pair (M, N) through the
Sylvester equation T Phi - M T = N Gamma, and Psi = Gamma T^-1 is the gain the
controller feeds back from the internal-model state.
"""

import logging
from dataclasses import dataclass
from typing import Callable, Optional, Tuple

import numpy as np

from ..utils.matlib import (
    ArrayLike,
    DimensionMismatchError,
    Matrix,
    Vector,
    as_matrix,
    as_vector,
    companion,
    controllability_matrix,
    frobenius_norm,
    inverse,
    is_hurwitz,
    matrix_rank,
    solve_sylvester,
)


logger = logging.getLogger(__name__)

ReferenceOutput = Callable[[Vector, Vector], float]

# |q(0, w)| above this fails the construction-time spot test
REFERENCE_ORIGIN_TOLERANCE = 1e-12


class InternalModelError(Exception):
    """Base exception for exosystem and internal-model construction."""
    pass


class NotHurwitzError(InternalModelError):
    """Raised when a matrix required to be Hurwitz is not."""
    pass


class NotControllableError(InternalModelError):
    """Raised when the internal-model pair (M, N) is not controllable."""
    pass


class NotNeutrallyStableError(InternalModelError):
    """Raised when a generator matrix has spectrum off the imaginary axis."""
    pass


class NonZeroReferenceError(InternalModelError, ValueError):
    """Raised when the reference output does not vanish at v = 0."""
    pass


@dataclass(frozen=True)
class Exosystem:
    """Linear exosystem v' = S v with reference output y0 = q(v, w).

    q(0, w) = 0 is spot-tested at construction on ``w_samples``; without
    samples q is evaluated with an empty w, which suits references that do not
    read the uncertainty.
    """
    S: Matrix
    q: ReferenceOutput
    w_samples: Tuple[Vector, ...] = ()

    def __post_init__(self):
        """Validate S, the neutral-stability screen and q(0, w) = 0."""
        s_mat = as_matrix(self.S, "S")
        if s_mat.shape[0] != s_mat.shape[1]:
            raise DimensionMismatchError(f"S must be square, got shape {s_mat.shape}")
        if not callable(self.q):
            raise TypeError("q must be callable")
        object.__setattr__(self, "S", s_mat)
        if is_hurwitz(s_mat) or is_hurwitz(-s_mat):
            raise NotNeutrallyStableError("exosystem S has eigenvalues off the imaginary axis")

        zero_v = np.zeros(s_mat.shape[0])
        for w in self.w_samples or (np.zeros(0),):
            w_vec = np.asarray(w, dtype=np.float64)
            value = float(self.q(zero_v, w_vec))
            if not abs(value) <= REFERENCE_ORIGIN_TOLERANCE:
                raise NonZeroReferenceError(f"q(0, w) must vanish, got {value} at w={w_vec}")

    @property
    def n_v(self) -> int:
        return self.S.shape[0]

    def rates(self, v: Vector) -> Vector:
        return self.S @ v

    def reference(self, v: Vector, w: Vector) -> float:
        return float(self.q(v, w))


@dataclass(frozen=True)
class SteadyStateGenerator:
    """Coefficients of P(l) = l^s - varrho_1 - varrho_2 l - ... - varrho_s l^(s-1)."""
    varrho: Vector

    def __post_init__(self):
        """Coerce coefficients to a float vector."""
        object.__setattr__(self, "varrho", as_vector(self.varrho, "varrho"))

    @property
    def s(self) -> int:
        return int(self.varrho.size)


@dataclass(frozen=True)
class InternalModel:
    """Matrices realizing the steady-state input generator.

    Gamma and Psi are 1 x s rows stored as 1-D arrays; N is an s-vector.
    """
    Phi: Matrix
    Gamma: Vector
    M: Matrix
    N: Vector
    T: Matrix
    Psi: Vector

    @property
    def s(self) -> int:
        return self.M.shape[0]

    def sylvester_residual(self) -> float:
        """Frobenius norm of T Phi - M T - N Gamma."""
        return frobenius_norm(self.T @ self.Phi - self.M @ self.T - np.outer(self.N, self.Gamma))


def companion_from_generator(g: SteadyStateGenerator) -> Tuple[Matrix, Vector]:
    """Build the companion pair (Phi, Gamma) of a steady-state generator.

    Args:
        g: Generator with coefficients varrho_1..varrho_s

    Returns:
        Tuple (Phi, Gamma) where Phi has superdiagonal ones and last row
        varrho, and Gamma = (1, 0, ..., 0)
    """
    phi = companion(g.varrho)
    gamma = np.zeros(g.s)
    gamma[0] = 1.0
    return phi, gamma


def default_internal_model_pair(s: int) -> Tuple[Matrix, Vector]:
    """Companion (M, N) with distinct poles -1, -2, ..., -s and N = e_s.

    A companion pair with N = e_s is always controllable, and its poles are
    disjoint from the imaginary-axis spectrum of any generator.
    """
    if s < 1:
        raise ValueError("generator order must be at least 1")
    poly = np.poly(-np.arange(1.0, s + 1.0))
    m = companion(-poly[1:][::-1])
    n = np.zeros(s)
    n[-1] = 1.0
    return m, n


def synthesize(
    g: SteadyStateGenerator,
    M: Optional[ArrayLike] = None,
    N: Optional[ArrayLike] = None,
) -> InternalModel:
    """Synthesize the internal model for a generator and a stable pair (M, N).

    Args:
        g: Steady-state generator
        M: Hurwitz s x s matrix; defaults to a companion with poles -1..-s
        N: s-vector such that (M, N) is controllable; defaults to e_s

    Returns:
        InternalModel with T solving T Phi - M T = N Gamma and Psi = Gamma T^-1

    Raises:
        NotHurwitzError: If M is not Hurwitz
        NotControllableError: If (M, N) is not controllable
        SingularSystemError: If the Sylvester operator is singular
    """
    if (M is None) != (N is None):
        raise ValueError("M and N must be supplied together")
    if M is None:
        m_mat, n_vec = default_internal_model_pair(g.s)
    else:
        m_mat = as_matrix(M, "M")
        n_vec = as_vector(N, "N")
    if m_mat.shape != (g.s, g.s) or n_vec.size != g.s:
        raise DimensionMismatchError(
            f"M must be {g.s}x{g.s} and N length {g.s}, got {m_mat.shape} and {n_vec.size}"
        )

    if not is_hurwitz(m_mat):
        raise NotHurwitzError("internal-model matrix M is not Hurwitz")
    rank = matrix_rank(controllability_matrix(m_mat, n_vec))
    if rank != g.s:
        raise NotControllableError(f"(M, N) is not controllable: rank {rank} < {g.s}")

    phi, gamma = companion_from_generator(g)
    t_mat = solve_sylvester(phi, m_mat, np.outer(n_vec, gamma))
    psi = gamma @ inverse(t_mat)

    im = InternalModel(Phi=phi, Gamma=gamma, M=m_mat, N=n_vec, T=t_mat, Psi=psi)
    logger.info(f"Internal model synthesized (s={g.s}): Psi={np.array2string(psi, precision=6)}")
    logger.debug(f"Sylvester residual {im.sylvester_residual():.3e}")
    return im


def internal_model_rates(im: InternalModel, eta: ArrayLike, u: float) -> Vector:
    """Return M eta + N u.

    Raises:
        DimensionMismatchError: If eta does not have length s
    """
    eta_vec = np.asarray(eta, dtype=np.float64)
    if eta_vec.shape != (im.s,):
        raise DimensionMismatchError(f"eta must have length {im.s}, got shape {eta_vec.shape}")
    return im.M @ eta_vec + im.N * u
