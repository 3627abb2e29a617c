"""
Dense real linear-algebra kernel for the regulation simulator.

This module provides the small set of matrix operations the internal-model
synthesis and the digital controller need: checked linear solves, the
Sylvester equation, the matrix exponential, zero-order-hold discretization
and a Routh-table Hurwitz test. Everything is pure: arrays in, new arrays out.
"""

import logging
import math
from typing import Sequence, Tuple, Union

import numpy as np
import numpy.typing as npt

from ..models.enums import StabilityVerdict


logger = logging.getLogger(__name__)

Matrix = npt.NDArray[np.float64]
Vector = npt.NDArray[np.float64]
ArrayLike = Union[Sequence[float], Sequence[Sequence[float]], npt.NDArray[np.float64]]


class MatlibError(Exception):
    """Base exception for linear-algebra kernel failures."""
    pass


class SingularSystemError(MatlibError):
    """Raised when a linear system is numerically singular."""
    pass


class MatrixOverflowError(MatlibError):
    """Raised when a matrix function leaves the representable range."""
    pass


class MarginalStabilityError(MatlibError):
    """Raised by strict Hurwitz tests when a Routh pivot is numerically zero."""
    pass


class DimensionMismatchError(MatlibError, ValueError):
    """Raised when operand shapes are incompatible."""
    pass


# Solves refuse systems whose estimated condition number exceeds this
MAX_CONDITION = 1e12

# Absolute tolerance on Routh first-column pivots
ROUTH_TOLERANCE = 1e-12

# Rank tolerance used for controllability checks
RANK_TOLERANCE = 1e-10

# expm scales until the 1-norm is at most this, then applies a Taylor core
_EXPM_NORM_TARGET = 0.5
_EXPM_TAYLOR_ORDER = 13


def as_matrix(values: ArrayLike, name: str = "matrix") -> Matrix:
    """Convert input to a finite 2-D float array.

    Args:
        values: Nested sequence or array
        name: Operand name used in error messages

    Returns:
        A new float64 array with two dimensions

    Raises:
        DimensionMismatchError: If the input is not two-dimensional
        MatlibError: If any entry is not finite
    """
    arr = np.array(values, dtype=np.float64)
    if arr.ndim != 2:
        raise DimensionMismatchError(f"{name} must be 2-D, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise MatlibError(f"{name} has non-finite entries")
    return arr


def as_vector(values: ArrayLike, name: str = "vector") -> Vector:
    """Convert input to a finite, non-empty 1-D float array."""
    arr = np.array(values, dtype=np.float64).reshape(-1)
    if arr.size < 1:
        raise DimensionMismatchError(f"{name} must have at least one entry")
    if not np.all(np.isfinite(arr)):
        raise MatlibError(f"{name} has non-finite entries")
    return arr


def _require_square(a: Matrix, name: str) -> int:
    if a.shape[0] != a.shape[1]:
        raise DimensionMismatchError(f"{name} must be square, got shape {a.shape}")
    return a.shape[0]


def frobenius_norm(a: ArrayLike) -> float:
    """Return the Frobenius norm of a matrix or vector."""
    return float(np.linalg.norm(np.asarray(a, dtype=np.float64)))


def solve(a: ArrayLike, b: ArrayLike) -> npt.NDArray[np.float64]:
    """Solve ``a @ x = b`` by partial-pivot LU with a conditioning guard.

    Args:
        a: Square coefficient matrix
        b: Right-hand side vector or matrix

    Returns:
        The solution with the shape of ``b``

    Raises:
        DimensionMismatchError: If shapes are incompatible
        SingularSystemError: If the estimated condition number exceeds MAX_CONDITION
    """
    a_mat = as_matrix(a, "coefficient matrix")
    n = _require_square(a_mat, "coefficient matrix")
    rhs = np.array(b, dtype=np.float64)
    if rhs.shape[0] != n:
        raise DimensionMismatchError(
            f"right-hand side has {rhs.shape[0]} rows, expected {n}"
        )

    condition = np.linalg.cond(a_mat, 1)
    if not np.isfinite(condition) or condition > MAX_CONDITION:
        raise SingularSystemError(f"system is numerically singular (cond ~ {condition:.3e})")

    try:
        return np.linalg.solve(a_mat, rhs)
    except np.linalg.LinAlgError as e:
        raise SingularSystemError(f"LU factorization failed: {e}") from e


def inverse(a: ArrayLike) -> Matrix:
    """Return the inverse of a well-conditioned square matrix."""
    a_mat = as_matrix(a)
    n = _require_square(a_mat, "matrix")
    return solve(a_mat, np.eye(n))


def solve_sylvester(a: ArrayLike, b: ArrayLike, c: ArrayLike) -> Matrix:
    """Solve ``X @ A - B @ X = C`` for X.

    Uses the Kronecker form ``(A^T kron I - I kron B) vec(X) = vec(C)`` with
    column-major vectorization. Intended for the small orders of internal
    models, where the O(s^6) cost is irrelevant.

    Args:
        a: Square s x s matrix multiplying X on the right
        b: Square s x s matrix multiplying X on the left
        c: s x s right-hand side

    Returns:
        The s x s solution X

    Raises:
        DimensionMismatchError: If the operands are not all s x s
        SingularSystemError: If the spectra of A and B (numerically) overlap
    """
    a_mat = as_matrix(a, "A")
    b_mat = as_matrix(b, "B")
    c_mat = as_matrix(c, "C")
    s = _require_square(a_mat, "A")
    if b_mat.shape != (s, s) or c_mat.shape != (s, s):
        raise DimensionMismatchError(
            f"Sylvester operands must all be {s}x{s}, got B {b_mat.shape}, C {c_mat.shape}"
        )

    identity = np.eye(s)
    operator = np.kron(a_mat.T, identity) - np.kron(identity, b_mat)
    vec_x = solve(operator, c_mat.reshape(-1, order="F"))
    x = vec_x.reshape((s, s), order="F")

    residual = frobenius_norm(x @ a_mat - b_mat @ x - c_mat)
    logger.debug(f"Sylvester solve (s={s}) residual {residual:.3e}")
    return x


def expm(a: ArrayLike) -> Matrix:
    """Compute the matrix exponential by scaling and squaring.

    The matrix is scaled by 2^-k until its 1-norm is at most 0.5, the
    exponential of the scaled matrix is taken from an order-13 Taylor
    polynomial (Horner form), and the result is squared k times.

    Args:
        a: Square matrix with finite entries

    Returns:
        e^A

    Raises:
        DimensionMismatchError: If the matrix is not square
        MatrixOverflowError: If the result is not representable
    """
    a_mat = as_matrix(a)
    n = _require_square(a_mat, "matrix")
    identity = np.eye(n)

    norm = float(np.linalg.norm(a_mat, 1))
    if norm == 0.0:
        return identity
    if not math.isfinite(norm):
        raise MatrixOverflowError("matrix norm is not representable")

    # log difference: norm / target overflows for norms near the float limit
    squarings = max(0, math.ceil(math.log2(norm) - math.log2(_EXPM_NORM_TARGET)))
    scaled = np.ldexp(a_mat, -squarings)

    result = identity.copy()
    for j in range(_EXPM_TAYLOR_ORDER, 0, -1):
        result = identity + (scaled @ result) / j

    with np.errstate(over="ignore", invalid="ignore"):
        for _ in range(squarings):
            result = result @ result

    if not np.all(np.isfinite(result)):
        raise MatrixOverflowError(
            f"matrix exponential overflowed (1-norm {norm:.3e}, {squarings} squarings)"
        )
    return result


def zoh_discretize(a: ArrayLike, b: ArrayLike, dt: float) -> Tuple[Matrix, Matrix]:
    """Exact zero-order-hold discretization of ``x' = A x + B u``.

    Both factors are read off the exponential of the augmented block
    ``[[A, B], [0, 0]] * dt``.

    Args:
        a: n x n state matrix
        b: n x m input matrix (a 1-D input is treated as n x 1)
        dt: Hold interval, strictly positive

    Returns:
        Tuple (A_d, B_d) with A_d = e^{A dt} and B_d = int_0^dt e^{A tau} dtau B
    """
    if not dt > 0.0:
        raise ValueError(f"hold interval must be positive, got {dt}")

    a_mat = as_matrix(a, "A")
    n = _require_square(a_mat, "A")
    b_arr = np.array(b, dtype=np.float64)
    if b_arr.ndim == 1:
        b_arr = b_arr.reshape(-1, 1)
    b_mat = as_matrix(b_arr, "B")
    if b_mat.shape[0] != n:
        raise DimensionMismatchError(f"B has {b_mat.shape[0]} rows, expected {n}")
    m = b_mat.shape[1]

    block = np.zeros((n + m, n + m))
    block[:n, :n] = a_mat
    block[:n, n:] = b_mat
    exp_block = expm(block * dt)
    return exp_block[:n, :n].copy(), exp_block[:n, n:].copy()


def char_poly(a: ArrayLike) -> Vector:
    """Characteristic polynomial coefficients by Faddeev-LeVerrier.

    Returns:
        Coefficients highest power first; the leading entry is 1
    """
    a_mat = as_matrix(a)
    n = _require_square(a_mat, "matrix")
    identity = np.eye(n)

    coeffs = [1.0]
    aux = np.zeros((n, n))
    c = 1.0
    for k in range(1, n + 1):
        aux = a_mat @ aux + c * identity
        c = -float(np.trace(a_mat @ aux)) / k
        coeffs.append(c)
    return np.array(coeffs)


def routh_first_column(coeffs: ArrayLike) -> Vector:
    """First column of the Routh table of a polynomial (highest power first).

    Construction stops at the first pivot within ROUTH_TOLERANCE of zero, so
    the returned column may be shorter than the polynomial order plus one.
    """
    poly = as_vector(coeffs, "polynomial")
    width = len(poly) // 2 + 1
    prev = np.zeros(width)
    curr = np.zeros(width)
    prev[: len(poly[0::2])] = poly[0::2]
    curr[: len(poly[1::2])] = poly[1::2]

    column = [prev[0]]
    if len(poly) == 1:
        return np.array(column)
    column.append(curr[0])

    for _ in range(len(poly) - 2):
        pivot = curr[0]
        if abs(pivot) <= ROUTH_TOLERANCE:
            break
        nxt = np.zeros(width)
        nxt[:-1] = (pivot * prev[1:] - prev[0] * curr[1:]) / pivot
        prev, curr = curr, nxt
        column.append(curr[0])
    return np.array(column)


def stability_verdict(a: ArrayLike) -> StabilityVerdict:
    """Classify a square matrix as Hurwitz, unstable or marginal via Routh.

    A first-column sign change means at least one eigenvalue in the open
    right half-plane; a pivot within tolerance of zero is reported as
    marginal.
    """
    column = routh_first_column(char_poly(a))
    for pivot in column:
        if pivot < -ROUTH_TOLERANCE:
            return StabilityVerdict.UNSTABLE
        if pivot <= ROUTH_TOLERANCE:
            return StabilityVerdict.MARGINAL
    return StabilityVerdict.HURWITZ


def is_hurwitz(a: ArrayLike, strict: bool = False) -> bool:
    """Check whether every eigenvalue of A has strictly negative real part.

    Args:
        a: Square matrix
        strict: Raise instead of returning False on a marginal verdict

    Returns:
        True iff the Routh first column is strictly positive

    Raises:
        MarginalStabilityError: If strict and a Routh pivot is numerically zero
    """
    verdict = stability_verdict(a)
    if strict and verdict is StabilityVerdict.MARGINAL:
        raise MarginalStabilityError("Routh pivot within tolerance of zero")
    return verdict is StabilityVerdict.HURWITZ


def controllability_matrix(m: ArrayLike, n: ArrayLike) -> Matrix:
    """Return [N, MN, ..., M^{s-1}N] for a single-input pair."""
    m_mat = as_matrix(m, "M")
    s = _require_square(m_mat, "M")
    n_vec = as_vector(n, "N")
    if n_vec.size != s:
        raise DimensionMismatchError(f"N has {n_vec.size} entries, expected {s}")

    columns = [n_vec]
    for _ in range(s - 1):
        columns.append(m_mat @ columns[-1])
    return np.column_stack(columns)


def matrix_rank(a: ArrayLike, tol: float = RANK_TOLERANCE) -> int:
    """Numerical rank with an absolute singular-value tolerance."""
    return int(np.linalg.matrix_rank(as_matrix(a), tol=tol))


def companion(last_row: ArrayLike) -> Matrix:
    """Companion matrix with superdiagonal ones and the given last row."""
    row = as_vector(last_row, "last row")
    s = row.size
    mat = np.zeros((s, s))
    if s > 1:
        mat[:-1, 1:] = np.eye(s - 1)
    mat[-1, :] = row
    return mat
