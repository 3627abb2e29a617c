"""
Metrics and coordinate-chain diagnostics.

Metrics summarize a SimResult: the steady-stage tracking error, trigger
counts (total and per time window) and inter-event statistics. The chain
helpers assemble the coordinate and input transformation of the design
(c_i, d_i, U_d, A_d, A_c) and, given a regulator solution, map a closed-loop
state into the transformed coordinates.
"""

import logging
import math
from dataclasses import dataclass
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from ..models.data_models import ClosedLoopState, FloatArray, Metrics, SimResult, TriggerRecord
from ..models.enums import SimStatus
from ..models.exogen import InternalModel
from .matlib import Matrix, Vector, companion


logger = logging.getLogger(__name__)

# Steady-stage window length used when no tail window is given
DEFAULT_TAIL_LENGTH = 5.0

# Width of the windows used for per-window trigger counts
DEFAULT_COUNT_WINDOW = 5.0


class AnalysisError(Exception):
    """Base exception for analysis failures."""
    pass


class EmptyWindowError(AnalysisError, ValueError):
    """Raised when a metrics window contains no trace rows."""
    pass


class InvalidGainError(AnalysisError, ValueError):
    """Raised when the high-frequency gain b is not positive."""
    pass


class MissingSolutionError(AnalysisError):
    """Raised when a transformed view is requested without a regulator solution."""
    pass


class InvalidSolutionError(AnalysisError, ValueError):
    """Raised when a regulator solution does not vanish at the origin."""
    pass


def default_tail_window(t_end: float) -> Tuple[float, float]:
    return (max(0.0, t_end - DEFAULT_TAIL_LENGTH), t_end)


def windowed_counts(log: Sequence[TriggerRecord], t_end: float, width: float = DEFAULT_COUNT_WINDOW) -> List[int]:
    """Count triggers in consecutive windows [0, width), [width, 2 width), ...

    The last window is closed on the right so a trigger at exactly t_end is
    counted.
    """
    if not width > 0.0:
        raise ValueError(f"count window must be positive, got {width}")
    n_windows = max(1, math.ceil(t_end / width - 1e-12))
    counts = [0] * n_windows
    for rec in log:
        index = min(int(rec.t_k // width), n_windows - 1)
        counts[index] += 1
    return counts


def compute_metrics(
    res: SimResult,
    tail_window: Optional[Tuple[float, float]] = None,
    count_window: float = DEFAULT_COUNT_WINDOW,
) -> Metrics:
    """Compute the figures of merit of a run.

    Args:
        res: Simulation result
        tail_window: (t_a, t_b) with t_a < t_b <= t_end; defaults to [t_end - 5, t_end]
        count_window: Width of the per-window trigger counts

    Returns:
        Metrics with tail_sup_error = max |e| over trace rows in the window.
        A run that stopped early before reaching the window gets NaN.

    Raises:
        EmptyWindowError: If the window is malformed, or holds no trace rows
            of a completed run
    """
    t_a, t_b = tail_window if tail_window is not None else default_tail_window(res.t_end)
    if not (0.0 <= t_a < t_b <= res.t_end):
        raise EmptyWindowError(f"tail window [{t_a}, {t_b}] must satisfy 0 <= t_a < t_b <= t_end={res.t_end}")

    t = res.column("t")
    mask = (t >= t_a) & (t <= t_b)
    if np.any(mask):
        tail_sup_error = float(np.max(np.abs(res.column("e")[mask])))
    elif res.status is not SimStatus.COMPLETED:
        last = float(t[-1]) if t.size else 0.0
        logger.warning(f"Run stopped ({res.status}) at t={last:.6g}, before tail window [{t_a}, {t_b}]")
        tail_sup_error = math.nan
    else:
        raise EmptyWindowError(f"no trace rows in tail window [{t_a}, {t_b}]")

    dwells = np.array([rec.dwell for rec in res.trigger_log])
    metrics = Metrics(
        tail_sup_error=tail_sup_error,
        tail_window=(t_a, t_b),
        trigger_count_total=res.trigger_count,
        trigger_counts_windowed=windowed_counts(res.trigger_log, res.t_end, count_window),
        count_window=count_window,
        min_dwell=float(dwells.min()) if dwells.size else math.inf,
        mean_dwell=float(dwells.mean()) if dwells.size else math.nan,
    )
    logger.debug(
        f"Metrics: tail sup |e|={metrics.tail_sup_error:.4g} on [{t_a}, {t_b}], "
        f"triggers={metrics.trigger_count_total}, min dwell={metrics.min_dwell:.3g}"
    )
    return metrics


@dataclass(frozen=True)
class CoordChain:
    """Coordinate-chain data of the design.

    c holds c_1..c_r (each an s-vector) with c_r = b^-1 N and c_{i-1} = M c_i;
    d holds d_1..d_r with d_i = b Psi c_{r+1-i}. C is the s x r block row
    [c_1 ... c_r].
    """
    c: Tuple[Vector, ...]
    d: Vector
    U_d: Matrix
    C: Matrix
    A_d: Matrix
    A_c: Matrix

    @property
    def r(self) -> int:
        return int(self.d.size)


def shift_matrix(r: int) -> Matrix:
    """A_c: ones on the superdiagonal, zeros elsewhere."""
    return np.eye(r, k=1)


def unit_lower_band(d: Sequence[float]) -> Matrix:
    """U_d with ones on the diagonal and U_d[i, j] = -d_{i-j} below it."""
    d_vec = np.asarray(d, dtype=np.float64)
    r = d_vec.size
    u_d = np.eye(r)
    for i in range(1, r):
        for j in range(i):
            u_d[i, j] = -d_vec[i - j - 1]
    return u_d


def coord_chain(b: float, im: InternalModel, r: int) -> CoordChain:
    """Assemble c_i, d_i, U_d, C, A_d and A_c.

    Args:
        b: High-frequency gain b(w) > 0
        im: Internal model providing M, N and Psi
        r: Relative degree

    Returns:
        CoordChain for the given gain

    Raises:
        InvalidGainError: If b <= 0
    """
    if not b > 0.0:
        raise InvalidGainError(f"high-frequency gain must be positive, got {b}")
    if r < 1:
        raise ValueError("relative degree must be at least 1")

    c: List[Vector] = [im.N / b]
    for _ in range(r - 1):
        c.insert(0, im.M @ c[0])
    d = np.array([b * float(im.Psi @ c[r - i]) for i in range(1, r + 1)])

    return CoordChain(
        c=tuple(c),
        d=d,
        U_d=unit_lower_band(d),
        C=np.column_stack(c),
        A_d=companion(d[::-1]),
        A_c=shift_matrix(r),
    )


def chain_residuals(chain: CoordChain, im: InternalModel, b: float) -> Dict[str, float]:
    """Residuals of the identities the chain must satisfy.

    Keys: ``c_recursion`` (max |c_{i-1} - M c_i|), ``c_r`` (|c_r - N/b|),
    ``similarity`` (max |U_d A_d - A_c U_d - d e_1^T|).
    """
    recursion = max(
        (float(np.max(np.abs(chain.c[i - 1] - im.M @ chain.c[i]))) for i in range(1, chain.r)),
        default=0.0,
    )
    tail = float(np.max(np.abs(chain.c[-1] - im.N / b)))
    first_column = np.zeros((chain.r, chain.r))
    first_column[:, 0] = chain.d
    similarity = float(np.max(np.abs(chain.U_d @ chain.A_d - chain.A_c @ chain.U_d - first_column)))
    return {"c_recursion": recursion, "c_r": tail, "similarity": similarity}


SolutionMap = Callable[[FloatArray, FloatArray], FloatArray]


@dataclass(frozen=True)
class RegulatorSolution:
    """Steady-state maps zz(v, w), xx(v, w) and theta(v, w)."""
    zz: SolutionMap
    xx: SolutionMap
    theta: SolutionMap

    def __post_init__(self):
        """Check callables."""
        if not all(callable(fn) for fn in (self.zz, self.xx, self.theta)):
            raise TypeError("regulator solution maps must be callable")

    def check_origin(self, n_v: int, w: FloatArray, tol: float = 1e-12) -> bool:
        """Spot-test zz(0, w) = 0."""
        zz0 = np.asarray(self.zz(np.zeros(n_v), w), dtype=np.float64)
        return bool(np.all(np.abs(zz0) <= tol))


@dataclass(frozen=True)
class TransformedView:
    """Closed-loop state in transformed coordinates.

    xi_bar = xi - xi_hat is the observer error in those coordinates.
    """
    z_bar: Vector
    x_bar: Vector
    eta_bar: Vector
    xi: Vector
    xi_bar: Vector


def transformed_view(
    state: ClosedLoopState,
    sol: Optional[RegulatorSolution],
    chain: CoordChain,
    b: float,
    w: FloatArray,
) -> TransformedView:
    """Map a closed-loop state into transformed coordinates.

    z_bar = z - zz(v, w), x_bar = x - xx(v, w), eta_bar = eta - theta(v, w) - C x_bar
    and xi = b^-1 U_d x_bar.

    Raises:
        MissingSolutionError: If no regulator solution is supplied
        InvalidSolutionError: If zz(0, w) != 0
        InvalidGainError: If b <= 0
    """
    if sol is None:
        raise MissingSolutionError("transformed view needs a regulator solution (zz, xx, theta)")
    if not sol.check_origin(state.v.size, w):
        raise InvalidSolutionError("regulator solution must satisfy zz(0, w) = 0")
    if not b > 0.0:
        raise InvalidGainError(f"high-frequency gain must be positive, got {b}")

    z_bar = state.z - np.asarray(sol.zz(state.v, w), dtype=np.float64)
    x_bar = state.x - np.asarray(sol.xx(state.v, w), dtype=np.float64)
    eta_bar = state.eta - np.asarray(sol.theta(state.v, w), dtype=np.float64) - chain.C @ x_bar
    xi = chain.U_d @ x_bar / b
    return TransformedView(
        z_bar=z_bar,
        x_bar=x_bar,
        eta_bar=eta_bar,
        xi=xi,
        xi_bar=xi - state.xi_hat,
    )


def x_bar_from_xi(xi: Vector, chain: CoordChain, b: float) -> Vector:
    """Inverse map x_bar = b U_d^-1 xi (forward substitution on the unit triangle)."""
    x_bar = np.zeros(chain.r)
    for i in range(chain.r):
        x_bar[i] = b * xi[i] - chain.U_d[i, :i] @ x_bar[:i]
    return x_bar
