"""
Scenario runner for the regulation simulator.

This module provides the ScenarioRunner class that coordinates scenario
building, single runs, parameter sweeps over delta and sigma on a worker
pool, artifact emission and the design verification report.
"""

import logging
import math
import os
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, List, Optional, Sequence, Tuple, TypeVar

import numpy as np
from joblib import Parallel, delayed

from .hybridsim import SimulationError, simulate
from .regulation import GainFunction, RegulationError, observer_matrix, rho_probe_failures
from ..models.data_models import Metrics, SimResult
from ..models.enums import SimStatus
from ..models.exogen import (
    InternalModel,
    InternalModelError,
    SteadyStateGenerator,
    companion_from_generator,
    default_internal_model_pair,
)
from ..models.plant import LorenzParams
from ..utils.analysis import chain_residuals, compute_metrics, coord_chain
from ..utils.matlib import (
    MatlibError,
    char_poly,
    controllability_matrix,
    frobenius_norm,
    inverse,
    is_hurwitz,
    matrix_rank,
    solve_sylvester,
)
from ..utils.reports import RunArtifacts, SweepRow, write_run, write_sweep
from ..utils.scenario import Scenario, ScenarioError


logger = logging.getLogger(__name__)

# Verification thresholds
SYLVESTER_TOLERANCE = 1e-10
CHAR_POLY_TOLERANCE = 1e-9
CHAIN_TOLERANCE = 1e-13

# Exceptions a verify check turns into a FAIL line
VERIFY_ERRORS = (MatlibError, InternalModelError, RegulationError, ValueError, TypeError)

T = TypeVar("T")


def run_scenario(scenario: Scenario) -> Tuple[SimResult, Metrics]:
    """Build and simulate one scenario, returning the result and its metrics."""
    components = scenario.build()
    result = simulate(*components)
    metrics = compute_metrics(result, scenario.tail_window)
    return result, metrics


def sweep_worker(scenario: Scenario) -> SweepRow:
    """Run one sweep point; failures become rows instead of exceptions."""
    row = SweepRow(delta=scenario.delta, sigma=scenario.sigma)
    try:
        result, metrics = run_scenario(scenario)
    except (ScenarioError, SimulationError, MatlibError, ValueError) as e:
        row.status = type(e).__name__
        row.error = str(e)
        return row
    row.status = str(result.status)
    row.trigger_count = metrics.trigger_count_total
    row.tail_sup_error = metrics.tail_sup_error if math.isfinite(metrics.tail_sup_error) else None
    row.min_dwell = metrics.min_dwell
    return row


@dataclass
class RunOutcome:
    """Result, metrics and written files of a single run."""
    result: SimResult
    metrics: Metrics
    artifacts: RunArtifacts


@dataclass
class VerifyCheck:
    """One named verification check."""
    name: str
    passed: bool
    detail: str

    def line(self) -> str:
        return f"{'PASS' if self.passed else 'FAIL'}  {self.name}: {self.detail}"


@dataclass
class VerifyReport:
    """Outcome of verifying a scenario's design data."""
    scenario: str
    checks: List[VerifyCheck] = field(default_factory=list)
    psi: Optional[np.ndarray] = None

    @property
    def ok(self) -> bool:
        return all(check.passed for check in self.checks)

    @property
    def first_failure(self) -> Optional[VerifyCheck]:
        return next((check for check in self.checks if not check.passed), None)

    def add(self, name: str, passed: bool, detail: str) -> None:
        self.checks.append(VerifyCheck(name=name, passed=passed, detail=detail))
        if not passed:
            logger.warning(f"Verify check failed: {name}: {detail}")

    def guard(self, name: str, check: Callable[[], T]) -> Optional[T]:
        """Run a check; a validation error becomes a FAIL line under ``name``."""
        try:
            return check()
        except VERIFY_ERRORS as e:
            self.add(name, False, f"{type(e).__name__}: {e}")
            return None

    def lines(self) -> List[str]:
        out = [f"Scenario: {self.scenario}"]
        if self.psi is not None:
            out.append(f"Psi = {format_vector(self.psi)}")
        out.extend(check.line() for check in self.checks)
        out.append("ALL PASS" if self.ok else f"FAILED: {self.first_failure.name}")
        return out


def format_vector(values: Sequence[float]) -> str:
    return "[" + ", ".join(f"{float(x):.10g}" for x in values) + "]"


class ScenarioRunner:
    """Coordinates single runs, sweeps and verification for one scenario."""

    def __init__(self, scenario: Scenario, out_dir: Optional[Path] = None, jobs: Optional[int] = None):
        """Initialize the runner.

        Args:
            scenario: Parsed scenario
            out_dir: Artifact directory; defaults to the scenario's [output] dir or ./out
            jobs: Worker processes for sweeps; defaults to the available parallelism
        """
        self.scenario = scenario
        self.out_dir = Path(out_dir or scenario.out_dir or "out")
        self.jobs = jobs if jobs is not None else (os.cpu_count() or 1)
        if self.jobs < 1:
            raise ValueError("jobs must be at least 1")
        logger.info(f"ScenarioRunner initialized for '{scenario.name}' (out={self.out_dir})")

    def simulate(self) -> RunOutcome:
        """Run the scenario once and write its artifacts.

        Raises:
            ScenarioValidationError: If the scenario does not build
            NonFiniteStateError: If the run blows up
        """
        started = time.perf_counter()
        result, metrics = run_scenario(self.scenario)
        artifacts = write_run(result, metrics, self.out_dir)
        logger.info(
            f"Run '{self.scenario.name}' finished: status={result.status}, "
            f"triggers={metrics.trigger_count_total}, tail sup |e|={metrics.tail_sup_error:.4g}, "
            f"wall={time.perf_counter() - started:.1f}s"
        )
        return RunOutcome(result=result, metrics=metrics, artifacts=artifacts)

    def sweep_points(self, deltas: Sequence[float], sigmas: Optional[Sequence[float]] = None) -> List[Scenario]:
        """Scenarios of the delta x sigma grid, delta then sigma descending."""
        if not deltas:
            raise ValueError("at least one delta is required")
        sigma_values = list(sigmas) if sigmas else [self.scenario.sigma]
        points = [
            self.scenario.with_overrides(delta=float(delta), sigma=float(sigma))
            for delta in sorted(set(deltas), reverse=True)
            for sigma in sorted(set(sigma_values), reverse=True)
        ]
        return points

    def sweep(self, deltas: Sequence[float], sigmas: Optional[Sequence[float]] = None) -> List[SweepRow]:
        """Run every grid point and write sweep.csv.

        Rows come back in grid order regardless of completion order; a
        failing point yields a row with its error and does not stop the sweep.
        """
        points = self.sweep_points(deltas, sigmas)
        logger.info(f"Sweep of {len(points)} point(s) on {min(self.jobs, len(points))} worker(s)")

        if self.jobs == 1 or len(points) == 1:
            rows = [sweep_worker(point) for point in points]
        else:
            rows = Parallel(n_jobs=min(self.jobs, len(points)))(delayed(sweep_worker)(point) for point in points)

        for row in rows:
            if row.ok:
                logger.info(
                    f"Sweep row delta={row.delta} sigma={row.sigma}: "
                    f"{row.trigger_count} triggers, tail sup |e|={row.tail_sup_error:.4g}"
                )
            else:
                logger.warning(f"Sweep row delta={row.delta} sigma={row.sigma} failed: {row.status} {row.error or ''}")

        path = write_sweep(rows, self.out_dir / "sweep.csv")
        logger.info(f"Sweep summary written to {path}")
        return rows

    def verify(self) -> VerifyReport:
        """Check the design data without running a simulation.

        Checks run in a fixed order and keep going after a failure, so the
        report lists every problem; the first failing check is the one named
        in the summary line. Malformed data fails the check that reads it.
        """
        sc = self.scenario
        report = VerifyReport(scenario=sc.name)

        report.guard("exosystem neutral stability", lambda: self._verify_exosystem(report))
        pair = report.guard("generator characteristic polynomial", lambda: self._verify_generator(report))
        im = None
        if pair is not None:
            im = report.guard("internal model", lambda: self._verify_internal_model(report, *pair))
        report.guard("A_o Hurwitz", lambda: self._verify_observer(report))
        rho = report.guard("rho positivity", lambda: self._verify_rho(report)) or ()

        trigger_ok = 0.0 < sc.sigma < 1.0 and sc.delta >= 0.0
        report.add("trigger parameters", trigger_ok, f"sigma={sc.sigma}, delta={sc.delta}")

        b = report.guard("plant parameters", lambda: self._verify_plant(report))

        r = len(sc.lam)
        if rho and len(rho) != r:
            report.add("relative degree", False, f"{len(rho)} gain(s) rho_i for observer order {r}")
        if im is not None and b is not None:
            report.guard("chain identities", lambda: self._verify_chain(report, im, b, r))

        logger.info(f"Verify '{sc.name}': {'all pass' if report.ok else 'failed'}")
        return report

    def _verify_exosystem(self, report: VerifyReport) -> None:
        sc = self.scenario
        s_mat = np.array(sc.exo_S) if sc.exo_kind == "linear" else np.array([[0.0, 1.0], [-1.0, 0.0]])
        neutral = not is_hurwitz(s_mat) and not is_hurwitz(-s_mat)
        report.add("exosystem neutral stability", neutral,
                   "S and -S are not Hurwitz" if neutral else "S has eigenvalues off the imaginary axis")

    def _verify_generator(self, report: VerifyReport) -> Tuple[SteadyStateGenerator, np.ndarray, np.ndarray]:
        generator = SteadyStateGenerator(varrho=np.array(self.scenario.varrho))
        phi, gamma = companion_from_generator(generator)
        expected = np.concatenate([[1.0], -generator.varrho[::-1]])
        poly_error = float(np.max(np.abs(char_poly(phi) - expected)))
        report.add("generator characteristic polynomial", poly_error <= CHAR_POLY_TOLERANCE,
                   f"char poly of Phi = {format_vector(char_poly(phi))}")
        return generator, phi, gamma

    def _verify_internal_model(
        self, report: VerifyReport, generator: SteadyStateGenerator, phi: np.ndarray, gamma: np.ndarray
    ) -> Optional[InternalModel]:
        sc = self.scenario
        if sc.M is None:
            m_mat, n_vec = default_internal_model_pair(generator.s)
        else:
            m_mat, n_vec = np.array(sc.M), np.array(sc.N)
        m_ok = m_mat.shape == (generator.s, generator.s) and n_vec.shape == (generator.s,)
        report.add("internal model dimensions", m_ok, f"M {m_mat.shape}, N {n_vec.shape}, s={generator.s}")
        if not m_ok:
            return None

        report.add("M Hurwitz", is_hurwitz(m_mat), "Routh test on M")
        rank = matrix_rank(controllability_matrix(m_mat, n_vec))
        report.add("controllability rank", rank == generator.s, f"rank {rank} of {generator.s}")
        try:
            t_mat = solve_sylvester(phi, m_mat, np.outer(n_vec, gamma))
            psi = gamma @ inverse(t_mat)
        except MatlibError as e:
            report.add("Sylvester residual", False, f"T Phi - M T = N Gamma has no usable solution: {e}")
            return None
        im = InternalModel(Phi=phi, Gamma=gamma, M=m_mat, N=n_vec, T=t_mat, Psi=psi)
        residual = im.sylvester_residual()
        report.psi = psi
        report.add("Sylvester residual", residual <= SYLVESTER_TOLERANCE,
                   f"||T Phi - M T - N Gamma||_F = {residual:.3e}")
        return im

    def _verify_observer(self, report: VerifyReport) -> None:
        lam = self.scenario.lam
        report.add("A_o Hurwitz", is_hurwitz(observer_matrix(lam)), f"lambda = {format_vector(lam)}")

    def _verify_rho(self, report: VerifyReport) -> Tuple[GainFunction, ...]:
        rho = self.scenario.rho_gains()
        failures = rho_probe_failures(rho)
        report.add("rho positivity", not failures, "; ".join(failures) or f"{len(rho)} gain(s) positive on probe grid")
        return rho

    def _verify_plant(self, report: VerifyReport) -> float:
        sc = self.scenario
        if sc.a_bar is None:
            params = LorenzParams(w=np.array(sc.w))
        else:
            params = LorenzParams(w=np.array(sc.w), a_bar=np.array(sc.a_bar))
        report.add("plant parameters", True, f"b(w) = {params.b:.10g}")
        return params.b

    def _verify_chain(self, report: VerifyReport, im: InternalModel, b: float, r: int) -> None:
        chain = coord_chain(b, im, r)
        residuals = chain_residuals(chain, im, b)
        recursion = max(residuals["c_recursion"], residuals["c_r"])
        similarity_bound = CHAIN_TOLERANCE * max(1.0, frobenius_norm(chain.U_d) ** 2)
        passed = recursion <= CHAIN_TOLERANCE and residuals["similarity"] <= similarity_bound
        report.add("chain identities", passed,
                   f"d = {format_vector(chain.d)}, recursion residual {recursion:.3e}, "
                   f"similarity residual {residuals['similarity']:.3e}")

    def get_status(self, result: SimResult) -> dict:
        """Summary of a run for the diagnostic stream."""
        return {
            "scenario": self.scenario.name,
            "status": str(result.status),
            "completed": result.status is SimStatus.COMPLETED,
            "trigger_count": result.trigger_count,
            "t_end": result.t_end,
            "wall_time": result.wall_time,
        }
