"""
CSV artifacts for simulation runs and sweeps.

Floats are written in their shortest round-trip decimal form (``repr``), so
identical runs produce byte-identical files.
"""

import csv
import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence

import numpy as np

from ..models.data_models import Metrics, SimResult


logger = logging.getLogger(__name__)

TRIGGER_COLUMNS = ("k", "t_k", "dwell")
CONDITION_COLUMNS = ("t", "lhs", "rhs")
SWEEP_COLUMNS = ("delta", "sigma", "trigger_count", "tail_sup_error", "min_dwell")


def format_value(value) -> str:
    """Shortest round-trip text for numbers; empty for missing values."""
    if value is None:
        return ""
    if isinstance(value, bool):
        return str(value).lower()
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def _write_rows(path: Path, header: Sequence[str], rows: Iterable[Sequence]) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([format_value(value) for value in row])
    logger.debug(f"Wrote {path}")
    return path


def write_trace(res: SimResult, path: Path) -> Path:
    """trace.csv: t,e,y,y0,u,v1..,z1..,x1..,eta1..,xihat1.."""
    return _write_rows(path, res.trace_columns, (map(float, row) for row in res.trace))


def write_trigger_log(res: SimResult, path: Path) -> Path:
    """triggers.csv: k,t_k,dwell."""
    return _write_rows(path, TRIGGER_COLUMNS, ((rec.k, rec.t_k, rec.dwell) for rec in res.trigger_log))


def write_condition(res: SimResult, path: Path) -> Path:
    """condition.csv: both sides of the firing rule at the trace instants."""
    return _write_rows(path, CONDITION_COLUMNS, (map(float, row) for row in res.condition))


def metrics_rows(res: SimResult, metrics: Metrics) -> List[List]:
    """Key/value rows of the metrics summary."""
    rows: List[List] = [
        ["status", str(res.status)],
        ["delta", res.delta],
        ["sigma", res.sigma],
        ["t_end", res.t_end],
        ["trigger_count", metrics.trigger_count_total],
        ["tail_window_start", metrics.tail_window[0]],
        ["tail_window_end", metrics.tail_window[1]],
        ["tail_sup_error", metrics.tail_sup_error if math.isfinite(metrics.tail_sup_error) else None],
        ["min_dwell", metrics.min_dwell if math.isfinite(metrics.min_dwell) else None],
        ["mean_dwell", metrics.mean_dwell if math.isfinite(metrics.mean_dwell) else None],
        ["count_window", metrics.count_window],
    ]
    for i, count in enumerate(metrics.trigger_counts_windowed):
        start = i * metrics.count_window
        rows.append([f"triggers_{format_value(start)}_{format_value(start + metrics.count_window)}", count])
    return rows


def write_metrics(res: SimResult, metrics: Metrics, path: Path) -> Path:
    """metrics.csv: one key,value row per figure of merit."""
    return _write_rows(path, ("key", "value"), metrics_rows(res, metrics))


@dataclass
class RunArtifacts:
    """Paths of the files written for one run."""
    trace: Path
    triggers: Path
    condition: Path
    metrics: Path

    def as_dict(self) -> Dict[str, Path]:
        return {
            "trace": self.trace,
            "triggers": self.triggers,
            "condition": self.condition,
            "metrics": self.metrics,
        }


def write_run(res: SimResult, metrics: Metrics, out_dir: Path) -> RunArtifacts:
    """Write every artifact of a single run into out_dir."""
    artifacts = RunArtifacts(
        trace=write_trace(res, out_dir / "trace.csv"),
        triggers=write_trigger_log(res, out_dir / "triggers.csv"),
        condition=write_condition(res, out_dir / "condition.csv"),
        metrics=write_metrics(res, metrics, out_dir / "metrics.csv"),
    )
    logger.info(f"Artifacts written to {out_dir}")
    return artifacts


@dataclass
class SweepRow:
    """One sweep summary row; numeric fields are None when the run failed."""
    delta: float
    sigma: float
    trigger_count: Optional[int] = None
    tail_sup_error: Optional[float] = None
    min_dwell: Optional[float] = None
    status: str = "Completed"
    error: Optional[str] = None

    @property
    def ok(self) -> bool:
        return self.error is None and self.status == "Completed"


def write_sweep(rows: Sequence[SweepRow], path: Path) -> Path:
    """sweep.csv: delta,sigma,trigger_count,tail_sup_error,min_dwell."""
    return _write_rows(
        path,
        SWEEP_COLUMNS,
        (
            (
                row.delta,
                row.sigma,
                row.trigger_count,
                row.tail_sup_error,
                row.min_dwell if row.min_dwell is None or math.isfinite(row.min_dwell) else None,
            )
            for row in rows
        ),
    )
