"""Report rows, run artifacts and replay verification.

Every sweep writes into one output directory::

    report.csv      one row per (solver, budget level, sample size, init, seed)
    timings.csv     wall-clock seconds per run
    summary.json    per-solver means and trend checks
    classifier.json
    runs/<run id>/problem.json, xhat.csv, trace.csv

``report.csv`` holds no timing data, so reruns with the same configuration
reproduce it byte for byte.
"""

from __future__ import annotations

import csv
import json
import logging
from collections import OrderedDict
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np

from maxsamples.exceptions import DataError, ProblemError
from maxsamples.problem import PerturbProblem, RunMetrics, load_problem, save_problem
from maxsamples.repair import check_feasibility, finalize

logger = logging.getLogger(__name__)

REPORT_SCHEMA_VERSION = 1

REPORT_COLUMNS = [
    "schema_version",
    "experiment",
    "solver",
    "budget_level",
    "sample_size",
    "init",
    "seed",
    "status",
    "selected",
    "consumption_per_sample",
    "mean_budget_residual",
    "mean_prediction_gap",
    "relative_improvement",
    "trace_path",
    "detail",
]

TRACE_COLUMNS = [
    "outer_iter",
    "selected",
    "lagrangian",
    "lambda_norm",
    "mu_norm",
    "mu_grad_norm",
]

PathLike = Union[str, Path]


def format_value(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return str(value).lower()
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def run_id(solver: str, level: float, size: int, init: str, seed: int) -> str:
    return f"{solver}-b{level!r}-n{size}-{init}-s{seed}"


@dataclass(frozen=True)
class ReportRow:
    experiment: str
    solver: str
    budget_level: float
    sample_size: int
    init: str
    seed: int
    status: str
    metrics: Optional[RunMetrics] = None
    trace_path: str = ""
    detail: str = ""
    relative_improvement: Optional[float] = None

    @property
    def key(self) -> Tuple:
        return (
            self.experiment,
            self.solver,
            self.budget_level,
            self.sample_size,
            self.init,
            self.seed,
        )

    @property
    def ok(self) -> bool:
        return self.status == "ok"

    @property
    def selected(self) -> Optional[int]:
        return self.metrics.selected if self.metrics else None

    def as_record(self) -> Dict[str, str]:
        m = self.metrics
        values = {
            "schema_version": REPORT_SCHEMA_VERSION,
            "experiment": self.experiment,
            "solver": self.solver,
            "budget_level": self.budget_level,
            "sample_size": self.sample_size,
            "init": self.init,
            "seed": self.seed,
            "status": self.status,
            "selected": m.selected if m else None,
            "consumption_per_sample": m.consumption_per_sample if m else None,
            "mean_budget_residual": m.mean_budget_residual if m else None,
            "mean_prediction_gap": m.mean_prediction_gap if m else None,
            "relative_improvement": self.relative_improvement,
            "trace_path": self.trace_path,
            "detail": self.detail,
        }
        return {k: format_value(v) for k, v in values.items()}


def relative_improvement(selected: int, baseline: int) -> Optional[float]:
    """``(selected - baseline) / baseline``; missing for a zero baseline."""
    if baseline == 0:
        return None
    return (selected - baseline) / baseline


class RunReport:
    """Append-only collection of sweep rows with unique keys."""

    def __init__(self, experiment: str, out_dir: PathLike):
        self.experiment = experiment
        self.out_dir = Path(out_dir)
        self._rows: "OrderedDict[Tuple, ReportRow]" = OrderedDict()
        self.timings: List[Tuple[str, float]] = []
        self.calibration: Dict[str, List[float]] = {}

    @property
    def rows(self) -> List[ReportRow]:
        return list(self._rows.values())

    def add(self, row: ReportRow, wall_seconds: float = 0.0) -> None:
        if row.key in self._rows:
            raise ProblemError(f"duplicate report row {row.key}")
        self._rows[row.key] = row
        self.timings.append((row.trace_path or str(row.key), wall_seconds))

    def with_relative_improvements(self, baseline: str = "kl") -> List[ReportRow]:
        """Rows with the improvement over the matching baseline row filled in."""
        base = {
            (r.budget_level, r.sample_size, r.init, r.seed): r
            for r in self._rows.values()
            if r.solver == baseline and r.ok
        }
        rows = []
        for r in self._rows.values():
            ref = base.get((r.budget_level, r.sample_size, r.init, r.seed))
            if r.ok and ref is not None:
                improvement = relative_improvement(r.selected, ref.selected)
                r = replace(r, relative_improvement=improvement)
            rows.append(r)
        return rows

    def write(self, summary: Optional[dict] = None) -> Path:
        self.out_dir.mkdir(parents=True, exist_ok=True)
        path = self.out_dir / "report.csv"
        with open(path, "w", newline="") as f:
            writer = csv.DictWriter(f, fieldnames=REPORT_COLUMNS, lineterminator="\n")
            writer.writeheader()
            for row in self.with_relative_improvements():
                writer.writerow(row.as_record())

        with open(self.out_dir / "timings.csv", "w", newline="") as f:
            writer = csv.writer(f, lineterminator="\n")
            writer.writerow(["run", "wall_seconds"])
            for name, seconds in self.timings:
                writer.writerow([name, f"{seconds:.6f}"])

        document = {
            "schema_version": REPORT_SCHEMA_VERSION,
            "experiment": self.experiment,
            "calibration": self.calibration,
        }
        document.update(summary or {})
        (self.out_dir / "summary.json").write_text(
            json.dumps(document, indent=2, sort_keys=True) + "\n"
        )
        logger.info("Wrote %d report rows to %s", len(self._rows), path)
        return path


def read_report(path: PathLike) -> List[Dict[str, str]]:
    try:
        with open(path, newline="") as f:
            rows = list(csv.DictReader(f))
    except OSError as e:
        raise DataError(f"cannot read report {path}: {e}") from e
    for row in rows:
        if row.get("schema_version") != str(REPORT_SCHEMA_VERSION):
            raise DataError(
                f"{path}: unsupported report schema {row.get('schema_version')!r}"
            )
    return rows


def write_matrix_csv(path: PathLike, M: np.ndarray) -> None:
    M = np.atleast_2d(np.asarray(M, dtype=float))
    with open(path, "w", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow([f"x{i}" for i in range(M.shape[1])])
        for row in M:
            writer.writerow([repr(float(v)) for v in row])


def read_matrix_csv(path: PathLike) -> np.ndarray:
    try:
        with open(path, newline="") as f:
            reader = csv.reader(f)
            header = next(reader)
            rows = [[float(v) for v in row] for row in reader if row]
    except (OSError, StopIteration, ValueError) as e:
        raise DataError(f"cannot read matrix {path}: {e}") from e
    return np.array(rows, dtype=float).reshape(len(rows), len(header))


def write_trace_csv(path: PathLike, trace: Iterable) -> None:
    with open(path, "w", newline="") as f:
        writer = csv.DictWriter(f, fieldnames=TRACE_COLUMNS, lineterminator="\n")
        writer.writeheader()
        for row in trace:
            writer.writerow({k: format_value(v) for k, v in row.as_dict().items()})


def write_run(
    run_dir: PathLike,
    prob: PerturbProblem,
    classifier_path: str,
    xhat: np.ndarray,
    trace: Iterable,
) -> Path:
    """Persist what a replay needs: the problem, ``xhat`` and the trace."""
    run_dir = Path(run_dir)
    run_dir.mkdir(parents=True, exist_ok=True)
    save_problem(prob, run_dir / "problem.json", classifier_path)
    write_matrix_csv(run_dir / "xhat.csv", xhat)
    write_trace_csv(run_dir / "trace.csv", trace)
    return run_dir


def verify_run(run_dir: PathLike, expected_selected: Optional[int] = None) -> List[str]:
    """Replay repair from the stored artifacts; returns violation messages."""
    run_dir = Path(run_dir)
    prob = load_problem(run_dir / "problem.json")
    xhat = read_matrix_csv(run_dir / "xhat.csv")
    solution = finalize(prob, xhat)
    issues = check_feasibility(prob, xhat, solution.selected)
    if expected_selected is not None and solution.size != expected_selected:
        issues.append(
            f"replayed {solution.size} selected samples, report has {expected_selected}"
        )
    return issues


def verify_report(out_dir: PathLike) -> Dict[str, List[str]]:
    """Replay every successful row of ``out_dir/report.csv``."""
    out_dir = Path(out_dir)
    failures = {}
    for row in read_report(out_dir / "report.csv"):
        if row["status"] != "ok":
            continue
        issues = verify_run(
            out_dir / Path(row["trace_path"]).parent, int(row["selected"])
        )
        if issues:
            failures[row["trace_path"]] = issues
    return failures


def mean(values: Sequence[float]) -> Optional[float]:
    return float(np.mean(values)) if len(values) else None


def count_inversions(means: Sequence[Optional[float]]) -> int:
    present = [m for m in means if m is not None]
    return sum(1 for a, b in zip(present, present[1:]) if b < a)
