"""Synthetic data, experiment protocols and report emission."""

from maxsamples.harness.data import generate_synthetic, train_test_split
from maxsamples.harness.experiments import (
    ExperimentConfig,
    build_candidates,
    calibrate_budget,
    prepare,
    run_budget_sweep,
    run_scalability_sweep,
)
from maxsamples.harness.reports import RunReport, read_report, verify_report

__all__ = [
    "ExperimentConfig",
    "RunReport",
    "build_candidates",
    "calibrate_budget",
    "generate_synthetic",
    "prepare",
    "read_report",
    "run_budget_sweep",
    "run_scalability_sweep",
    "train_test_split",
    "verify_report",
]
