"""Management command to build a problem file from a dataset and a model."""

import os
from pathlib import Path

import numpy as np

from maxsamples.classifier import load_classifier
from maxsamples.conf import maxsamples_config
from maxsamples.exceptions import ConfigurationError
from maxsamples.harness.experiments import build_candidates
from maxsamples.management.base import MaxSamplesCommand
from maxsamples.problem import PerturbProblem, read_dataset_csv, save_problem
from maxsamples.solvers import HyperParams


def parse_indices(value: str):
    try:
        return [int(v) for v in value.split(",") if v.strip()]
    except ValueError as e:
        raise ConfigurationError(f"invalid feature list {value!r}") from e


class Command(MaxSamplesCommand):
    help = (
        "Select correctly predicted samples outside the desired class and write "
        "them as a problem JSON file."
    )

    def add_command_arguments(self, parser):
        parser.add_argument("--data", required=True, help="Dataset CSV")
        parser.add_argument("--classifier", required=True, help="Classifier JSON")
        parser.add_argument("--desired", type=int, required=True)
        parser.add_argument("--size", type=int, required=True, help="Candidates |S|")
        parser.add_argument("--delta", type=float, help="Confidence margin")
        parser.add_argument(
            "--budget",
            type=float,
            help="Budget for every feature (unlimited when omitted)",
        )
        parser.add_argument(
            "--perturbable",
            help="Comma-separated feature indices that may change (default all)",
        )
        parser.add_argument("--out", required=True, help="Output problem JSON")

    def handle(self, *args, **options):
        data = read_dataset_csv(options["data"])
        classifier = load_classifier(options["classifier"])
        idx = build_candidates(data, classifier, options["desired"], options["size"])

        p = data.X.shape[1]
        if options["perturbable"]:
            mask = np.zeros(p, dtype=bool)
            mask[parse_indices(options["perturbable"])] = True
        else:
            mask = np.ones(p, dtype=bool)
        budget = options["budget"]
        if budget is None:
            budget = maxsamples_config.unlimited_budget
        delta = options["delta"]
        if delta is None:
            delta = HyperParams.from_settings().delta

        prob = PerturbProblem(
            X=data.X[idx],
            mask=mask,
            budgets=np.full(p, budget),
            desired=np.full(idx.size, options["desired"]),
            delta=delta,
            classifier=classifier,
        )
        out = Path(options["out"])
        reference = os.path.relpath(
            Path(options["classifier"]).resolve(), out.resolve().parent
        )
        save_problem(prob, out, reference)
        self.success(f"Wrote problem with {prob.n_samples} samples to {out}")
