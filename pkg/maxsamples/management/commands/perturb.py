"""Management command to run one solver on a problem file."""

import json
from pathlib import Path

import numpy as np

from maxsamples.classifier import save_classifier
from maxsamples.exceptions import ConfigurationError, DataError
from maxsamples.harness.reports import write_run
from maxsamples.management.base import MaxSamplesCommand
from maxsamples.problem import load_problem
from maxsamples.repair import finalize
from maxsamples.solvers import SOLVERS, HyperParams, get_solver


def calibrated_budget(path: str, level: float) -> np.ndarray:
    try:
        document = json.loads(Path(path).read_text())
        reference = np.asarray(document["reference"], dtype=float)
    except (OSError, ValueError, KeyError) as e:
        raise DataError(f"cannot read calibration {path}: {e}") from e
    return reference * level


class Command(MaxSamplesCommand):
    help = (
        "Run a solver, repair its output and write xhat.csv, trace.csv and "
        "result.json."
    )
    hyperparam_flags = True

    def add_command_arguments(self, parser):
        parser.add_argument("--problem", required=True, help="Problem JSON")
        parser.add_argument("--solver", choices=list(SOLVERS), required=True)
        parser.add_argument("--out-dir", required=True)
        parser.add_argument(
            "--calibration",
            help="Calibration JSON; budgets become reference x --level",
        )
        parser.add_argument("--level", type=float, help="Budget scale factor")

    def handle(self, *args, **options):
        prob = load_problem(options["problem"])
        if options["calibration"]:
            if options["level"] is None:
                raise ConfigurationError("--calibration requires --level")
            prob = prob.with_budgets(
                calibrated_budget(options["calibration"], options["level"])
            )
        hp = HyperParams.from_settings(self.hyperparam_overrides(options))
        state = get_solver(options["solver"])(prob, hp).solve()
        solution = finalize(prob, state.xhat)

        out = Path(options["out_dir"])
        out.mkdir(parents=True, exist_ok=True)
        save_classifier(prob.classifier, out / "classifier.json")
        write_run(out, prob, "classifier.json", state.xhat, state.trace)
        result = {
            "solver": options["solver"],
            "selected": solution.selected.tolist(),
            "optimal": solution.optimal,
            "metrics": solution.metrics.as_dict(),
            "hyperparams": hp.for_solver(options["solver"]).as_dict(),
        }
        (out / "result.json").write_text(json.dumps(result, indent=2) + "\n")
        self.success(
            f"{options['solver']}: {solution.size} of {prob.n_samples} samples "
            f"perturbed feasibly, written to {out}"
        )

