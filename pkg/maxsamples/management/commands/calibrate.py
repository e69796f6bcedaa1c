"""Management command to calibrate budgets with an unlimited KL run."""

import json
from pathlib import Path

from maxsamples.exceptions import ConfigurationError
from maxsamples.harness.experiments import calibrate_budget, scaled_budget
from maxsamples.management.base import MaxSamplesCommand
from maxsamples.problem import load_problem
from maxsamples.solvers import HyperParams


def parse_levels(value: str):
    try:
        levels = [float(v) for v in value.split(",") if v.strip()]
    except ValueError as e:
        raise ConfigurationError(f"invalid budget levels {value!r}") from e
    if not levels or any(not level > 0 for level in levels):
        raise ConfigurationError("budget levels must be positive")
    return levels


class Command(MaxSamplesCommand):
    help = (
        "Run the KL solver with unlimited budgets and write the per-feature "
        "reference consumption plus the scaled budget levels."
    )
    hyperparam_flags = True

    def add_command_arguments(self, parser):
        parser.add_argument("--problem", required=True, help="Problem JSON")
        parser.add_argument(
            "--levels", default="0.4,0.6,0.8", help="Comma-separated scale factors"
        )
        parser.add_argument("--out", required=True, help="Output calibration JSON")

    def handle(self, *args, **options):
        levels = parse_levels(options["levels"])
        prob = load_problem(options["problem"])
        hp = HyperParams.from_settings(self.hyperparam_overrides(options))
        reference = calibrate_budget(prob, hp)
        document = {
            "reference": reference.tolist(),
            "budgets": {
                repr(level): scaled_budget(reference, level).tolist()
                for level in levels
            },
        }
        Path(options["out"]).write_text(json.dumps(document, indent=2) + "\n")
        self.success(
            f"Reference consumption {reference.sum()!r} written to {options['out']}"
        )
