"""Management command for the scalability sweep."""

from maxsamples.harness.experiments import ExperimentConfig, run_scalability_sweep
from maxsamples.management.base import MaxSamplesCommand


class Command(MaxSamplesCommand):
    help = (
        "Run every solver on nested candidate sets with warm and random "
        "initialisation."
    )
    hyperparam_flags = True

    def add_command_arguments(self, parser):
        parser.add_argument("--config", required=True, help="Experiment JSON")
        parser.add_argument("--out-dir", help="Output directory")

    def handle(self, *args, **options):
        cfg = ExperimentConfig.load(options["config"])
        report = run_scalability_sweep(
            cfg, options["out_dir"], self.hyperparam_overrides(options)
        )
        self.success(f"{len(report.rows)} runs written to {report.out_dir}")
