"""Management command for the budget-level sweep."""

from maxsamples.harness.experiments import ExperimentConfig, run_budget_sweep
from maxsamples.management.base import MaxSamplesCommand


class Command(MaxSamplesCommand):
    help = "Run every solver at every budget level and seed of an experiment config."
    hyperparam_flags = True

    def add_command_arguments(self, parser):
        parser.add_argument("--config", required=True, help="Experiment JSON")
        parser.add_argument("--out-dir", help="Output directory")

    def handle(self, *args, **options):
        cfg = ExperimentConfig.load(options["config"])
        report = run_budget_sweep(
            cfg, options["out_dir"], self.hyperparam_overrides(options)
        )
        failed = [row for row in report.rows if not row.ok]
        for row in failed:
            self.stdout.write(
                self.style.WARNING(
                    f"  failed: {row.solver} level {row.budget_level!r} "
                    f"seed {row.seed}: {row.detail}"
                )
            )
        self.success(f"{len(report.rows)} runs written to {report.out_dir}")
