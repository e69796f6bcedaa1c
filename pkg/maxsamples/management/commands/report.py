"""Management command to summarise and verify a sweep output directory."""

from collections import defaultdict
from pathlib import Path

from django.core.management.base import CommandError

from maxsamples.harness.reports import read_report, verify_report
from maxsamples.management.base import CONFIG_ERROR, MaxSamplesCommand


class Command(MaxSamplesCommand):
    help = "Print mean selected counts from report.csv; --verify replays every run."

    def add_command_arguments(self, parser):
        parser.add_argument("--dir", required=True, help="Sweep output directory")
        parser.add_argument(
            "--verify",
            action="store_true",
            help="Replay repair on every stored xhat and check feasibility",
        )

    def handle(self, *args, **options):
        out = Path(options["dir"])
        rows = read_report(out / "report.csv")

        cells = defaultdict(list)
        failed = 0
        for row in rows:
            if row["status"] != "ok":
                failed += 1
                continue
            key = (row["solver"], row["budget_level"], row["sample_size"], row["init"])
            cells[key].append(int(row["selected"]))

        self.stdout.write(self.style.MIGRATE_HEADING(f"Report {out}"))
        for (solver, level, size, init), values in cells.items():
            self.stdout.write(
                f"  {solver:<5} level={level} size={size} init={init}: "
                f"mean selected {sum(values) / len(values):.2f} over {len(values)} runs"
            )
        if failed:
            self.stdout.write(self.style.WARNING(f"  {failed} failed runs"))

        if not options["verify"]:
            return
        failures = verify_report(out)
        if failures:
            for run, issues in failures.items():
                for issue in issues:
                    self.stdout.write(self.style.ERROR(f"  {run}: {issue}"))
            raise CommandError(
                f"{len(failures)} runs failed verification", returncode=CONFIG_ERROR
            )
        self.success(f"All {len(rows) - failed} runs verified feasible.")
