"""Management command to generate a synthetic labelled dataset."""

from maxsamples.harness.data import generate_synthetic
from maxsamples.management.base import MaxSamplesCommand
from maxsamples.problem import write_dataset_csv


class Command(MaxSamplesCommand):
    help = "Generate Gaussian-blob data as CSV (features x0.., then label)."

    def add_command_arguments(self, parser):
        parser.add_argument("--n", type=int, default=400, help="Number of samples")
        parser.add_argument("--p", type=int, default=10, help="Number of features")
        parser.add_argument("--k", type=int, default=2, help="Number of classes")
        parser.add_argument(
            "--separation",
            type=float,
            default=3.0,
            help="Distance between class means",
        )
        parser.add_argument("--seed", type=int, default=0)
        parser.add_argument("--out", required=True, help="Output CSV path")

    def handle(self, *args, **options):
        data = generate_synthetic(
            options["n"],
            options["p"],
            options["k"],
            options["separation"],
            options["seed"],
        )
        write_dataset_csv(data, options["out"])
        self.success(
            f"Wrote {data.X.shape[0]} samples with {data.X.shape[1]} features "
            f"to {options['out']}"
        )
