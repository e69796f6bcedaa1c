"""Management command to train a classifier on a CSV dataset."""

from maxsamples.classifier import ClassifierKind, TrainConfig, save_classifier, train
from maxsamples.management.base import MaxSamplesCommand
from maxsamples.problem import read_dataset_csv


class Command(MaxSamplesCommand):
    help = "Train a logistic or one-hidden-layer classifier and save it as JSON."

    def add_command_arguments(self, parser):
        parser.add_argument("--data", required=True, help="Training CSV")
        parser.add_argument(
            "--kind",
            choices=[kind.value for kind in ClassifierKind],
            default=ClassifierKind.LOGISTIC.value,
        )
        parser.add_argument("--learning-rate", type=float, default=0.1)
        parser.add_argument("--epochs", type=int, default=50)
        parser.add_argument("--batch-size", type=int, default=32)
        parser.add_argument("--l2", type=float, default=0.0)
        parser.add_argument("--hidden", type=int, default=16)
        parser.add_argument("--seed", type=int, default=0)
        parser.add_argument("--out", required=True, help="Output classifier JSON")

    def handle(self, *args, **options):
        cfg = TrainConfig(
            learning_rate=options["learning_rate"],
            epochs=options["epochs"],
            batch_size=options["batch_size"],
            seed=options["seed"],
            l2=options["l2"],
            hidden=options["hidden"],
        )
        model = train(read_dataset_csv(options["data"]), cfg, options["kind"])
        save_classifier(model, options["out"])
        self.success(
            f"Saved {model.kind.value} classifier to {options['out']} "
            f"(training accuracy {model.train_accuracy:.4f})"
        )
