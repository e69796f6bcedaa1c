"""Shared behaviour of the maxsamples management commands."""

from typing import Any, Dict

from django.core.management.base import BaseCommand, CommandError

from maxsamples.exceptions import MaxSamplesError, NumericalError, SolverDivergedError
from maxsamples.solvers import HyperParams

# exit codes
CONFIG_ERROR = 2
SOLVER_ABORT = 3


class MaxSamplesCommand(BaseCommand):
    """Maps library errors to exit codes and optionally adds ``--hp.<name>``.

    Subclasses implement ``add_command_arguments`` instead of
    ``add_arguments``.
    """

    requires_system_checks: Any = []
    hyperparam_flags = False

    def add_arguments(self, parser):
        if self.hyperparam_flags:
            group = parser.add_argument_group("hyperparameters")
            for name in HyperParams.field_types():
                group.add_argument(
                    f"--hp.{name}",
                    dest=f"hp_{name}",
                    metavar="VALUE",
                    help=f"override HyperParams.{name}",
                )
        self.add_command_arguments(parser)

    def add_command_arguments(self, parser):
        pass

    def hyperparam_overrides(self, options: Dict[str, Any]) -> Dict[str, Any]:
        return {
            name: options[f"hp_{name}"]
            for name in HyperParams.field_types()
            if options.get(f"hp_{name}") is not None
        }

    def execute(self, *args, **options):
        try:
            return super().execute(*args, **options)
        except (SolverDivergedError, NumericalError) as e:
            raise CommandError(f"solver aborted: {e}", returncode=SOLVER_ABORT) from e
        except MaxSamplesError as e:
            raise CommandError(str(e), returncode=CONFIG_ERROR) from e

    def success(self, message: str) -> None:
        self.stdout.write(self.style.SUCCESS(message))
