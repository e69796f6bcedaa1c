"""Console entry point: ``maxsamples <command> [options]``.

Each command is a Django management command of the ``maxsamples`` app; the
hyphenated command names map onto the module names.
"""

import os
import sys
from typing import List, Optional

COMMANDS = {
    "gen-data": "gen_data",
    "train": "train",
    "make-problem": "make_problem",
    "calibrate": "calibrate",
    "perturb": "perturb",
    "sweep-budget": "sweep_budget",
    "sweep-scale": "sweep_scale",
    "report": "report",
}


def usage() -> str:
    lines = ["usage: maxsamples <command> [options]", "", "commands:"]
    lines += [f"  {name}" for name in COMMANDS]
    lines.append("")
    lines.append("Run 'maxsamples <command> --help' for the options of a command.")
    return "\n".join(lines)


def main(argv: Optional[List[str]] = None) -> int:
    argv = list(sys.argv if argv is None else argv)
    os.environ.setdefault("DJANGO_SETTINGS_MODULE", "maxsamples.settings")

    import django
    from django.core.management import load_command_class

    django.setup()

    if len(argv) < 2 or argv[1] in ("-h", "--help", "help"):
        sys.stdout.write(usage() + "\n")
        return 0
    name = argv[1]
    module = COMMANDS.get(name, name if name in COMMANDS.values() else None)
    if module is None:
        sys.stderr.write(f"Unknown command {name!r}\n\n{usage()}\n")
        return 2

    # exits with the command's return code on CommandError
    load_command_class("maxsamples", module).run_from_argv(
        [argv[0], module] + argv[2:]
    )
    return 0


if __name__ == "__main__":
    sys.exit(main())
