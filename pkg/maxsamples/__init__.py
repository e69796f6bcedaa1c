"""
maxsamples - perturb as many samples as possible into their desired class
under per-feature budgets.
"""

from maxsamples.__version__ import __version__, __version_info__

__all__ = [
    "__version__",
    "__version_info__",
    "Classifier",
    "HyperParams",
    "PerturbProblem",
    "finalize",
    "solve_bcms",
    "solve_ccms",
    "solve_kl",
    "solve_ms",
]

_LAZY = {
    "Classifier": "maxsamples.classifier",
    "HyperParams": "maxsamples.solvers",
    "PerturbProblem": "maxsamples.problem",
    "finalize": "maxsamples.repair",
    "solve_bcms": "maxsamples.solvers",
    "solve_ccms": "maxsamples.solvers",
    "solve_kl": "maxsamples.solvers",
    "solve_ms": "maxsamples.solvers",
}


# Lazy imports keep ``import maxsamples`` free of Django settings access
def __getattr__(name):
    """Lazy import of the public API."""
    if name in _LAZY:
        from importlib import import_module

        return getattr(import_module(_LAZY[name]), name)
    raise AttributeError(f"module {__name__!r} has no attribute {name!r}")
