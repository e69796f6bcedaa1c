"""Solver registry and the ``solve_*`` entry points."""

from typing import Dict, Optional, Type

import numpy as np

from maxsamples.exceptions import ConfigurationError
from maxsamples.problem import PerturbProblem
from maxsamples.solvers.base import (
    DEFAULT_ITERATIONS,
    BaseSolver,
    HyperParams,
    SolverState,
    TraceRow,
)
from maxsamples.solvers.bcms import BernoulliChanceSolver
from maxsamples.solvers.ccms import CategoricalChanceSolver
from maxsamples.solvers.kl import KLSolver
from maxsamples.solvers.ms import MaxSamplesSolver

SOLVERS: Dict[str, Type[BaseSolver]] = {
    "ms": MaxSamplesSolver,
    "bcms": BernoulliChanceSolver,
    "ccms": CategoricalChanceSolver,
    "kl": KLSolver,
}


def get_solver(name: str) -> Type[BaseSolver]:
    try:
        return SOLVERS[name.lower()]
    except KeyError:
        raise ConfigurationError(
            f"unknown solver {name!r}; choose from {', '.join(SOLVERS)}"
        ) from None


def solve_ms(
    prob: PerturbProblem,
    hp: Optional[HyperParams] = None,
    warm_start: Optional[np.ndarray] = None,
) -> SolverState:
    return MaxSamplesSolver(prob, hp, warm_start).solve()


def solve_bcms(
    prob: PerturbProblem,
    hp: Optional[HyperParams] = None,
    warm_start: Optional[np.ndarray] = None,
) -> SolverState:
    return BernoulliChanceSolver(prob, hp, warm_start).solve()


def solve_ccms(
    prob: PerturbProblem,
    hp: Optional[HyperParams] = None,
    warm_start: Optional[np.ndarray] = None,
) -> SolverState:
    return CategoricalChanceSolver(prob, hp, warm_start).solve()


def solve_kl(
    prob: PerturbProblem,
    hp: Optional[HyperParams] = None,
    warm_start: Optional[np.ndarray] = None,
    targets: Optional[np.ndarray] = None,
) -> SolverState:
    return KLSolver(prob, hp, warm_start, targets).solve()


__all__ = [
    "DEFAULT_ITERATIONS",
    "SOLVERS",
    "BaseSolver",
    "HyperParams",
    "SolverState",
    "TraceRow",
    "get_solver",
    "solve_bcms",
    "solve_ccms",
    "solve_kl",
    "solve_ms",
]
