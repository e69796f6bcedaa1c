"""KL-divergence baseline: perturb every sample towards its target class."""

from __future__ import annotations

from typing import Optional, Tuple

import numpy as np

from maxsamples.classifier import kl_divergence, kl_divergence_grad
from maxsamples.exceptions import DimensionError
from maxsamples.problem import (
    PerturbProblem,
    confidence_violation_grad,
    confidence_violations,
    deviations,
)
from maxsamples.solvers.base import BaseSolver, HyperParams, SolverState


def kl_lagrangian(
    prob: PerturbProblem,
    Xhat: np.ndarray,
    lam: np.ndarray,
    mu: np.ndarray,
    distance_weight: float,
    targets: Optional[np.ndarray] = None,
    floor: Optional[float] = None,
) -> Tuple[float, np.ndarray]:
    """Value and ``Xhat`` gradient of the KL Lagrangian with every sample selected.

    ``targets`` defaults to the one-hot desired labels; any rows on the
    probability simplex are accepted.
    """
    Xhat = np.asarray(Xhat, dtype=float)
    T = prob.targets if targets is None else np.asarray(targets, dtype=float)
    classifier = prob.classifier
    proba = classifier.predict_proba(Xhat)

    violation, h_grad = confidence_violation_grad(prob, Xhat)
    diff = Xhat - prob.X
    A = diff**2
    value = float(
        np.sum(kl_divergence(T, proba, floor))
        + distance_weight * A.sum()
        + lam @ (A.sum(axis=0) - prob.budgets)
        + mu @ violation
    )
    grad = (
        classifier.input_grad(Xhat, kl_divergence_grad(T, proba, floor))
        + 2.0 * distance_weight * diff
        + 2.0 * diff * lam
        + mu[:, None] * h_grad
    )
    return value, grad * prob.mask


class KLSolver(BaseSolver):
    """Descent on ``Xhat`` with projected multiplier ascent."""

    name = "kl"
    multiplier_ascent = True

    def __init__(
        self,
        prob: PerturbProblem,
        hp: Optional[HyperParams] = None,
        warm_start: Optional[np.ndarray] = None,
        targets: Optional[np.ndarray] = None,
    ):
        super().__init__(prob, hp, warm_start)
        if targets is not None:
            targets = np.asarray(targets, dtype=float)
            expected = (prob.n_samples, prob.classifier.n_classes)
            if targets.shape != expected:
                raise DimensionError(f"targets must have shape {expected}")
        self.targets = targets

    def initial_selection(self) -> np.ndarray:
        return np.ones(self.prob.n_samples)

    def lagrangian(self, state: SolverState) -> Tuple[float, np.ndarray]:
        return kl_lagrangian(
            self.prob,
            state.xhat,
            state.lam,
            state.mu,
            self.hp.distance_weight,
            self.targets,
        )

    def run_inner(self, state: SolverState) -> None:
        for k in range(self.hp.inner_iters):
            state.inner = k
            value, grad = self.lagrangian(state)
            state.lagrangian = self.guard(state, value)
            self.step_xhat(state, -grad)
        value, _ = self.lagrangian(state)
        state.lagrangian = self.guard(state, value)

    def multiplier_gradients(self, state: SolverState) -> Tuple[np.ndarray, np.ndarray]:
        A = deviations(self.prob, state.xhat)
        grad_lam = A.sum(axis=0) - self.prob.budgets
        grad_mu = confidence_violations(self.prob, state.xhat)
        return grad_lam, grad_mu
