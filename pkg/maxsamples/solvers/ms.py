"""Max-samples solver over binary selections."""

from __future__ import annotations

from typing import Tuple

import numpy as np

from maxsamples.problem import (
    PerturbProblem,
    confidence_violation_grad,
    confidence_violations,
    deviations,
)
from maxsamples.solvers.base import BaseSolver, SolverState


def ms_reduced_costs(
    prob: PerturbProblem, Xhat: np.ndarray, lam: np.ndarray, mu: np.ndarray
) -> np.ndarray:
    """``c_j = 1 - sum_i lam_i a_ij - mu_j hbar_j``."""
    violation = confidence_violations(prob, Xhat)
    return 1.0 - deviations(prob, Xhat) @ lam - mu * violation


def ms_select(c: np.ndarray) -> np.ndarray:
    """Maximiser of ``sum_j c_j z_j`` over binary z; ties select."""
    return (np.asarray(c, dtype=float) >= 0).astype(float)


def ms_lagrangian(
    prob: PerturbProblem,
    Xhat: np.ndarray,
    z: np.ndarray,
    lam: np.ndarray,
    mu: np.ndarray,
) -> Tuple[float, np.ndarray]:
    """Value ``sum_j c_j z_j + sum_i lam_i B_i`` and its gradient in ``Xhat``."""
    violation, h_grad = confidence_violation_grad(prob, Xhat)
    diff = np.asarray(Xhat, dtype=float) - prob.X
    c = 1.0 - (diff**2) @ lam - mu * violation
    value = float(z @ c + lam @ prob.budgets)
    grad = -z[:, None] * (2.0 * diff * lam + mu[:, None] * h_grad)
    return value, grad * prob.mask


class MaxSamplesSolver(BaseSolver):
    """Alternates X ascent with the closed-form z update.

    Every outer iteration starts from ``z = 1``. Each round runs the full X
    ascent with ``z`` held fixed and then drops the samples whose reduced
    cost turned negative; rounds stop once ``z`` is empty or settles.
    """

    name = "ms"

    def initial_selection(self) -> np.ndarray:
        return np.ones(self.prob.n_samples)

    def run_inner(self, state: SolverState) -> None:
        state.selection = np.ones(self.prob.n_samples)
        state.inner = 0
        # rows with z_j = 0 stay put, so z only shrinks and the rounds end
        for _ in range(self.prob.n_samples + 1):
            if not state.selection.any():
                break
            for _ in range(self.hp.inner_iters):
                value, grad = ms_lagrangian(
                    self.prob, state.xhat, state.selection, state.lam, state.mu
                )
                state.lagrangian = self.guard(state, value)
                self.step_xhat(state, grad)
                state.inner += 1
            selection = ms_select(
                ms_reduced_costs(self.prob, state.xhat, state.lam, state.mu)
            )
            selection = selection * state.selection
            changed = not np.array_equal(selection, state.selection)
            state.selection = selection
            if not changed:
                break
        c = ms_reduced_costs(self.prob, state.xhat, state.lam, state.mu)
        value = float(state.selection @ c + state.lam @ self.prob.budgets)
        state.lagrangian = self.guard(state, value)

    def multiplier_gradients(self, state: SolverState) -> Tuple[np.ndarray, np.ndarray]:
        z = state.selection
        violation = confidence_violations(self.prob, state.xhat)
        grad_lam = self.prob.budgets - z @ deviations(self.prob, state.xhat)
        grad_mu = -z * violation
        return grad_lam, grad_mu
