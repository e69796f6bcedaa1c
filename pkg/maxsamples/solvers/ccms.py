"""Categorical chance-constrained max-samples solver."""

from __future__ import annotations

from typing import Iterable, Tuple

import numpy as np

from maxsamples import signals
from maxsamples.exceptions import ConfigurationError
from maxsamples.numkit import gumbel, smooth_indicator, smooth_indicator_grad
from maxsamples.problem import (
    PerturbProblem,
    confidence_violation_grad,
    confidence_violations,
    deviations,
)
from maxsamples.solvers.base import BaseSolver, HyperParams, SolverState
from maxsamples.solvers.relax import PI_FLOOR, categorical_softmax


def ccms_lagrangian(
    prob: PerturbProblem,
    Xhat: np.ndarray,
    Pi: np.ndarray,
    lam: np.ndarray,
    mu: np.ndarray,
    G: Iterable[np.ndarray],
    hp: HyperParams,
) -> Tuple[float, np.ndarray, np.ndarray]:
    """Sampled Lagrangian and its gradients in ``Pi`` and ``Xhat``.

    ``G`` yields one |S| x K Gumbel matrix per Monte Carlo replicate (an
    N x |S| x K array works). Replicates are reduced in order, so only one
    matrix is held at a time.
    """
    Xhat = np.asarray(Xhat, dtype=float)
    Pi = np.asarray(Pi, dtype=float)
    violation, h_grad = confidence_violation_grad(prob, Xhat)
    A = deviations(prob, Xhat)
    weight = 1.0 - mu * violation
    params = hp.indicator

    total = 0.0
    grad_log_pi = np.zeros_like(Pi)
    v_sum = np.zeros_like(Pi)
    x_acc = np.zeros_like(A)
    n_draws = 0
    for Gn in G:
        n_draws += 1
        Z = categorical_softmax(Pi, Gn, hp.omega)
        raw = Z.sum(axis=1)
        v = np.minimum(1.0, raw)
        residual = v @ A - prob.budgets
        total += float(v @ weight + lam @ smooth_indicator(residual, params))

        upstream = smooth_indicator_grad(residual, params) * lam
        grad_v = np.where(raw < 1.0, weight + A @ upstream, 0.0)
        # softmax Jacobian, one column per draw
        per_draw = grad_v @ Z
        grad_log_pi += (Z * (grad_v[:, None] - per_draw[None, :])).sum(axis=1)
        v_sum += v
        x_acc += np.outer(v, upstream)

    value = total / n_draws - (1.0 - hp.epsilon) * float(lam.sum())
    safe_pi = np.maximum(Pi, PI_FLOOR)
    grad_pi = grad_log_pi / (hp.omega * n_draws * safe_pi)
    grad_pi = np.where(Pi > PI_FLOOR, grad_pi, 0.0)
    mean_v = v_sum / n_draws
    diff = Xhat - prob.X
    grad_x = 2.0 * diff * x_acc / n_draws - (mean_v * mu)[:, None] * h_grad
    return value, grad_pi, grad_x * prob.mask


def project_simplex(Pi: np.ndarray) -> Tuple[np.ndarray, bool]:
    """Clip at zero and renormalise; an all-zero vector resets to uniform."""
    Pi = np.maximum(0.0, Pi)
    total = Pi.sum()
    if total == 0.0:
        return np.full(Pi.size, 1.0 / Pi.size), True
    return Pi / total, False


class CategoricalChanceSolver(BaseSolver):
    """Selection probabilities ``Pi`` on the simplex, K categorical draws.

    Same phases as the Bernoulli solver, restarting from the uniform ``Pi``.
    """

    name = "ccms"

    def __init__(self, prob, hp=None, warm_start=None):
        super().__init__(prob, hp, warm_start)
        n = prob.n_samples
        self.num_draws = self.hp.num_draws or -(-n // 2)
        if not 1 <= self.num_draws <= max(n, 1):
            raise ConfigurationError(
                f"num_draws must lie in [1, {n}], got {self.num_draws}"
            )

    def initial_selection(self) -> np.ndarray:
        n = self.prob.n_samples
        return np.full(n, 1.0 / n)

    def draws(self):
        shape = (self.prob.n_samples, self.num_draws)
        return (gumbel(self.rng, shape) for _ in range(self.hp.num_samples))

    def run_inner(self, state: SolverState) -> None:
        hp = self.hp
        state.selection = self.initial_selection()
        for k in range(2 * hp.inner_iters):
            state.inner = k
            value, grad_pi, grad_x = ccms_lagrangian(
                self.prob,
                state.xhat,
                state.selection,
                state.lam,
                state.mu,
                self.draws(),
                hp,
            )
            state.lagrangian = self.guard(state, value)
            if k < hp.inner_iters:
                self.step_xhat(state, grad_x)
                continue
            state.selection, reset = project_simplex(
                state.selection + hp.alpha * grad_pi
            )
            if reset:
                signals.log_event(
                    "simplex_reset",
                    solver=self.name,
                    outer_iter=state.outer,
                    inner_iter=k,
                )

    def multiplier_gradients(self, state: SolverState) -> Tuple[np.ndarray, np.ndarray]:
        A = deviations(self.prob, state.xhat)
        params = self.hp.indicator
        estimate = np.zeros(self.prob.n_features)
        v_sum = np.zeros(self.prob.n_samples)
        for Gn in self.draws():
            Z = categorical_softmax(state.selection, Gn, self.hp.omega)
            v = np.minimum(1.0, Z.sum(axis=1))
            estimate += smooth_indicator(v @ A - self.prob.budgets, params)
            v_sum += v
        estimate /= self.hp.num_samples
        violation = confidence_violations(self.prob, state.xhat)
        grad_lam = estimate - (1.0 - self.hp.epsilon)
        grad_mu = -(v_sum / self.hp.num_samples) * violation
        return grad_lam, grad_mu
