"""Bernoulli chance-constrained max-samples solver."""

from __future__ import annotations

from typing import Tuple

import numpy as np

from maxsamples.numkit import gumbel, smooth_indicator_grad
from maxsamples.problem import (
    PerturbProblem,
    confidence_violation_grad,
    confidence_violations,
    deviations,
)
from maxsamples.solvers.base import BaseSolver, HyperParams, SolverState
from maxsamples.solvers.relax import (
    bernoulli_relax,
    bernoulli_relax_grad,
    chance_prob_estimate,
    chance_terms,
)


def bcms_lagrangian(
    prob: PerturbProblem,
    Xhat: np.ndarray,
    Pi: np.ndarray,
    lam: np.ndarray,
    mu: np.ndarray,
    G1: np.ndarray,
    G2: np.ndarray,
    hp: HyperParams,
) -> Tuple[float, np.ndarray, np.ndarray]:
    """Sampled Lagrangian and its gradients in ``Pi`` and ``Xhat``.

    ``G1`` and ``G2`` are N x |S| Gumbel draws. The value is
    ``sum_j pi_j (1 - mu_j hbar_j) + mean_n sum_i lam_i P_n^i
    - (1 - epsilon) sum_i lam_i``.
    """
    Xhat = np.asarray(Xhat, dtype=float)
    Pi = np.asarray(Pi, dtype=float)
    V = bernoulli_relax(Pi, G1, G2, hp.omega)
    n_draws = V.shape[0]

    violation, h_grad = confidence_violation_grad(prob, Xhat)
    residual, P = chance_terms(prob, Xhat, V, hp.indicator)
    weight = 1.0 - mu * violation
    value = float(Pi @ weight + (P @ lam).mean() - (1.0 - hp.epsilon) * lam.sum())

    # dL/d residual_ni
    upstream = smooth_indicator_grad(residual, hp.indicator) * lam / n_draws
    A = deviations(prob, Xhat)
    grad_v = upstream @ A.T
    grad_pi = weight + (grad_v * bernoulli_relax_grad(V, Pi, hp.omega)).sum(axis=0)

    diff = Xhat - prob.X
    grad_x = 2.0 * diff * (V.T @ upstream) - (Pi * mu)[:, None] * h_grad
    return value, grad_pi, grad_x * prob.mask


class BernoulliChanceSolver(BaseSolver):
    """Independent selection probabilities ``Pi`` in [0, 1] per sample.

    ``Pi`` restarts from ``pi0`` every outer iteration. The inner loop first
    ascends in X with ``Pi`` fixed, then in ``Pi`` with X fixed.
    """

    name = "bcms"

    def initial_selection(self) -> np.ndarray:
        return np.full(self.prob.n_samples, self.hp.pi0)

    def draws(self) -> Tuple[np.ndarray, np.ndarray]:
        shape = (self.hp.num_samples, self.prob.n_samples)
        return gumbel(self.rng, shape), gumbel(self.rng, shape)

    def run_inner(self, state: SolverState) -> None:
        hp = self.hp
        state.selection = self.initial_selection()
        for k in range(2 * hp.inner_iters):
            state.inner = k
            G1, G2 = self.draws()
            value, grad_pi, grad_x = bcms_lagrangian(
                self.prob,
                state.xhat,
                state.selection,
                state.lam,
                state.mu,
                G1,
                G2,
                hp,
            )
            state.lagrangian = self.guard(state, value)
            # X ascent with Pi held, then Pi ascent with X held
            if k < hp.inner_iters:
                self.step_xhat(state, grad_x)
            else:
                state.selection = np.clip(
                    state.selection + hp.alpha * grad_pi, 0.0, 1.0
                )

    def multiplier_gradients(self, state: SolverState) -> Tuple[np.ndarray, np.ndarray]:
        G1, G2 = self.draws()
        V = bernoulli_relax(state.selection, G1, G2, self.hp.omega)
        estimate = chance_prob_estimate(self.prob, state.xhat, V, self.hp.indicator)
        violation = confidence_violations(self.prob, state.xhat)
        grad_lam = estimate - (1.0 - self.hp.epsilon)
        grad_mu = -state.selection * violation
        return grad_lam, grad_mu
