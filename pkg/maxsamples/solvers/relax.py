"""Gumbel relaxations of Bernoulli and Categorical selections."""

from __future__ import annotations

from typing import Tuple, Union

import numpy as np

from maxsamples.numkit import SmoothIndicatorParams, sigmoid, smooth_indicator
from maxsamples.problem import PerturbProblem, deviations

PI_CLAMP = 1e-6
PI_FLOOR = 1e-12

ArrayLike = Union[float, np.ndarray]


def _clamp_pi(pi: ArrayLike) -> np.ndarray:
    return np.clip(np.asarray(pi, dtype=float), PI_CLAMP, 1.0 - PI_CLAMP)


def bernoulli_relax(
    pi: ArrayLike, g1: ArrayLike, g2: ArrayLike, omega: float
) -> ArrayLike:
    """Relaxed Bernoulli draw from the two-way Gumbel softmax.

    Evaluated as a sigmoid of the log-odds difference, which is the two-way
    softmax without forming the exponentials.
    """
    pi = _clamp_pi(pi)
    logit = (np.log(pi) + g1 - np.log1p(-pi) - g2) / omega
    v = sigmoid(logit)
    return float(v) if np.ndim(v) == 0 else v


def bernoulli_relax_grad(v: np.ndarray, pi: np.ndarray, omega: float) -> np.ndarray:
    """``dv/dpi`` given the relaxed values ``v``; zero where ``pi`` is clamped."""
    raw = np.asarray(pi, dtype=float)
    pi = _clamp_pi(raw)
    grad = v * (1.0 - v) / (omega * pi * (1.0 - pi))
    return np.where((raw >= PI_CLAMP) & (raw <= 1.0 - PI_CLAMP), grad, 0.0)


def categorical_softmax(Pi: np.ndarray, G: np.ndarray, omega: float) -> np.ndarray:
    """Per-draw relaxed one-hot vectors.

    ``G`` has the samples along its second-to-last axis and the K draws along
    the last one; the softmax runs over samples for every draw.
    """
    log_pi = np.log(np.maximum(np.asarray(Pi, dtype=float), PI_FLOOR))
    scores = (log_pi[:, None] + G) / omega
    scores = scores - scores.max(axis=-2, keepdims=True)
    e = np.exp(scores)
    return e / e.sum(axis=-2, keepdims=True)


def categorical_relax(Pi: np.ndarray, G: np.ndarray, omega: float) -> np.ndarray:
    """``min(1, sum over draws of softmax((ln Pi + G[:, k]) / omega))``."""
    return np.minimum(1.0, categorical_softmax(Pi, G, omega).sum(axis=-1))


def chance_terms(
    prob: PerturbProblem,
    Xhat: np.ndarray,
    V: np.ndarray,
    params: SmoothIndicatorParams,
) -> Tuple[np.ndarray, np.ndarray]:
    """Budget residuals ``x_n^i`` (N x p) and their smoothed indicators."""
    A = deviations(prob, Xhat)
    residual = np.atleast_2d(V) @ A - prob.budgets
    return residual, smooth_indicator(residual, params)


def chance_prob_estimate(
    prob: PerturbProblem,
    Xhat: np.ndarray,
    V: np.ndarray,
    params: SmoothIndicatorParams,
) -> np.ndarray:
    """Monte Carlo estimate of ``Pr(sum_j z_j a_ij - B_i <= 0)`` per feature.

    ``params`` may also be a :class:`~maxsamples.solvers.base.HyperParams`.
    """
    params = getattr(params, "indicator", params)
    _, P = chance_terms(prob, Xhat, V, params)
    return P.mean(axis=0)
