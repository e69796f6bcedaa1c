"""Synthetic labelled data."""

from __future__ import annotations

import logging
from typing import Tuple

import numpy as np

from maxsamples.classifier import Dataset
from maxsamples.exceptions import ConfigurationError
from maxsamples.numkit import Rng

logger = logging.getLogger(__name__)


def blob_means(p: int, k: int, separation: float, rng: Rng) -> np.ndarray:
    """k x p class means, every pair ``separation`` apart when ``p >= k``.

    The means are scaled columns of a random orthonormal basis. With fewer
    features than classes the means sit on a random line instead, neighbours
    ``separation`` apart.
    """
    if p >= k:
        Q, _ = np.linalg.qr(rng.normal(1.0, (p, k)))
        return (separation / np.sqrt(2.0)) * Q.T
    direction = rng.normal(1.0, p)
    direction /= np.linalg.norm(direction)
    offsets = separation * (np.arange(k) - (k - 1) / 2.0)
    return offsets[:, None] * direction[None, :]


def generate_synthetic(
    n: int, p: int, k: int, separation: float, seed: int
) -> Dataset:
    """k unit-covariance Gaussian blobs with balanced, shuffled labels."""
    if not n >= k >= 2 or p < 1:
        raise ConfigurationError(
            f"need n >= k >= 2 and p >= 1, got n={n}, k={k}, p={p}"
        )
    if separation < 0:
        raise ConfigurationError("separation must be non-negative")
    rng = Rng(seed)
    means = blob_means(p, k, separation, rng)
    y = np.arange(n) % k
    y = y[rng.permutation(n)]
    X = means[y] + rng.normal(1.0, (n, p))
    logger.debug("generated %d samples, %d features, %d classes", n, p, k)
    return Dataset(X, y)


def train_test_split(
    data: Dataset, test_fraction: float, seed: int
) -> Tuple[Dataset, Dataset]:
    """Deterministic shuffled split; the test part keeps its shuffled order."""
    if not 0 < test_fraction < 1:
        raise ConfigurationError("test_fraction must lie in (0, 1)")
    n = data.X.shape[0]
    order = Rng.derive(seed, 1).permutation(n)
    n_test = max(1, int(round(n * test_fraction)))
    return data.subset(np.sort(order[n_test:])), data.subset(np.sort(order[:n_test]))
