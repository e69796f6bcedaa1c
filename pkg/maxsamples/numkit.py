"""Deterministic numerical primitives.

Random numbers come from numpy's PCG64 bit generator, whose output stream is
fixed across platforms for a given seed. Uniform draws are 53-bit doubles
clamped to ``[2**-53, 1 - 2**-53]`` so that Gumbel draws stay finite.

Parallel callers never share an :class:`Rng`; they derive one per worker with
:meth:`Rng.derive`, which feeds ``SeedSequence(entropy=seed,
spawn_key=keys)`` into PCG64.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional, Sequence, Tuple, Union

import numpy as np

from maxsamples.exceptions import ConfigurationError, NumericalError

ArrayLike = Union[float, np.ndarray]

UNIFORM_LOW = 2.0**-53
UNIFORM_HIGH = 1.0 - 2.0**-53


class Rng:
    """Seeded generator for uniforms, normals and Gumbel draws."""

    def __init__(self, seed: int, spawn_key: Sequence[int] = ()):
        self.seed = int(seed)
        self.spawn_key = tuple(int(k) for k in spawn_key)
        sequence = np.random.SeedSequence(entropy=self.seed, spawn_key=self.spawn_key)
        self._generator = np.random.Generator(np.random.PCG64(sequence))

    @classmethod
    def derive(cls, seed: int, *keys: int) -> "Rng":
        """Independent generator for ``(seed, *keys)``, e.g. a worker index."""
        return cls(seed, spawn_key=keys)

    def uniform(self, size: Optional[Union[int, Tuple[int, ...]]] = None) -> ArrayLike:
        """Uniform draws strictly inside (0, 1)."""
        u = self._generator.random(size)
        return np.clip(u, UNIFORM_LOW, UNIFORM_HIGH)

    def normal(
        self, scale: float = 1.0, size: Optional[Union[int, Tuple[int, ...]]] = None
    ) -> ArrayLike:
        return self._generator.normal(0.0, scale, size)

    def permutation(self, n: int) -> np.ndarray:
        return self._generator.permutation(n)

    @property
    def generator(self) -> np.random.Generator:
        return self._generator


@dataclass(frozen=True)
class SmoothIndicatorParams:
    """Sharpness ``kappa`` and shift ``tau`` of the smooth indicator."""

    kappa: float = 2.0
    tau: float = 0.0

    def __post_init__(self):
        if not self.kappa > 0:
            raise ConfigurationError(f"kappa must be positive, got {self.kappa}")
        if self.tau == 1.0:
            raise ConfigurationError("tau must differ from 1")

    @property
    def slope(self) -> float:
        return self.kappa / abs(1.0 - self.tau)


def gumbel_from_uniform(u: ArrayLike) -> ArrayLike:
    """Inverse Gumbel CDF, ``-ln(-ln(u))``, with u clamped into (0, 1)."""
    u = np.clip(np.asarray(u, dtype=float), UNIFORM_LOW, UNIFORM_HIGH)
    return -np.log(-np.log(u))


def gumbel_sample(rng: Rng) -> float:
    """One standard Gumbel draw."""
    return float(gumbel_from_uniform(rng.uniform()))


def gumbel(rng: Rng, shape: Union[int, Tuple[int, ...]]) -> np.ndarray:
    """Array of standard Gumbel draws."""
    return gumbel_from_uniform(rng.uniform(shape))


def sigmoid(x: ArrayLike) -> ArrayLike:
    # tanh form saturates cleanly to 0 and 1 without overflow warnings
    return 0.5 * (1.0 + np.tanh(0.5 * np.asarray(x, dtype=float)))


def softmax(v: np.ndarray, axis: int = -1) -> np.ndarray:
    """Softmax along ``axis`` with max-subtraction."""
    v = np.asarray(v, dtype=float)
    if not np.all(np.isfinite(v)):
        raise NumericalError("softmax received non-finite input")
    shifted = v - np.max(v, axis=axis, keepdims=True)
    e = np.exp(shifted)
    return e / np.sum(e, axis=axis, keepdims=True)


def smooth_indicator(x: ArrayLike, params: SmoothIndicatorParams) -> ArrayLike:
    """Decreasing sigmoid surrogate for ``1[x <= 0]``.

    Equals 0.5 at ``x = tau``, tends to 1 as ``x -> -inf`` and to 0 as
    ``x -> +inf``. The effective slope is ``kappa / |1 - tau|``.
    """
    x = np.asarray(x, dtype=float)
    return sigmoid(-params.slope * (x - params.tau))


def smooth_indicator_grad(x: ArrayLike, params: SmoothIndicatorParams) -> ArrayLike:
    s = smooth_indicator(x, params)
    return -params.slope * s * (1.0 - s)


def finite_diff_grad(
    fn: Callable[[np.ndarray], float], x: np.ndarray, h: float = 1e-6
) -> np.ndarray:
    """Central-difference gradient of a scalar function of an array."""
    if not h > 0:
        raise ConfigurationError(f"step h must be positive, got {h}")
    x = np.array(x, dtype=float)
    grad = np.zeros_like(x)
    flat = x.reshape(-1)
    out = grad.reshape(-1)
    for i in range(flat.size):
        original = flat[i]
        flat[i] = original + h
        f_plus = fn(x)
        flat[i] = original - h
        f_minus = fn(x)
        flat[i] = original
        out[i] = (f_plus - f_minus) / (2.0 * h)
    return grad
