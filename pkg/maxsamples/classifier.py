"""Differentiable classifiers with analytic input gradients.

Two closed kinds are supported: multinomial logistic regression and a
one-hidden-layer tanh network. Both end in a softmax, so ``predict_proba``
is always a point on the simplex. New kinds are added by extending
:class:`ClassifierKind` together with ``_forward`` and ``_backward_input``.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Dict, Optional, Tuple, Union

import numpy as np

from maxsamples.exceptions import ConfigurationError, DataError, DimensionError
from maxsamples.numkit import Rng, softmax

logger = logging.getLogger(__name__)


class ClassifierKind(str, Enum):
    LOGISTIC = "multinomial-logistic"
    MLP = "one-hidden-layer-tanh"


@dataclass(frozen=True, eq=False)
class Dataset:
    """Feature matrix ``X`` (n x p) with integer labels ``y``."""

    X: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        X = np.asarray(self.X, dtype=float)
        y = np.asarray(self.y, dtype=int)
        if X.ndim != 2 or y.ndim != 1 or X.shape[0] != y.shape[0]:
            raise DimensionError(
                f"dataset shapes do not match: X {X.shape}, y {y.shape}"
            )
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y)

    @property
    def n_classes(self) -> int:
        return int(self.y.max()) + 1 if self.y.size else 0

    def subset(self, indices: np.ndarray) -> "Dataset":
        return Dataset(self.X[indices], self.y[indices])


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 0.1
    epochs: int = 50
    batch_size: int = 32
    seed: int = 0
    l2: float = 0.0
    hidden: int = 16

    def __post_init__(self):
        if not self.learning_rate > 0:
            raise ConfigurationError("learning_rate must be positive")
        if self.epochs < 1:
            raise ConfigurationError("epochs must be at least 1")
        if self.batch_size < 1:
            raise ConfigurationError("batch_size must be at least 1")
        if self.l2 < 0:
            raise ConfigurationError("l2 must be non-negative")
        if self.hidden < 1:
            raise ConfigurationError("hidden must be at least 1")


@dataclass(frozen=True, eq=False)
class Classifier:
    """Immutable score function ``f: R^p -> simplex(k)``.

    ``weights`` holds ``W`` (p x k) and ``b`` for the logistic kind, and
    ``W1`` (p x h), ``b1``, ``W2`` (h x k), ``b2`` for the tanh network.
    """

    kind: ClassifierKind
    weights: Dict[str, np.ndarray]
    seed: int = 0
    train_accuracy: Optional[float] = None
    dims: Tuple[int, int, int] = field(init=False)

    def __post_init__(self):
        kind = ClassifierKind(self.kind)
        frozen = {}
        for name, value in self.weights.items():
            array = np.array(value, dtype=float)
            array.setflags(write=False)
            frozen[name] = array
        object.__setattr__(self, "kind", kind)
        object.__setattr__(self, "weights", frozen)

        if kind is ClassifierKind.LOGISTIC:
            W, b = frozen["W"], frozen["b"]
            if W.ndim != 2 or b.shape != (W.shape[1],):
                raise DimensionError("logistic weights must be W (p x k), b (k)")
            dims = (W.shape[0], W.shape[1], 0)
        else:
            W1, b1, W2, b2 = (frozen[k] for k in ("W1", "b1", "W2", "b2"))
            p, h = W1.shape
            if b1.shape != (h,) or W2.shape[0] != h or b2.shape != (W2.shape[1],):
                raise DimensionError("network weight blocks do not line up")
            dims = (p, W2.shape[1], h)
        object.__setattr__(self, "dims", dims)

    @property
    def n_features(self) -> int:
        return self.dims[0]

    @property
    def n_classes(self) -> int:
        return self.dims[1]

    def _as_batch(self, x: np.ndarray) -> Tuple[np.ndarray, bool]:
        x = np.asarray(x, dtype=float)
        single = x.ndim == 1
        X = x[None, :] if single else x
        if X.ndim != 2 or X.shape[1] != self.n_features:
            raise DimensionError(
                f"expected {self.n_features} features, got shape {x.shape}"
            )
        return X, single

    def _forward(self, X: np.ndarray) -> Tuple[np.ndarray, Optional[np.ndarray]]:
        w = self.weights
        if self.kind is ClassifierKind.LOGISTIC:
            return X @ w["W"] + w["b"], None
        hidden = np.tanh(X @ w["W1"] + w["b1"])
        return hidden @ w["W2"] + w["b2"], hidden

    def _backward_input(
        self, grad_logits: np.ndarray, hidden: Optional[np.ndarray]
    ) -> np.ndarray:
        w = self.weights
        if self.kind is ClassifierKind.LOGISTIC:
            return grad_logits @ w["W"].T
        grad_hidden = grad_logits @ w["W2"].T
        return (grad_hidden * (1.0 - hidden**2)) @ w["W1"].T

    def logits(self, x: np.ndarray) -> np.ndarray:
        X, single = self._as_batch(x)
        z, _ = self._forward(X)
        return z[0] if single else z

    def predict_proba(self, x: np.ndarray) -> np.ndarray:
        X, single = self._as_batch(x)
        z, _ = self._forward(X)
        proba = softmax(z, axis=1)
        return proba[0] if single else proba

    def predict(self, x: np.ndarray) -> np.ndarray:
        return np.argmax(self.predict_proba(x), axis=-1)

    def input_grad(self, x: np.ndarray, w: np.ndarray) -> np.ndarray:
        """Gradient of ``sum_u w_u f(x)_u`` with respect to ``x``.

        ``x`` may be one sample with ``w`` of length k, or an n x p batch
        with ``w`` either length k (shared) or n x k (per row).
        """
        X, single = self._as_batch(x)
        w = np.asarray(w, dtype=float)
        if w.shape[-1] != self.n_classes or w.ndim > 2:
            raise DimensionError(
                f"class weights must have {self.n_classes} entries, got {w.shape}"
            )
        if w.ndim == 2 and w.shape[0] != X.shape[0]:
            raise DimensionError("one row of class weights per sample required")
        W = np.broadcast_to(w, (X.shape[0], self.n_classes))

        z, hidden = self._forward(X)
        proba = softmax(z, axis=1)
        # d f_u / d z_v = f_u (delta_uv - f_v)
        grad_logits = proba * (W - np.sum(W * proba, axis=1, keepdims=True))
        grad = self._backward_input(grad_logits, hidden)
        return grad[0] if single else grad


def predict_proba(c: Classifier, x: np.ndarray) -> np.ndarray:
    return c.predict_proba(x)


def input_grad(c: Classifier, x: np.ndarray, w: np.ndarray) -> np.ndarray:
    return c.input_grad(x, w)


def accuracy(c: Classifier, X: np.ndarray, y: np.ndarray) -> float:
    return float(np.mean(c.predict(X) == np.asarray(y)))


def _floored(pred: np.ndarray, target: np.ndarray, floor: float) -> np.ndarray:
    if np.any((pred < floor) & (target > 0)):
        logger.warning(
            "maxsamples_%s",
            "probability_floor_applied",
            extra={"ms_event": "probability_floor_applied", "floor": floor},
        )
    return np.maximum(pred, floor)


def kl_divergence(
    target: np.ndarray, pred: np.ndarray, floor: Optional[float] = None
) -> Union[float, np.ndarray]:
    """``sum_u t_u ln(t_u / p_u)`` with ``0 ln 0 = 0``; rows for 2-D input."""
    if floor is None:
        from maxsamples.conf import maxsamples_config

        floor = maxsamples_config.probability_floor
    target = np.asarray(target, dtype=float)
    pred = np.asarray(pred, dtype=float)
    if target.shape != pred.shape:
        raise DimensionError(f"shape mismatch {target.shape} vs {pred.shape}")
    pred = _floored(pred, target, floor)
    positive = target > 0
    safe_target = np.where(positive, target, 1.0)
    terms = np.where(positive, target * np.log(safe_target / pred), 0.0)
    result = np.sum(terms, axis=-1)
    return float(result) if result.ndim == 0 else result


def kl_divergence_grad(
    target: np.ndarray, pred: np.ndarray, floor: Optional[float] = None
) -> np.ndarray:
    """Gradient of :func:`kl_divergence` with respect to ``pred``."""
    if floor is None:
        from maxsamples.conf import maxsamples_config

        floor = maxsamples_config.probability_floor
    target = np.asarray(target, dtype=float)
    pred = np.asarray(pred, dtype=float)
    return -target / np.maximum(pred, floor)


def _init_weights(kind: ClassifierKind, p: int, k: int, cfg: TrainConfig, rng: Rng):
    if kind is ClassifierKind.LOGISTIC:
        return {"W": np.zeros((p, k)), "b": np.zeros(k)}
    h = cfg.hidden
    return {
        "W1": rng.normal(1.0 / np.sqrt(p), (p, h)),
        "b1": np.zeros(h),
        "W2": rng.normal(1.0 / np.sqrt(h), (h, k)),
        "b2": np.zeros(k),
    }


def train(
    data: Dataset,
    cfg: TrainConfig = TrainConfig(),
    kind: Union[ClassifierKind, str] = ClassifierKind.LOGISTIC,
) -> Classifier:
    """Fit by mini-batch gradient descent on mean cross-entropy plus L2."""
    kind = ClassifierKind(kind)
    if np.unique(data.y).size < 2:
        raise DataError("training data must contain at least two classes")
    if np.any(data.y < 0):
        raise DataError("labels must be non-negative class indices")

    n, p = data.X.shape
    k = data.n_classes
    rng = Rng(cfg.seed)
    params = _init_weights(kind, p, k, cfg, rng)
    onehot = np.eye(k)[data.y]

    for _ in range(cfg.epochs):
        order = rng.permutation(n)
        for start in range(0, n, cfg.batch_size):
            idx = order[start : start + cfg.batch_size]
            Xb, Yb = data.X[idx], onehot[idx]
            if kind is ClassifierKind.LOGISTIC:
                proba = softmax(Xb @ params["W"] + params["b"], axis=1)
                g = (proba - Yb) / len(idx)
                grads = {"W": Xb.T @ g + cfg.l2 * params["W"], "b": g.sum(axis=0)}
            else:
                hidden = np.tanh(Xb @ params["W1"] + params["b1"])
                proba = softmax(hidden @ params["W2"] + params["b2"], axis=1)
                g = (proba - Yb) / len(idx)
                g_hidden = (g @ params["W2"].T) * (1.0 - hidden**2)
                grads = {
                    "W2": hidden.T @ g + cfg.l2 * params["W2"],
                    "b2": g.sum(axis=0),
                    "W1": Xb.T @ g_hidden + cfg.l2 * params["W1"],
                    "b1": g_hidden.sum(axis=0),
                }
            for name, grad in grads.items():
                params[name] = params[name] - cfg.learning_rate * grad

    model = Classifier(kind=kind, weights=params, seed=cfg.seed)
    acc = accuracy(model, data.X, data.y)
    logger.info("Trained %s classifier: training accuracy %.4f", kind.value, acc)
    return Classifier(kind=kind, weights=params, seed=cfg.seed, train_accuracy=acc)


def classifier_to_dict(c: Classifier) -> dict:
    p, k, h = c.dims
    return {
        "kind": c.kind.value,
        "dims": {"p": p, "k": k, "h": h},
        "weights": {
            name: {"shape": list(array.shape), "values": array.ravel().tolist()}
            for name, array in c.weights.items()
        },
        "seed": c.seed,
        "train_accuracy": c.train_accuracy,
    }


def classifier_from_dict(document: dict) -> Classifier:
    try:
        weights = {
            name: np.array(block["values"], dtype=float).reshape(block["shape"])
            for name, block in document["weights"].items()
        }
        model = Classifier(
            kind=ClassifierKind(document["kind"]),
            weights=weights,
            seed=int(document.get("seed", 0)),
            train_accuracy=document.get("train_accuracy"),
        )
    except (KeyError, ValueError, TypeError) as e:
        raise DataError(f"malformed classifier document: {e}") from e
    dims = document.get("dims")
    if dims and (dims["p"], dims["k"], dims["h"]) != model.dims:
        raise DataError(f"classifier dims {dims} do not match weights {model.dims}")
    return model


def save_classifier(c: Classifier, path: Union[str, Path]) -> None:
    # json writes floats with repr, the shortest exact round-trip form
    Path(path).write_text(json.dumps(classifier_to_dict(c), indent=2) + "\n")


def load_classifier(path: Union[str, Path]) -> Classifier:
    try:
        document = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as e:
        raise DataError(f"cannot read classifier file {path}: {e}") from e
    return classifier_from_dict(document)
