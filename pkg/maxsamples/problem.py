"""Problem instances, constraint evaluators and evaluation metrics.

A :class:`PerturbProblem` freezes the original samples ``X``, which features
may move, the per-feature budgets ``B``, the desired class of every sample
and the confidence margin ``delta``. Budgets are spent on squared
per-coordinate deviations ``a_ij = (xhat_ij - x_ij)**2``.
"""

from __future__ import annotations

import csv
import json
import logging
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np

from maxsamples.classifier import Classifier, Dataset, load_classifier
from maxsamples.exceptions import (
    DataError,
    DimensionError,
    FrozenFeatureError,
    ProblemError,
)

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class SequenceGroups:
    """Partition of sample indices into disjoint groups."""

    groups: Tuple[Tuple[int, ...], ...]

    def __post_init__(self):
        groups = tuple(tuple(int(j) for j in g) for g in self.groups)
        object.__setattr__(self, "groups", groups)
        if any(len(g) == 0 for g in groups):
            raise ProblemError("sequence groups must not be empty")
        flat = [j for g in groups for j in g]
        if len(flat) != len(set(flat)):
            raise ProblemError("sequence groups must be disjoint")

    @classmethod
    def single(cls, n: int) -> "SequenceGroups":
        return cls((tuple(range(n)),))

    @property
    def sizes(self) -> List[int]:
        return [len(g) for g in self.groups]

    @property
    def total(self) -> int:
        return sum(self.sizes)

    def validate_cover(self, n: int) -> None:
        if sorted(j for g in self.groups for j in g) != list(range(n)):
            raise ProblemError(f"sequence groups must cover samples 0..{n - 1}")


@dataclass(frozen=True, eq=False)
class PerturbProblem:
    """Frozen instance: samples, perturbable mask, budgets, desired classes."""

    X: np.ndarray
    mask: np.ndarray
    budgets: np.ndarray
    desired: np.ndarray
    delta: float
    classifier: Classifier
    groups: Optional[SequenceGroups] = None
    # cached predictions on X
    _original_proba: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        X = np.array(self.X, dtype=float)
        if X.ndim != 2:
            raise DimensionError(f"X must be a matrix, got shape {X.shape}")
        n, p = X.shape
        mask = np.array(self.mask, dtype=bool).reshape(-1)
        budgets = np.array(self.budgets, dtype=float).reshape(-1)
        desired = np.array(self.desired, dtype=int).reshape(-1)
        if mask.shape != (p,) or budgets.shape != (p,):
            raise DimensionError("mask and budgets need one entry per feature")
        if desired.shape != (n,):
            raise DimensionError("desired needs one class per sample")
        if p != self.classifier.n_features:
            raise DimensionError(
                f"classifier expects {self.classifier.n_features} features, X has {p}"
            )
        if np.any(budgets < 0) or np.any(np.isnan(budgets)):
            raise ProblemError("budgets must be non-negative")
        if not self.delta > 0:
            raise ProblemError(f"delta must be positive, got {self.delta}")
        if np.any((desired < 0) | (desired >= self.classifier.n_classes)):
            raise ProblemError("desired class index out of range")
        if self.groups is not None:
            self.groups.validate_cover(n)

        proba = self.classifier.predict_proba(X) if n else np.zeros((0, 1))
        if n:
            already = np.flatnonzero(np.argmax(proba, axis=1) == desired)
            if already.size:
                raise ProblemError(
                    f"samples {already.tolist()} are already predicted as their "
                    "desired class"
                )
        for name, array in (
            ("X", X),
            ("mask", mask),
            ("budgets", budgets),
            ("desired", desired),
            ("_original_proba", proba),
        ):
            array.setflags(write=False)
            object.__setattr__(self, name, array)

    @property
    def n_samples(self) -> int:
        return self.X.shape[0]

    @property
    def n_features(self) -> int:
        return self.X.shape[1]

    @property
    def targets(self) -> np.ndarray:
        """One-hot desired label rows."""
        return np.eye(self.classifier.n_classes)[self.desired]

    def with_budgets(self, budgets: np.ndarray) -> "PerturbProblem":
        return replace(self, budgets=np.asarray(budgets, dtype=float))

    def subset(self, indices: Sequence[int]) -> "PerturbProblem":
        """Problem over ``indices`` only (groups dropped)."""
        idx = np.asarray(indices, dtype=int)
        return replace(self, X=self.X[idx], desired=self.desired[idx], groups=None)

    def subproblems(self) -> List[Tuple[np.ndarray, "PerturbProblem"]]:
        """One ``(indices, problem)`` per sequence group with allocated budgets."""
        groups = self.groups or SequenceGroups.single(self.n_samples)
        allocation = allocate_group_budgets(groups, self.budgets)
        result = []
        for g, share in zip(groups.groups, allocation):
            idx = np.asarray(g, dtype=int)
            result.append((idx, self.subset(idx).with_budgets(share)))
        return result


def _check_shape(prob: PerturbProblem, Xhat: np.ndarray) -> np.ndarray:
    Xhat = np.asarray(Xhat, dtype=float)
    if Xhat.shape != prob.X.shape:
        raise DimensionError(f"Xhat shape {Xhat.shape} != X shape {prob.X.shape}")
    return Xhat


def check_frozen(prob: PerturbProblem, Xhat: np.ndarray) -> None:
    frozen = ~prob.mask
    if np.any(Xhat[:, frozen] != prob.X[:, frozen]):
        moved = np.flatnonzero(np.any(Xhat[:, frozen] != prob.X[:, frozen], axis=0))
        raise FrozenFeatureError(
            f"frozen features {np.flatnonzero(frozen)[moved].tolist()} were perturbed"
        )


def deviations(prob: PerturbProblem, Xhat: np.ndarray) -> np.ndarray:
    """Squared per-coordinate deviations ``a_ij`` (samples x features)."""
    Xhat = _check_shape(prob, Xhat)
    return (Xhat - prob.X) ** 2


def budget_lhs(prob: PerturbProblem, Xhat: np.ndarray, z: np.ndarray) -> np.ndarray:
    """``g_i = sum_j z_j (xhat_ij - x_ij)**2 - B_i`` for every feature."""
    Xhat = _check_shape(prob, Xhat)
    z = np.asarray(z, dtype=float).reshape(-1)
    if z.shape != (prob.n_samples,):
        raise DimensionError("z needs one entry per sample")
    check_frozen(prob, Xhat)
    return z @ ((Xhat - prob.X) ** 2) - prob.budgets


def _runner_up(proba: np.ndarray, desired: np.ndarray) -> np.ndarray:
    """Smallest index attaining the largest probability among non-desired classes."""
    others = np.array(proba, dtype=float, copy=True)
    others[np.arange(len(desired)), desired] = -np.inf
    return np.argmax(others, axis=1)


def margin_violation(
    proba: np.ndarray, desired: Union[int, np.ndarray], delta: float
) -> Union[float, np.ndarray]:
    """``max(0, max_{u != y} f_u - f_y + delta)`` per probability row."""
    proba = np.asarray(proba, dtype=float)
    single = proba.ndim == 1
    P = proba[None, :] if single else proba
    y = np.atleast_1d(np.asarray(desired, dtype=int))
    rows = np.arange(P.shape[0])
    u = _runner_up(P, y)
    violation = np.maximum(0.0, P[rows, u] - P[rows, y] + delta)
    return float(violation[0]) if single else violation


def confidence_violation(prob: PerturbProblem, xhat_j: np.ndarray, j: int) -> float:
    """The z-free confidence violation for sample ``j``."""
    if not 0 <= j < prob.n_samples:
        raise ProblemError(f"sample index {j} out of range")
    proba = prob.classifier.predict_proba(xhat_j)
    return margin_violation(proba, prob.desired[j], prob.delta)


def confidence_violations(prob: PerturbProblem, Xhat: np.ndarray) -> np.ndarray:
    Xhat = _check_shape(prob, Xhat)
    if prob.n_samples == 0:
        return np.zeros(0)
    return margin_violation(
        prob.classifier.predict_proba(Xhat), prob.desired, prob.delta
    )


def confidence_violation_grad(
    prob: PerturbProblem, Xhat: np.ndarray
) -> Tuple[np.ndarray, np.ndarray]:
    """Violations and their subgradients with respect to every row of ``Xhat``.

    Rows with zero violation get a zero gradient. At ties in the inner max the
    smallest class index is differentiated.
    """
    Xhat = _check_shape(prob, Xhat)
    n = prob.n_samples
    if n == 0:
        return np.zeros(0), np.zeros_like(Xhat)
    proba = prob.classifier.predict_proba(Xhat)
    rows = np.arange(n)
    u = _runner_up(proba, prob.desired)
    violation = np.maximum(0.0, proba[rows, u] - proba[rows, prob.desired] + prob.delta)
    weights = np.zeros_like(proba)
    active = violation > 0
    weights[rows[active], u[active]] = 1.0
    weights[rows[active], prob.desired[active]] = -1.0
    grad = prob.classifier.input_grad(Xhat, weights)
    grad[~active] = 0.0
    return violation, grad


def allocate_group_budgets(groups: SequenceGroups, B: np.ndarray) -> np.ndarray:
    """Split the joint budget proportionally to group sizes, summing exactly.

    Each budget ``B_i`` is an integer number ``T`` of units ``ulp(B_i)``. The
    units are shared out by largest remainder, so every share is an exact
    multiple of the unit and any summation order reproduces ``B_i`` exactly.
    """
    B = np.asarray(B, dtype=float).reshape(-1)
    sizes = groups.sizes
    if any(s == 0 for s in sizes):
        raise ProblemError("sequence groups must not be empty")
    if not np.all(np.isfinite(B)) or np.any(B < 0):
        raise ProblemError("joint budgets must be finite and non-negative")
    total = sum(sizes)
    allocation = np.zeros((len(sizes), B.size))
    for i, b in enumerate(B):
        if b == 0.0:
            continue
        unit = math.ulp(b)
        units = int(b / unit)
        exact = [units * s for s in sizes]
        shares = [e // total for e in exact]
        remainders = [e % total for e in exact]
        leftover = units - sum(shares)
        # ties go to the lower group index
        for r in sorted(range(len(sizes)), key=lambda r: (-remainders[r], r))[
            :leftover
        ]:
            shares[r] += 1
        allocation[:, i] = [s * unit for s in shares]
    return allocation


@dataclass(frozen=True)
class RunMetrics:
    """Evaluation of a final selected set."""

    selected: int
    consumption_per_sample: float
    mean_budget_residual: Optional[float]
    mean_prediction_gap: Optional[float]
    empty_selection: bool

    def as_dict(self) -> dict:
        return {
            "selected": self.selected,
            "consumption_per_sample": self.consumption_per_sample,
            "mean_budget_residual": self.mean_budget_residual,
            "mean_prediction_gap": self.mean_prediction_gap,
            "empty_selection": self.empty_selection,
        }


def metrics(
    prob: PerturbProblem, Xhat: np.ndarray, selected: Sequence[int]
) -> RunMetrics:
    idx = np.asarray(sorted(int(j) for j in selected), dtype=int)
    if idx.size and (idx.min() < 0 or idx.max() >= prob.n_samples):
        raise ProblemError("selected indices out of range")
    a = deviations(prob, Xhat)[idx]
    used = a.sum(axis=0)

    empty = idx.size == 0
    if empty:
        logger.info(
            "maxsamples_%s", "empty_selection", extra={"ms_event": "empty_selection"}
        )
    consumption = 0.0 if empty else float(used.sum() / idx.size)

    positive = prob.budgets > 0
    residual = None
    if positive.any():
        B = prob.budgets[positive]
        residual = float(np.mean((B - used[positive]) / B))

    gap = None
    if not empty:
        proba = prob.classifier.predict_proba(np.asarray(Xhat, dtype=float)[idx])
        top_two = np.sort(proba, axis=1)[:, -2:]
        gap = float(np.mean(top_two[:, 1] - top_two[:, 0]))

    return RunMetrics(
        selected=int(idx.size),
        consumption_per_sample=consumption,
        mean_budget_residual=residual,
        mean_prediction_gap=gap,
        empty_selection=empty,
    )


def read_dataset_csv(path: Union[str, Path]) -> Dataset:
    """Header row, one sample per line, final column the integer label."""
    try:
        with open(path, newline="") as f:
            reader = csv.reader(f)
            header = next(reader)
            rows = [row for row in reader if row]
    except (OSError, StopIteration) as e:
        raise DataError(f"cannot read dataset {path}: {e}") from e
    try:
        X = np.array([[float(v) for v in row[:-1]] for row in rows], dtype=float)
        y = np.array([int(row[-1]) for row in rows], dtype=int)
    except ValueError as e:
        raise DataError(f"malformed dataset row in {path}: {e}") from e
    if X.size and X.shape[1] != len(header) - 1:
        raise DataError(f"{path}: header has {len(header)} columns, rows differ")
    return Dataset(X.reshape(len(rows), len(header) - 1), y)


def write_dataset_csv(data: Dataset, path: Union[str, Path]) -> None:
    with open(path, "w", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow([f"x{i}" for i in range(data.X.shape[1])] + ["label"])
        for row, label in zip(data.X, data.y):
            writer.writerow([repr(float(v)) for v in row] + [int(label)])


def problem_to_dict(prob: PerturbProblem, classifier_path: str) -> dict:
    document = {
        "X": prob.X.tolist(),
        "mask": prob.mask.tolist(),
        "B": prob.budgets.tolist(),
        "desired": prob.desired.tolist(),
        "delta": prob.delta,
        "classifier": classifier_path,
    }
    if prob.groups is not None:
        document["groups"] = [list(g) for g in prob.groups.groups]
    return document


def save_problem(
    prob: PerturbProblem, path: Union[str, Path], classifier_path: str
) -> None:
    Path(path).write_text(
        json.dumps(problem_to_dict(prob, classifier_path), indent=2) + "\n"
    )


def load_problem(
    path: Union[str, Path], default_budget: Optional[float] = None
) -> PerturbProblem:
    """Read a problem file; a missing ``B`` means unlimited budgets."""
    path = Path(path)
    try:
        document = json.loads(path.read_text())
    except (OSError, json.JSONDecodeError) as e:
        raise DataError(f"cannot read problem file {path}: {e}") from e
    try:
        X = np.array(document["X"], dtype=float)
        p = X.shape[1] if X.ndim == 2 else 0
        classifier_path = Path(document["classifier"])
        if not classifier_path.is_absolute():
            classifier_path = path.parent / classifier_path
        if "B" in document:
            budgets = document["B"]
        else:
            if default_budget is None:
                from maxsamples.conf import maxsamples_config

                default_budget = maxsamples_config.unlimited_budget
            budgets = [default_budget] * p
        groups = document.get("groups")
        return PerturbProblem(
            X=X,
            mask=document.get("mask", [True] * p),
            budgets=budgets,
            desired=document["desired"],
            delta=float(document.get("delta", 0.1)),
            classifier=load_classifier(classifier_path),
            groups=SequenceGroups(tuple(map(tuple, groups))) if groups else None,
        )
    except KeyError as e:
        raise DataError(f"problem file {path} is missing {e}") from e
