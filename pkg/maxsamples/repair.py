"""Final-solution extraction.

Solver output is only approximately feasible. The final set is obtained by
keeping the samples that meet the confidence margin and then choosing a
maximum-cardinality subset of them whose squared deviations fit every
per-feature budget (a multidimensional 0-1 knapsack with unit profits).
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from itertools import combinations
from typing import List, Optional, Sequence

import numpy as np

from maxsamples.exceptions import KnapsackSizeError
from maxsamples.problem import (
    PerturbProblem,
    RunMetrics,
    confidence_violations,
    deviations,
    metrics,
)

logger = logging.getLogger(__name__)

BRUTEFORCE_LIMIT = 20
# relative slack for the pruning bound only; feasibility is always exact
_BOUND_SLACK = 1e-12


@dataclass(frozen=True, eq=False)
class KnapsackResult:
    selected: np.ndarray
    optimal: bool

    @property
    def count(self) -> int:
        return int(self.selected.sum())


@dataclass(frozen=True, eq=False)
class FinalSolution:
    """Selected indices (into the problem's samples) and their metrics."""

    selected: np.ndarray
    confident: np.ndarray
    metrics: RunMetrics
    optimal: bool

    @property
    def size(self) -> int:
        return int(self.selected.size)


def filter_confident(prob: PerturbProblem, Xhat: np.ndarray) -> np.ndarray:
    """Indices of samples whose confidence violation is exactly zero."""
    return np.flatnonzero(confidence_violations(prob, Xhat) == 0.0)


def _as_instance(weights: np.ndarray, B: np.ndarray):
    weights = np.asarray(weights, dtype=float)
    if weights.ndim == 1:
        weights = weights[None, :]
    B = np.asarray(B, dtype=float).reshape(-1)
    if weights.shape[0] != B.size:
        raise ValueError(f"{weights.shape[0]} weight rows for {B.size} budgets")
    if np.any(weights < 0):
        raise ValueError("knapsack weights must be non-negative")
    return weights, B


def _fits(used: np.ndarray, item: np.ndarray, B: np.ndarray) -> bool:
    return bool(np.all(used + item <= B))


def _set_weight(weights: np.ndarray, idx) -> float:
    # exactly rounded, so equal sets compare equal in any order
    return math.fsum(weights[:, list(idx)].ravel())


class _BranchAndBound:
    """Depth-first search, include-first, items in ascending total weight.

    The count bound at a node is the current count plus, minimised over
    features, the number of the lightest remaining items that still fit that
    feature's remaining capacity. Equal-count sets are ranked by total weight,
    then by their sorted index tuple.
    """

    def __init__(self, weights: np.ndarray, B: np.ndarray):
        self.weights = weights
        self.B = B
        m = weights.shape[1]
        totals = weights.sum(axis=0)
        self.order = sorted(range(m), key=lambda s: (totals[s], s))
        self.W = weights[:, self.order]
        self.totals = totals[self.order]
        self.m = m
        self.suffix_cums = [
            np.cumsum(np.sort(self.W[:, level:], axis=1), axis=1)
            for level in range(m)
        ]
        self.best_count = -1
        self.best_key = (math.inf, ())
        self.chosen: List[int] = []

    def bound(self, level: int, count: int, used: np.ndarray) -> int:
        if level == self.m:
            return count
        remaining = (self.B - used) * (1.0 + _BOUND_SLACK) + _BOUND_SLACK
        cums = self.suffix_cums[level]
        fits = min(
            int(np.searchsorted(cums[i], remaining[i], side="right"))
            for i in range(cums.shape[0])
        )
        return count + fits

    def lightest_completion(self, level: int, count: int, weight: float) -> float:
        # remaining items are already in ascending total weight
        need = self.best_count - count
        if need > self.m - level:
            return math.inf
        return weight + float(self.totals[level : level + need].sum())

    def record(self, count: int) -> None:
        idx = tuple(sorted(self.order[i] for i in self.chosen))
        key = (_set_weight(self.weights, idx), idx)
        if count > self.best_count or key < self.best_key:
            self.best_count = count
            self.best_key = key

    def search(self, level: int, count: int, used: np.ndarray, weight: float) -> None:
        if count >= self.best_count:
            self.record(count)
        if level == self.m:
            return
        bound = self.bound(level, count, used)
        if bound < self.best_count:
            return
        if bound == self.best_count:
            # only equal-count sets remain; the current one is already recorded
            if count == self.best_count:
                return
            lower = self.lightest_completion(level, count, weight)
            if lower > self.best_key[0] * (1.0 + _BOUND_SLACK) + _BOUND_SLACK:
                return
        item = self.W[:, level]
        if _fits(used, item, self.B):
            self.chosen.append(level)
            heavier = weight + float(self.totals[level])
            self.search(level + 1, count + 1, used + item, heavier)
            self.chosen.pop()
        self.search(level + 1, count, used, weight)

    def solve(self) -> np.ndarray:
        self.search(0, 0, np.zeros(self.B.size), 0.0)
        selected = np.zeros(self.m, dtype=bool)
        selected[list(self.best_key[1])] = True
        return selected


def _normalised_load(weights: np.ndarray, B: np.ndarray) -> np.ndarray:
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(B[:, None] > 0, weights / B[:, None], np.inf)
    ratio = np.where(weights == 0, 0.0, ratio)
    return ratio.sum(axis=0)


def _greedy_swap(weights: np.ndarray, B: np.ndarray) -> np.ndarray:
    """Greedy fill by normalised load, improved by one-for-one swaps."""
    m = weights.shape[1]
    load = _normalised_load(weights, B)
    order = sorted(range(m), key=lambda s: (load[s], s))
    selected = np.zeros(m, dtype=bool)
    used = np.zeros(B.size)

    def fill() -> int:
        nonlocal used
        added = 0
        for s in order:
            if not selected[s] and _fits(used, weights[:, s], B):
                selected[s] = True
                used = used + weights[:, s]
                added += 1
        return added

    fill()
    improved = True
    while improved:
        improved = False
        for u in order:
            if selected[u]:
                continue
            for s in sorted(np.flatnonzero(selected), key=lambda s: -load[s]):
                if load[u] >= load[s]:
                    break
                trial = used - weights[:, s] + weights[:, u]
                if not np.all(trial <= B):
                    continue
                saved = (selected.copy(), used.copy())
                selected[s], selected[u] = False, True
                used = trial
                if fill() > 0:
                    improved = True
                    break
                selected, used = saved
            if improved:
                break
    return selected


def knapsack_select(
    weights: np.ndarray, B: np.ndarray, exact_limit: Optional[int] = None
) -> KnapsackResult:
    """Maximum-cardinality subset with ``sum_s weights[i, s] <= B[i]`` for all i.

    Exact branch-and-bound up to ``exact_limit`` items (the
    ``KNAPSACK_EXACT_LIMIT`` setting by default), greedy with swaps beyond.
    Exact ties go to the smaller total weight, then the smaller index set.
    """
    weights, B = _as_instance(weights, B)
    m = weights.shape[1]
    if m == 0:
        return KnapsackResult(np.zeros(0, dtype=bool), True)
    if exact_limit is None:
        from maxsamples.conf import maxsamples_config

        exact_limit = maxsamples_config.knapsack_exact_limit
    if m <= exact_limit:
        return KnapsackResult(_BranchAndBound(weights, B).solve(), True)

    selected = _greedy_swap(weights, B)
    logger.info(
        "maxsamples_%s",
        "knapsack_heuristic",
        extra={"ms_event": "knapsack_heuristic", "items": m},
    )
    return KnapsackResult(selected, bool(selected.all()))


def knapsack_bruteforce(
    weights: np.ndarray, B: np.ndarray, lightest: bool = False
) -> np.ndarray:
    """Exhaustive oracle; ties go to the lexicographically smallest index set.

    With ``lightest`` the smallest total weight wins a tie first, which is the
    rule ``knapsack_select`` follows.
    """
    weights, B = _as_instance(weights, B)
    m = weights.shape[1]
    if m > BRUTEFORCE_LIMIT:
        raise KnapsackSizeError(
            f"brute force is limited to {BRUTEFORCE_LIMIT} items, got {m}"
        )
    selected = np.zeros(m, dtype=bool)
    for r in range(m, 0, -1):
        feasible = [
            combo
            for combo in combinations(range(m), r)
            if np.all(weights[:, list(combo)].sum(axis=1) <= B)
        ]
        if not feasible:
            continue
        if lightest:
            best = min(feasible, key=lambda c: (_set_weight(weights, c), c))
        else:
            best = feasible[0]
        selected[list(best)] = True
        return selected
    return selected


def _select_in(prob: PerturbProblem, Xhat: np.ndarray, exact_limit):
    confident = filter_confident(prob, Xhat)
    weights = deviations(prob, Xhat)[confident].T
    result = knapsack_select(weights, prob.budgets, exact_limit)
    return confident, confident[result.selected], result.optimal


def finalize(
    prob: PerturbProblem, Xhat: np.ndarray, exact_limit: Optional[int] = None
) -> FinalSolution:
    """Confident filter, then knapsack; per sequence group when groups exist."""
    Xhat = np.asarray(Xhat, dtype=float)
    if prob.groups is None:
        confident, selected, optimal = _select_in(prob, Xhat, exact_limit)
    else:
        confident_parts, selected_parts, optimal = [], [], True
        for idx, sub in prob.subproblems():
            c, s, o = _select_in(sub, Xhat[idx], exact_limit)
            confident_parts.append(idx[c])
            selected_parts.append(idx[s])
            optimal = optimal and o
        confident = np.sort(np.concatenate(confident_parts))
        selected = np.concatenate(selected_parts)
    selected = np.sort(selected)
    return FinalSolution(
        selected=selected,
        confident=confident,
        metrics=metrics(prob, Xhat, selected),
        optimal=optimal,
    )


def check_feasibility(
    prob: PerturbProblem, Xhat: np.ndarray, selected: Sequence[int]
) -> List[str]:
    """Violations of either constraint family by ``selected``; empty if feasible."""
    Xhat = np.asarray(Xhat, dtype=float)
    idx = np.asarray(sorted(int(j) for j in selected), dtype=int)
    problems = []

    frozen = ~prob.mask
    if np.any(Xhat[:, frozen] != prob.X[:, frozen]):
        problems.append("frozen features were perturbed")

    a = deviations(prob, Xhat)[idx]
    for i, budget in enumerate(prob.budgets):
        used = math.fsum(a[:, i])
        if used > budget + 1e-12 * max(1.0, abs(budget)):
            problems.append(f"feature {i}: used {used!r} exceeds budget {budget!r}")

    if idx.size:
        violations = confidence_violations(prob, Xhat)[idx]
        for j, v in zip(idx, violations):
            if v != 0.0:
                problems.append(f"sample {j}: confidence violation {v!r}")
    return problems
