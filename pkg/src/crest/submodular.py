"""Facility-location coreset selection.

The objective over a candidate set ``V`` is

    f(S) = C - sum_{i in V} min_{j in S} D[i, j]

with ``C = |V| * max(D) + 1``. For the empty set every candidate is charged
the largest distance, so ``f({}) = C - |V| * max(D) = 1`` and marginal gains
are well defined from the first step.

Greedy and lazy greedy share the same gain kernel and the same tie-break
(smallest candidate index among equal gains), which makes their outputs
identical element for element.
"""

from __future__ import annotations

import heapq
import itertools
from dataclasses import dataclass, field

import numpy as np

from .numerics import pairwise_distances

BRUTE_FORCE_LIMIT = 14


class ProblemTooLarge(ValueError):
    pass


@dataclass
class SelectionProblem:
    D: np.ndarray
    k: int
    C: float = None

    def __post_init__(self):
        self.D = np.asarray(self.D, dtype=np.float64)
        n = self.D.shape[0]
        if self.D.shape != (n, n) or n == 0:
            raise ValueError("distance matrix must be square and nonempty")
        if not 1 <= self.k <= n:
            raise ValueError(f"k must lie in [1, {n}], got {self.k}")
        self.max_distance = float(self.D.max())
        if self.C is None:
            self.C = n * self.max_distance + 1.0
        elif self.C < n * self.max_distance:
            raise ValueError("C is too small to keep the objective nonnegative")

    @classmethod
    def from_features(cls, rows, k: int) -> "SelectionProblem":
        return cls(pairwise_distances(rows), k)

    @property
    def n(self) -> int:
        return self.D.shape[0]

    def empty_cover(self) -> np.ndarray:
        """Per-candidate distance charged before anything is selected."""
        return np.full(self.n, self.max_distance)


@dataclass
class CoresetSelection:
    indices: list[int]
    weights: np.ndarray
    objective: float
    gains: list[float] = field(default_factory=list)
    evaluations: int = 0

    def same_as(self, other: "CoresetSelection") -> bool:
        return (
            self.indices == other.indices
            and np.array_equal(self.weights, other.weights)
            and self.objective == other.objective
            and self.gains == other.gains
        )


def facility_value(problem: SelectionProblem, S) -> float:
    S = list(S)
    if not S:
        raise ValueError("selected set is empty")
    return float(problem.C - problem.D[:, S].min(axis=1).sum())


def _gains(cover: np.ndarray, rows: np.ndarray) -> np.ndarray:
    """Marginal gains of the candidates whose distance rows are given.

    Greedy and lazy greedy both call this kernel; a row reduction gives the
    same bits whether the batch holds one row or all of them.
    """
    return np.maximum(cover - rows, 0.0).sum(axis=1)


def greedy_select(problem: SelectionProblem) -> CoresetSelection:
    """Plain greedy: ``k`` rounds, re-evaluating every remaining candidate."""
    D = problem.D
    cover = problem.empty_cover()
    chosen: list[int] = []
    taken = np.zeros(problem.n, dtype=bool)
    gains = []
    evals = 0
    for _ in range(problem.k):
        g = _gains(cover, D)
        g[taken] = -np.inf
        evals += problem.n - len(chosen)
        best = int(np.argmax(g))  # first maximum: smallest index wins ties
        chosen.append(best)
        taken[best] = True
        gains.append(float(g[best]))
        cover = np.minimum(cover, D[best])
    return _finish(problem, chosen, gains, evals)


def lazy_greedy_select(problem: SelectionProblem) -> CoresetSelection:
    """Lazy greedy with a max-heap of stale upper bounds.

    Heap entries are ``(-gain, index, round_evaluated)``; popping an entry that
    was refreshed in the current round means no other candidate can beat it,
    and a tie with a stale bound can only come from a larger index.
    """
    D = problem.D
    cover = problem.empty_cover()
    heap = [(-float(g), j, 0) for j, g in enumerate(_gains(cover, D))]
    heapq.heapify(heap)
    evals = problem.n
    chosen: list[int] = []
    gains = []
    for rnd in range(problem.k):
        while True:
            neg, j, seen = heapq.heappop(heap)
            if seen == rnd:
                break
            g = float(_gains(cover, D[j : j + 1])[0])
            evals += 1
            heapq.heappush(heap, (-g, j, rnd))
        chosen.append(j)
        gains.append(-neg)
        cover = np.minimum(cover, D[j])
    return _finish(problem, chosen, gains, evals)


def assign_weights(problem: SelectionProblem, indices) -> np.ndarray:
    """Number of candidates whose nearest selected element is each index.

    Ties go to the element selected earliest (first in ``indices``), except
    that a selected element always owns itself: with duplicated candidates
    every selected copy keeps a weight of at least one.
    """
    indices = list(indices)
    if not indices:
        raise ValueError("no selected indices")
    # argmin returns the first minimum, i.e. the earliest-selected element
    owner = np.argmin(problem.D[:, indices], axis=1)
    owner[indices] = np.arange(len(indices))
    return np.bincount(owner, minlength=len(indices)).astype(np.int64)


def brute_force_select(problem: SelectionProblem) -> CoresetSelection:
    """Exact optimum over all subsets of size <= k; ties go to the
    lexicographically smallest index tuple."""
    if problem.n > BRUTE_FORCE_LIMIT:
        raise ProblemTooLarge(
            f"brute force refuses {problem.n} candidates (limit {BRUTE_FORCE_LIMIT})"
        )
    best, best_val = None, -np.inf
    for size in range(1, problem.k + 1):
        for S in itertools.combinations(range(problem.n), size):
            val = facility_value(problem, S)
            if val > best_val or (val == best_val and S < best):
                best, best_val = S, val
    chosen = list(best)
    return CoresetSelection(chosen, assign_weights(problem, chosen), best_val)


def _finish(problem, chosen, gains, evals) -> CoresetSelection:
    return CoresetSelection(
        indices=chosen,
        weights=assign_weights(problem, chosen),
        objective=facility_value(problem, chosen),
        gains=gains,
        evaluations=evals,
    )
