import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from crest.numerics import pairwise_distances
from crest.submodular import (
    ProblemTooLarge,
    SelectionProblem,
    assign_weights,
    brute_force_select,
    facility_value,
    greedy_select,
    lazy_greedy_select,
)


def _problem(rng, n, k, d=2):
    return SelectionProblem(pairwise_distances(rng.normal(size=(n, d))), k)


def _collinear(k=1):
    return SelectionProblem.from_features(np.array([[0.0], [1.0], [10.0]]), k)


def test_facility_value_all_candidates_is_C(rng):
    p = _problem(rng, 6, 2)
    assert facility_value(p, range(6)) == p.C


def test_facility_value_single_candidate():
    p = SelectionProblem(np.zeros((1, 1)), 1)
    assert facility_value(p, [0]) == p.C == 1.0


def test_facility_value_double_loop(rng):
    p = _problem(rng, 4, 2)
    total = 0.0
    for i in range(4):
        total += min(p.D[i, 1], p.D[i, 3])
    assert facility_value(p, [1, 3]) == p.C - total


def test_facility_value_rejects_empty(rng):
    with pytest.raises(ValueError):
        facility_value(_problem(rng, 3, 1), [])


def test_collinear_instance_picks_middle():
    p = _collinear()
    # enumerate singletons: total distances 11, 10, 19
    values = {j: facility_value(p, [j]) for j in range(3)}
    assert max(values, key=values.get) == 1
    assert greedy_select(p).indices == [1]
    assert brute_force_select(p).indices == [1]
    assert lazy_greedy_select(p).indices == [1]


def test_k_equals_n_reaches_C(rng):
    p = _problem(rng, 7, 7)
    sel = greedy_select(p)
    assert sorted(sel.indices) == list(range(7))
    assert sel.objective == p.C


def test_brute_force_k_equals_n_value(rng):
    p = _problem(rng, 6, 6)
    assert brute_force_select(p).objective == p.C


def test_greedy_near_optimal_500_instances():
    rng = np.random.default_rng(2024)
    bound = 1.0 - 1.0 / math.e
    for _ in range(500):
        n = int(rng.integers(2, 13))
        k = int(rng.integers(1, min(4, n) + 1))
        p = _problem(rng, n, k, d=int(rng.integers(1, 4)))
        g = greedy_select(p)
        b = brute_force_select(p)
        assert g.objective >= bound * b.objective
        assert b.objective >= g.objective
        assert lazy_greedy_select(p).same_as(g)


def test_lazy_matches_greedy_up_to_50(rng):
    for _ in range(100):
        n = int(rng.integers(1, 51))
        p = _problem(rng, n, int(rng.integers(1, n + 1)), d=3)
        assert lazy_greedy_select(p).same_as(greedy_select(p))


def test_lazy_matches_greedy_with_ties():
    # integer grid distances produce many equal gains
    X = np.array([[i, j] for i in range(4) for j in range(4)], dtype=float)
    for k in range(1, 17):
        p = SelectionProblem(np.abs(X[:, None, :] - X[None, :, :]).sum(-1), k)
        assert lazy_greedy_select(p).same_as(greedy_select(p))


def test_lazy_saves_evaluations_at_scale(rng):
    p = _problem(rng, 500, 32, d=5)
    lazy, plain = lazy_greedy_select(p), greedy_select(p)
    assert lazy.same_as(plain)
    assert lazy.evaluations < 500 * 32


def test_gains_non_increasing(rng):
    for _ in range(50):
        p = _problem(rng, 30, 10, d=3)
        g = greedy_select(p).gains
        assert all(a >= b for a, b in zip(g, g[1:]))


def test_monotone_and_submodular(rng):
    p = _problem(rng, 15, 1, d=3)
    for _ in range(1000):
        perm = rng.permutation(15)
        a, b = sorted(rng.integers(1, 14, size=2))
        S, T, e = list(perm[:a]), list(perm[:b]), int(perm[14])
        fS, fT = facility_value(p, S), facility_value(p, T)
        assert facility_value(p, S + [e]) >= fS
        assert facility_value(p, S + [e]) - fS >= facility_value(p, T + [e]) - fT - 1e-9


def test_assign_weights_cases(rng):
    p = _problem(rng, 9, 1)
    assert list(assign_weights(p, range(9))) == [1] * 9
    assert list(assign_weights(p, [4])) == [9]
    with pytest.raises(ValueError):
        assign_weights(p, [])


def test_assign_weights_independent_loop(rng):
    p = _problem(rng, 25, 1)
    S = [7, 2, 19, 11]
    expect = [0] * len(S)
    for i in range(25):
        best = 0
        for pos in range(1, len(S)):
            if p.D[i, S[pos]] < p.D[i, S[best]]:
                best = pos
        expect[best] += 1
    assert list(assign_weights(p, S)) == expect


def test_assign_weights_tie_goes_to_earliest():
    p = SelectionProblem.from_features(np.array([[0.0], [1.0], [2.0]]), 2)
    assert list(assign_weights(p, [2, 0])) == [2, 1]
    assert list(assign_weights(p, [0, 2])) == [2, 1]


def test_selected_duplicates_own_themselves():
    p = SelectionProblem(np.zeros((3, 3)), 3)
    assert list(assign_weights(p, [0, 1, 2])) == [1, 1, 1]
    assert list(assign_weights(p, [2, 0])) == [2, 1]


def test_brute_force_guard(rng):
    with pytest.raises(ProblemTooLarge):
        brute_force_select(_problem(rng, 15, 2))


def test_brute_force_dominates_on_ten(rng):
    for _ in range(20):
        p = _problem(rng, 10, 3)
        assert brute_force_select(p).objective >= greedy_select(p).objective


def test_brute_force_lexicographic_tie():
    # four identical points: every singleton has the same value
    p = SelectionProblem(np.zeros((4, 4)), 1)
    assert brute_force_select(p).indices == [0]


def test_problem_validation():
    with pytest.raises(ValueError):
        SelectionProblem(np.zeros((2, 3)), 1)
    with pytest.raises(ValueError):
        SelectionProblem(np.zeros((3, 3)), 4)


@settings(max_examples=60, deadline=None)
@given(
    st.lists(st.floats(-50, 50), min_size=2, max_size=14),
    st.integers(1, 4),
)
def test_weight_conservation_property(xs, k):
    p = SelectionProblem.from_features(np.array(xs)[:, None], min(k, len(xs)))
    sel = lazy_greedy_select(p)
    assert sel.weights.sum() == len(xs)
    assert np.all(sel.weights >= 0)
    assert sel.same_as(greedy_select(p))
