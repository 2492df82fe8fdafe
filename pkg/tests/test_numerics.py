import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from crest.numerics import (
    SeededRng,
    check_distance_matrix,
    finite_diff_gradient,
    l2_norm,
    pairwise_distances,
    sample_rademacher,
)


def test_rademacher_codomain():
    z = sample_rademacher(4, SeededRng(7))
    assert z.shape == (4,)
    assert set(np.unique(z)) <= {-1.0, 1.0}
    assert np.all(z * z == 1.0)


def test_rademacher_dim_one():
    assert sample_rademacher(1, SeededRng(1))[0] in (-1.0, 1.0)


def test_rademacher_rejects_zero_dim():
    with pytest.raises(ValueError):
        sample_rademacher(0, SeededRng(0))


def test_rademacher_mean_is_near_zero():
    rng = SeededRng(99)
    draws = np.array([sample_rademacher(3, rng)[0] for _ in range(100_000)])
    assert abs(draws.mean()) < 0.02


def test_rng_is_deterministic_and_streams_differ():
    a = SeededRng(5).derive(3)
    b = SeededRng(5).derive(3)
    c = SeededRng(5).derive(4)
    xa, xb, xc = a.normal(size=8), b.normal(size=8), c.normal(size=8)
    assert np.array_equal(xa, xb)
    assert not np.array_equal(xa, xc)
    # deriving does not advance the parent
    p = SeededRng(5)
    first = p.normal(size=3)
    q = SeededRng(5)
    q.derive(0)
    assert np.array_equal(q.normal(size=3), first)


def test_rng_rejects_out_of_range_seed():
    with pytest.raises(ValueError):
        SeededRng(-1)
    with pytest.raises(ValueError):
        SeededRng(2**64)


def test_pairwise_345():
    D = pairwise_distances([np.array([0.0, 0.0]), np.array([3.0, 4.0])])
    assert D[0, 1] == 5.0 and D[1, 0] == 5.0


def test_pairwise_single_row():
    D = pairwise_distances([np.array([1.0, 2.0, 3.0])])
    assert D.shape == (1, 1) and D[0, 0] == 0.0


def test_pairwise_mismatched_dims():
    with pytest.raises(ValueError):
        pairwise_distances([np.zeros(2), np.zeros(3)])


def test_pairwise_matches_double_loop(rng):
    rows = [rng.normal(size=4) for _ in range(5)]
    D = pairwise_distances(rows)
    for i in range(5):
        for j in range(5):
            if i == j:
                expect = 0.0
            else:
                expect = np.sqrt(sum((a - b) ** 2 for a, b in zip(rows[i], rows[j])))
            assert D[i, j] == pytest.approx(expect, rel=1e-14, abs=1e-15)
    check_distance_matrix(D)


def test_pairwise_blocks_agree_with_small_case(rng):
    X = rng.normal(size=(300, 3))  # spans more than one row block
    D = pairwise_distances(X)
    check_distance_matrix(D)
    i, j = 17, 290
    assert D[i, j] == pytest.approx(np.linalg.norm(X[i] - X[j]), rel=1e-14)


def test_triangle_inequality_on_random_triples(rng):
    X = rng.normal(size=(40, 6))
    D = pairwise_distances(X)
    tri = rng.integers(0, 40, size=(1000, 3))
    for i, j, k in tri:
        assert D[i, k] <= D[i, j] + D[j, k] + 1e-12


def test_check_distance_matrix_names_violation():
    D = pairwise_distances(np.arange(4.0))
    D[0, 1] += 1e-3
    with pytest.raises(ValueError, match="symmetry"):
        check_distance_matrix(D)


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(-1e3, 1e3), min_size=1, max_size=12))
def test_l2_norm_matches_sum_of_squares(values):
    v = np.array(values)
    assert l2_norm(v) == pytest.approx(np.sqrt(sum(x * x for x in values)), rel=1e-12, abs=1e-300)
    assert l2_norm(v) >= 0.0


def test_l2_norm_examples(rng):
    assert l2_norm(np.array([3.0, 4.0])) == 5.0
    assert l2_norm(np.zeros(7)) == 0.0
    v = rng.normal(size=10)
    assert l2_norm(v) == pytest.approx(np.sqrt(np.sum([x * x for x in v])), rel=1e-14)


def test_finite_diff_quadratic():
    g = finite_diff_gradient(lambda w: float(w @ w), np.array([1.0, 2.0]), 1e-5)
    assert np.allclose(g, [2.0, 4.0], atol=1e-6)


def test_finite_diff_constant():
    g = finite_diff_gradient(lambda w: 3.0, np.array([1.0, -2.0, 0.5]))
    assert np.allclose(g, 0.0, atol=1e-8)


def test_finite_diff_logistic_loss(rng):
    x, y = rng.normal(size=5), 1.0
    w = rng.normal(size=5)

    def f(w):
        return float(np.log1p(np.exp(-y * (w @ x))))

    analytic = -y * x / (1.0 + np.exp(y * (w @ x)))
    fd = finite_diff_gradient(f, w)
    assert np.linalg.norm(fd - analytic) / np.linalg.norm(analytic) < 1e-5


def test_finite_diff_rejects_bad_step():
    with pytest.raises(ValueError):
        finite_diff_gradient(lambda w: 0.0, np.zeros(2), 0.0)
