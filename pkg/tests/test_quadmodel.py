import numpy as np
import pytest

from crest.datasets import Dataset
from crest.models import DiagonalQuadratic, SoftmaxRegression, batch_weighted_grad, grad
from crest.numerics import SeededRng
from crest.quadmodel import (
    LOSS_FLOOR,
    EmaStats,
    QuadraticSurrogate,
    build_surrogate,
    hutchinson_diag,
    rho,
    surrogate_value,
    update_grad_ema,
    update_hess_ema,
)


def test_hutchinson_exact_on_diagonal_operators(rng):
    srng = SeededRng(1)
    for _ in range(100):
        d = rng.normal(size=int(rng.integers(1, 30)))
        est = hutchinson_diag(lambda z: d * z, d.size, 1, srng)
        assert np.max(np.abs(est - d)) <= 1e-12


def test_hutchinson_zero_map():
    est = hutchinson_diag(lambda z: np.zeros_like(z), 5, 3, SeededRng(0))
    assert np.all(est == 0.0)


def test_hutchinson_dense_matrix(rng):
    A = rng.normal(size=(20, 20))
    A = (A + A.T) / 2
    est = hutchinson_diag(lambda z: A @ z, 20, 10_000, SeededRng(8))
    true = np.diag(A)
    assert np.linalg.norm(est - true) / np.linalg.norm(true) < 0.05


def test_hutchinson_rejects_zero_samples():
    with pytest.raises(ValueError):
        hutchinson_diag(lambda z: z, 3, 0, SeededRng(0))


def test_grad_ema_first_update_and_fixed_point(rng):
    s = EmaStats(0.9, 0.999)
    g = rng.normal(size=4)
    assert np.allclose(update_grad_ema(s, 3, g), g, rtol=1e-15)
    for _ in range(20):
        assert np.allclose(update_grad_ema(s, 3, g), g, rtol=1e-12)


def test_grad_ema_closed_form(rng):
    s = EmaStats(0.5, 0.9)
    g1, g2 = rng.normal(size=3), rng.normal(size=3)
    update_grad_ema(s, 0, g1)
    out = update_grad_ema(s, 0, g2)
    expect = (0.5 * (0.5 * g1 + g2)) / (1 - 0.5**2)
    assert np.allclose(out, expect, rtol=1e-14, atol=1e-15)


def test_hess_ema_cases(rng):
    s = EmaStats(0.9, 0.9)
    d = rng.normal(size=5)
    for _ in range(10):
        assert np.allclose(update_hess_ema(s, 1, d), np.abs(d), rtol=1e-12)
    assert np.all(update_hess_ema(EmaStats(), 0, np.zeros(3)) == 0.0)
    s2 = EmaStats(0.9, 0.9)
    d1, d2 = rng.normal(size=4), rng.normal(size=4)
    update_hess_ema(s2, 0, d1)
    out = update_hess_ema(s2, 0, d2)
    expect = np.sqrt(0.1 * (0.9 * d1**2 + d2**2) / (1 - 0.9**2))
    assert np.allclose(out, expect, rtol=1e-14)
    assert np.all(out >= 0)


def test_ema_records_are_per_example(rng):
    s = EmaStats(0.5, 0.5)
    a, b = rng.normal(size=2), rng.normal(size=2)
    update_grad_ema(s, 0, a)
    update_grad_ema(s, 0, a)
    update_grad_ema(s, 7, b)
    assert s.count(0) == (2, 0) and s.count(7) == (1, 0)
    assert np.allclose(s.grad_bar(7), b)


def test_ema_rejects_bad_betas():
    with pytest.raises(ValueError):
        EmaStats(1.0, 0.5)


def _two_class_data():
    X = np.array([[1.0, -2.0], [0.5, 0.5], [1.0, -2.0], [3.0, 1.0]])
    return Dataset(X, np.array([0, 1, 0, 1]), 2)


def test_surrogate_single_example_first_build():
    ds = _two_class_data()
    m = SoftmaxRegression(2, 2)
    w = np.zeros(m.n_params)
    Q = build_surrogate(m, w, ds, [1], [1.0], EmaStats(), SeededRng(0))
    assert np.array_equal(Q.g_bar, grad(m, w, ds[1]))


def test_surrogate_duplicates_match_doubled_weight():
    ds = _two_class_data()
    m = SoftmaxRegression(2, 2)
    w = np.array([0.3, -0.1, 0.2, 0.4])
    Q2 = build_surrogate(m, w, ds, [0, 2], [1.0, 1.0], EmaStats(), SeededRng(0))
    Q1 = build_surrogate(m, w, ds, [0], [2.0], EmaStats(), SeededRng(0))
    # one entry of weight 2 over |S|=1 is twice the mean of two weight-1 copies
    assert np.allclose(Q1.g_bar, 2 * Q2.g_bar, rtol=1e-15)
    assert Q1.anchor_loss == pytest.approx(2 * Q2.anchor_loss, rel=1e-15)


def test_surrogate_gbar_is_weighted_mean_of_smoothed_grads(small_data, softmax_model, rng):
    stats = EmaStats(0.8, 0.99)
    w = rng.normal(size=softmax_model.n_params)
    idx = [4, 9, 13, 21]
    # give some examples history so the smoothing is non-trivial
    build_surrogate(softmax_model, w * 0.5, small_data, [4, 9], [1.0, 1.0], stats, SeededRng(1))
    gam = rng.uniform(0.5, 3, size=4)
    Q = build_surrogate(softmax_model, w, small_data, idx, gam, stats, SeededRng(2), t=5)
    smoothed = [stats.grad_bar(i) for i in idx]
    expect = sum(g * s for g, s in zip(gam, smoothed)) / len(idx)
    assert np.allclose(Q.g_bar, expect, rtol=1e-12, atol=1e-14)
    # on a first-ever build this equals batch_weighted_grad
    Q0 = build_surrogate(softmax_model, w, small_data, idx, gam, EmaStats(), SeededRng(2))
    assert np.allclose(Q0.g_bar, batch_weighted_grad(softmax_model, w, small_data, idx, gam), atol=1e-12)
    assert np.all(Q.h_bar_diag >= 0) and Q.h_bar_diag.shape == (softmax_model.n_params,)


def test_surrogate_rejects_empty(small_data, softmax_model):
    with pytest.raises(ValueError):
        build_surrogate(softmax_model, np.zeros(softmax_model.n_params), small_data, [], [], EmaStats(), SeededRng(0))


def test_surrogate_exact_on_diagonal_quadratic(rng):
    c = rng.uniform(0.1, 3, size=6)
    model = DiagonalQuadratic(c, rng.normal(size=6), offset=0.7)
    ds = Dataset(np.zeros((1, 1)), np.array([0]), 1)
    w0 = rng.normal(size=6)
    Q = build_surrogate(model, w0, ds, [0], [1.0], EmaStats(), SeededRng(4))
    for _ in range(100):
        delta = rng.normal(size=6)
        true = float(model.losses(w0 + delta, ds.X, ds.y)[0])
        assert abs(surrogate_value(Q, delta) - true) < 1e-8
        assert rho(Q, delta, true).value < 1e-8


def _random_q(rng, n=5):
    return QuadraticSurrogate(rng.normal(size=n), float(rng.uniform(0.5, 2)), rng.normal(size=n), rng.uniform(0, 2, size=n))


def test_surrogate_value_cases(rng):
    Q = _random_q(rng)
    assert surrogate_value(Q, np.zeros(5)) == Q.anchor_loss
    delta = rng.normal(size=5)
    terms = sum(0.5 * h * d * d for h, d in zip(Q.h_bar_diag, delta))
    terms += sum(g * d for g, d in zip(Q.g_bar, delta))
    assert surrogate_value(Q, delta) == pytest.approx(terms + Q.anchor_loss, abs=1e-12)
    flat = QuadraticSurrogate(Q.anchor_w, Q.anchor_loss, Q.g_bar, np.zeros(5))
    assert surrogate_value(flat, delta) == pytest.approx(Q.anchor_loss + Q.g_bar @ delta, abs=1e-14)
    with pytest.raises(ValueError):
        surrogate_value(Q, np.zeros(4))


def test_rho_cases(rng):
    Q = _random_q(rng)
    delta = rng.normal(size=5)
    F = surrogate_value(Q, delta)
    if F > 0:
        assert rho(Q, delta, F).value == 0.0
        assert rho(Q, delta, F / 2).value == pytest.approx(1.0, abs=1e-12)
    L = 0.8
    assert rho(Q, delta, L).value == pytest.approx(abs(F - L) / L, abs=1e-12)
    out = rho(Q, delta, LOSS_FLOOR)
    assert out.value == 0.0 and out.loss_vanished


def test_rho_scale_consistent():
    Q = QuadraticSurrogate(np.zeros(1), 3.0, np.zeros(1), np.zeros(1))
    # F - L = 1, L = 2 ; scaling both by c keeps the ratio
    for c in (0.5, 1.0, 7.0):
        Qc = QuadraticSurrogate(np.zeros(1), 3.0 * c, np.zeros(1), np.zeros(1))
        assert rho(Qc, np.zeros(1), 2.0 * c).value == pytest.approx(rho(Q, np.zeros(1), 2.0).value, rel=1e-15)
