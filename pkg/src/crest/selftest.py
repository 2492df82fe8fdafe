"""Fast property checks run by ``crest selftest``.

Each check returns normally or raises with a message naming the property.
"""

from __future__ import annotations

import math
import time

import numpy as np

from .datasets import Example
from .models import SoftmaxRegression, TwoLayerMLP, grad, loss
from .numerics import SeededRng, check_distance_matrix, finite_diff_gradient, pairwise_distances
from .quadmodel import EmaStats, hutchinson_diag
from .submodular import SelectionProblem, brute_force_select, greedy_select, lazy_greedy_select


class PropertyFailure(AssertionError):
    pass


def _require(cond: bool, message: str) -> None:
    if not cond:
        raise PropertyFailure(message)


def check_distances(rng: SeededRng, inject_asymmetry: bool = False) -> None:
    for _ in range(20):
        D = pairwise_distances(rng.normal(size=(12, 3)))
        if inject_asymmetry:
            D[0, 1] += 1e-3
        check_distance_matrix(D)


def check_greedy(rng: SeededRng) -> None:
    bound = 1.0 - 1.0 / math.e
    for _ in range(200):
        n = int(rng.integers(2, 11))
        p = SelectionProblem(pairwise_distances(rng.normal(size=(n, 2))), int(rng.integers(1, min(4, n) + 1)))
        check_distance_matrix(p.D)
        g, opt = greedy_select(p), brute_force_select(p)
        _require(g.objective >= bound * opt.objective, "greedy below (1 - 1/e) of the optimum")
        _require(lazy_greedy_select(p).same_as(g), "lazy greedy differs from greedy")
        _require(int(g.weights.sum()) == n, "weights do not sum to the candidate count")


def check_hutchinson(rng: SeededRng) -> None:
    for _ in range(50):
        d = rng.normal(size=int(rng.integers(1, 20)))
        est = hutchinson_diag(lambda z: d * z, d.size, 1, rng)
        _require(np.max(np.abs(est - d)) <= 1e-12, "Hutchinson is not exact on a diagonal operator")


def check_derivatives(rng: SeededRng) -> None:
    for i in range(40):
        if i % 2:
            model = SoftmaxRegression(3, 3, bias=True)
        else:
            model = TwoLayerMLP(3, 4, 3, bias=True)
        w = rng.normal(scale=0.7, size=model.n_params)
        ex = Example(rng.normal(size=3), int(rng.integers(0, 3)))
        g = grad(model, w, ex)
        fd = finite_diff_gradient(lambda v: loss(model, v, ex), w)
        _require(np.linalg.norm(g - fd) <= 1e-5 * max(np.linalg.norm(fd), 1e-12), "gradient disagrees with finite differences")
        v = rng.normal(size=model.n_params)
        X, y = ex.features[None, :], np.array([ex.label])
        hv = model.hvps(w, X, y, v)[0]
        h = 1e-5
        fd_hv = (model.grads(w + h * v, X, y)[0] - model.grads(w - h * v, X, y)[0]) / (2 * h)
        _require(np.linalg.norm(hv - fd_hv) <= 1e-4 * max(np.linalg.norm(fd_hv), 1e-12), "HVP disagrees with finite differences")


def check_ema(rng: SeededRng) -> None:
    s = EmaStats(0.9, 0.99)
    g = rng.normal(size=5)
    for k in range(10):
        _require(np.allclose(s.update_grad(0, g), g, rtol=1e-12), "gradient EMA fixed point broken")
        _require(np.allclose(s.update_hess(0, g), np.abs(g), rtol=1e-12), "Hessian EMA fixed point broken")
    s2 = EmaStats(0.5, 0.9)
    a, b = rng.normal(size=3), rng.normal(size=3)
    s2.update_grad(1, a)
    out = s2.update_grad(1, b)
    _require(np.allclose(out, 0.5 * (0.5 * a + b) / 0.75, rtol=1e-14), "EMA bias correction broken")


CHECKS = (
    ("distance matrix invariants", check_distances),
    ("greedy vs brute-force oracle", check_greedy),
    ("Hutchinson diagonal exactness", check_hutchinson),
    ("gradient and HVP vs finite differences", check_derivatives),
    ("EMA identities", check_ema),
)


def run_selftest(seed: int = 0, inject_asymmetry: bool = False, emit=print) -> bool:
    root = SeededRng(seed)
    ok = True
    for i, (name, fn) in enumerate(CHECKS):
        start = time.perf_counter()
        try:
            if fn is check_distances:
                fn(root.derive(i), inject_asymmetry)
            else:
                fn(root.derive(i))
        except (AssertionError, ValueError) as exc:
            ok = False
            emit(f"FAIL  {name}: {exc}")
            continue
        emit(f"PASS  {name} ({(time.perf_counter() - start):.2f} s)")
    return ok
