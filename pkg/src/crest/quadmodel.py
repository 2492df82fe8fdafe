"""Quadratic loss model anchored at a coreset selection point.

The surrogate is

    F(delta) = 0.5 * sum(h * delta**2) + g . delta + L_anchor

with ``g`` and ``h`` the weighted means (over the coreset union) of
exponentially smoothed per-example gradients and Hessian diagonals. Hessian
diagonals come from Hutchinson probes, ``E[z * (H z)]`` with Rademacher ``z``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .datasets import Dataset
from .models import Model
from .numerics import SeededRng, sample_rademacher

LOSS_FLOOR = 1e-12
EMA_SCOPES = ("lazy", "coreset-aggregate")
AGGREGATE_KEY = -1


def hutchinson_diag(
    hvp_fn: Callable[[np.ndarray], np.ndarray], dim: int, num_samples: int, rng: SeededRng
) -> np.ndarray:
    """Mean of ``z * hvp_fn(z)`` over ``num_samples`` Rademacher probes."""
    if num_samples < 1:
        raise ValueError("num_samples must be >= 1")
    acc = np.zeros(dim)
    for _ in range(num_samples):
        z = sample_rademacher(dim, rng)
        acc += z * hvp_fn(z)
    return acc / num_samples


class EmaStats:
    """Bias-corrected exponential averages, one record per example.

    Each record counts its own updates, so an example that is seen rarely is
    corrected by ``1 - beta**(its own count)``. Under the
    ``coreset-aggregate`` scope the trainer keys everything to a single
    record instead. Records live in dense arrays grown on demand.
    """

    def __init__(self, beta1: float = 0.9, beta2: float = 0.999):
        if not (0.0 < beta1 < 1.0 and 0.0 < beta2 < 1.0):
            raise ValueError("beta1 and beta2 must lie in (0, 1)")
        self.beta1 = beta1
        self.beta2 = beta2
        self._row: dict = {}
        self._m = self._v = None
        self._n_grad = np.zeros(0, dtype=np.int64)
        self._n_hess = np.zeros(0, dtype=np.int64)
        self.last_t = np.zeros(0, dtype=np.int64)

    def __len__(self) -> int:
        return len(self._row)

    def __contains__(self, key) -> bool:
        return key in self._row

    def _rows(self, keys, dim: int) -> np.ndarray:
        if self._m is None:
            self._m = np.zeros((0, dim))
            self._v = np.zeros((0, dim))
        elif self._m.shape[1] != dim:
            raise ValueError(f"EMA records have dimension {self._m.shape[1]}, got {dim}")
        rows = np.empty(len(keys), dtype=np.int64)
        for i, key in enumerate(keys):
            row = self._row.get(key)
            if row is None:
                row = self._row[key] = len(self._row)
            rows[i] = row
        need = len(self._row)
        if need > self._m.shape[0]:
            cap = max(need, 2 * self._m.shape[0], 16)
            grow = cap - self._m.shape[0]
            self._m = np.vstack([self._m, np.zeros((grow, dim))])
            self._v = np.vstack([self._v, np.zeros((grow, dim))])
            self._n_grad = np.concatenate([self._n_grad, np.zeros(grow, dtype=np.int64)])
            self._n_hess = np.concatenate([self._n_hess, np.zeros(grow, dtype=np.int64)])
            self.last_t = np.concatenate([self.last_t, np.full(grow, -1, dtype=np.int64)])
        return rows

    def update_grads(self, keys, G, t: int = -1) -> np.ndarray:
        """Vectorised update for distinct ``keys``; returns the smoothed rows."""
        G = np.atleast_2d(np.asarray(G, dtype=np.float64))
        rows = self._rows(list(keys), G.shape[1])
        self._m[rows] = self.beta1 * self._m[rows] + (1.0 - self.beta1) * G
        self._n_grad[rows] += 1
        self.last_t[rows] = t
        return self._m[rows] / (1.0 - self.beta1 ** self._n_grad[rows])[:, None]

    def update_hessians(self, keys, diags, t: int = -1) -> np.ndarray:
        """Same for squared Hessian diagonals; returns their root-mean-square."""
        D = np.atleast_2d(np.asarray(diags, dtype=np.float64))
        rows = self._rows(list(keys), D.shape[1])
        self._v[rows] = self.beta2 * self._v[rows] + (1.0 - self.beta2) * D * D
        self._n_hess[rows] += 1
        self.last_t[rows] = t
        return np.sqrt(self._v[rows] / (1.0 - self.beta2 ** self._n_hess[rows])[:, None])

    def update_grad(self, key, g, t: int = -1) -> np.ndarray:
        return self.update_grads([key], g, t)[0]

    def update_hess(self, key, diag, t: int = -1) -> np.ndarray:
        return self.update_hessians([key], diag, t)[0]

    def grad_bar(self, key) -> np.ndarray:
        row = self._row[key]
        return self._m[row] / (1.0 - self.beta1 ** self._n_grad[row])

    def hess_bar(self, key) -> np.ndarray:
        row = self._row[key]
        return np.sqrt(self._v[row] / (1.0 - self.beta2 ** self._n_hess[row]))

    def count(self, key) -> tuple[int, int]:
        row = self._row[key]
        return int(self._n_grad[row]), int(self._n_hess[row])


def update_grad_ema(stats: EmaStats, example_index: int, g, t: int = -1) -> np.ndarray:
    return stats.update_grad(example_index, g, t)


def update_hess_ema(stats: EmaStats, example_index: int, diag_t, t: int = -1) -> np.ndarray:
    return stats.update_hess(example_index, diag_t, t)


@dataclass
class QuadraticSurrogate:
    anchor_w: np.ndarray
    anchor_loss: float
    g_bar: np.ndarray
    h_bar_diag: np.ndarray
    created_at: int = 0

    @property
    def h_norm(self) -> float:
        return float(np.linalg.norm(self.h_bar_diag))


def build_surrogate(
    model: Model,
    w_anchor,
    dataset: Dataset,
    indices,
    weights,
    stats: EmaStats,
    rng: SeededRng,
    num_hutchinson: int = 1,
    t: int = 0,
    ema_scope: str = "lazy",
) -> QuadraticSurrogate:
    """Fit the quadratic model on a coreset union at ``w_anchor``.

    ``indices`` may repeat (random subsets overlap); each distinct example
    gets one EMA update per build, and every occurrence contributes its
    weight to the means. Means are ``(1/|S|) * sum(weight * value)``.
    """
    idx = np.asarray(indices, dtype=np.int64)
    gam = np.asarray(weights, dtype=np.float64)
    if idx.size == 0:
        raise ValueError("coreset union is empty")
    if gam.shape != idx.shape:
        raise ValueError("weights and indices differ in length")
    if ema_scope not in EMA_SCOPES:
        raise ValueError(f"ema_scope must be one of {EMA_SCOPES}")
    w_anchor = np.asarray(w_anchor, dtype=np.float64)
    uniq, inverse = np.unique(idx, return_inverse=True)
    X, y = dataset.X[uniq], dataset.y[uniq]

    G = model.grads(w_anchor, X, y)
    L = model.losses(w_anchor, X, y)
    # per-example Hutchinson diagonals with shared probes
    diag = np.zeros_like(G)
    for _ in range(num_hutchinson):
        z = sample_rademacher(model.n_params, rng)
        diag += z * model.hvps(w_anchor, X, y, z)
    diag /= num_hutchinson

    n_s = idx.size
    anchor_loss = float(gam @ L[inverse] / n_s)
    if ema_scope == "lazy":
        keys = [int(k) for k in uniq]
        g_smooth = stats.update_grads(keys, G, t)
        h_smooth = stats.update_hessians(keys, diag, t)
        g_bar = gam @ g_smooth[inverse] / n_s
        h_bar = gam @ h_smooth[inverse] / n_s
    else:
        g_bar = stats.update_grad(AGGREGATE_KEY, gam @ G[inverse] / n_s, t)
        h_bar = stats.update_hess(AGGREGATE_KEY, gam @ diag[inverse] / n_s, t)
    return QuadraticSurrogate(w_anchor.copy(), anchor_loss, g_bar, h_bar, created_at=t)


def surrogate_value(Q: QuadraticSurrogate, delta) -> float:
    delta = np.asarray(delta, dtype=np.float64)
    if delta.shape != Q.g_bar.shape:
        raise ValueError(f"delta has length {delta.size}, surrogate expects {Q.g_bar.size}")
    return float(0.5 * np.dot(Q.h_bar_diag * delta, delta) + np.dot(Q.g_bar, delta) + Q.anchor_loss)


@dataclass(frozen=True)
class RhoResult:
    value: float
    loss_vanished: bool = False

    def __float__(self) -> float:
        return self.value


def rho(Q: QuadraticSurrogate, delta, actual_loss: float) -> RhoResult:
    """Relative gap between the surrogate and a probe of the true loss."""
    if actual_loss <= LOSS_FLOOR:
        return RhoResult(0.0, loss_vanished=True)
    return RhoResult(abs(surrogate_value(Q, delta) - actual_loss) / actual_loss)
