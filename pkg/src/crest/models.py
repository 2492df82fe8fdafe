"""Small differentiable classifiers with hand-derived derivatives.

Every model works on batches: ``losses``, ``grads`` and ``hvps`` return one
row per example, so per-example quantities (needed for selection, EMAs and
drop bookkeeping) come out of a single vectorised pass. Parameters are a
flat float64 vector; each model documents its layout.

Hessian-vector products use the R-operator (forward-mode differentiation of
the backward pass), so they are exact rather than finite-difference.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .datasets import Dataset, Example
from .numerics import SeededRng

MODEL_KINDS = ("softmax-regression", "two-layer-mlp", "diag-quadratic")


def _softmax_and_nll(Z: np.ndarray, y: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Probabilities and cross-entropy per row, via max-shifted log-sum-exp.

    The loss is written as ``(max - z_y) + log1p(sum of the non-max terms)``
    so that confident correct predictions keep their tiny loss instead of
    rounding to exactly zero through ``log(1 + tiny)``.
    """
    b = Z.shape[0]
    top = np.argmax(Z, axis=1)
    zmax = Z[np.arange(b), top]
    E = np.exp(Z - zmax[:, None])
    s = E.sum(axis=1)
    # the max term contributes exactly 1; summing the rest avoids cancellation
    E_other = E.copy()
    E_other[np.arange(b), top] = 0.0
    others = E_other.sum(axis=1)
    nll = (zmax - Z[np.arange(b), y]) + np.log1p(others)
    P = E / s[:, None]
    return P, nll


def _onehot(y: np.ndarray, K: int) -> np.ndarray:
    Y = np.zeros((y.shape[0], K))
    Y[np.arange(y.shape[0]), y] = 1.0
    return Y


class Model:
    """Base class. Subclasses fill in the batched primitives."""

    kind: str = ""
    input_dim: int
    n_classes: int
    n_params: int

    def _check(self, w: np.ndarray, X: np.ndarray, y: np.ndarray | None = None):
        w = np.asarray(w, dtype=np.float64)
        if w.shape != (self.n_params,):
            raise ValueError(
                f"parameter vector has length {w.size}, model expects {self.n_params}"
            )
        X = np.asarray(X, dtype=np.float64)
        if X.ndim == 1:
            X = X[None, :]
        if X.shape[1] != self.input_dim:
            raise ValueError(
                f"features have dimension {X.shape[1]}, model expects {self.input_dim}"
            )
        if y is not None:
            y = np.atleast_1d(np.asarray(y, dtype=np.int64))
            if y.shape[0] != X.shape[0]:
                raise ValueError("features and labels disagree on batch size")
            if np.any((y < 0) | (y >= self.n_classes)):
                raise ValueError(f"labels must lie in [0, {self.n_classes})")
        return w, X, y

    def init_params(self, rng: SeededRng | None = None) -> np.ndarray:
        return np.zeros(self.n_params)

    def logits(self, w, X) -> np.ndarray:
        raise NotImplementedError

    def losses(self, w, X, y) -> np.ndarray:
        raise NotImplementedError

    def output_errors(self, w, X, y) -> np.ndarray:
        """Gradient of the loss w.r.t. the output logits, one row per example."""
        raise NotImplementedError

    def grads(self, w, X, y) -> np.ndarray:
        raise NotImplementedError

    def hvps(self, w, X, y, v) -> np.ndarray:
        """Per-example Hessian-vector products, shape ``(batch, n_params)``."""
        raise NotImplementedError

    def predict(self, w, X) -> np.ndarray:
        return np.argmax(self.logits(w, X), axis=1)

    def __repr__(self) -> str:
        return f"{type(self).__name__}(d={self.input_dim}, K={self.n_classes}, params={self.n_params})"


class SoftmaxRegression(Model):
    """Multinomial logistic regression.

    Layout: ``W`` (K x d, row-major), then ``b`` (K) when ``bias`` is set.
    """

    kind = "softmax-regression"

    def __init__(self, input_dim: int, n_classes: int, bias: bool = False):
        if input_dim < 1 or n_classes < 2:
            raise ValueError("need input_dim >= 1 and n_classes >= 2")
        self.input_dim = input_dim
        self.n_classes = n_classes
        self.bias = bias
        self.n_params = n_classes * input_dim + (n_classes if bias else 0)

    def _unpack(self, w):
        K, d = self.n_classes, self.input_dim
        W = w[: K * d].reshape(K, d)
        b = w[K * d :] if self.bias else None
        return W, b

    def logits(self, w, X):
        w, X, _ = self._check(w, X)
        W, b = self._unpack(w)
        Z = X @ W.T
        if b is not None:
            Z = Z + b
        return Z

    def _forward(self, w, X, y):
        w, X, y = self._check(w, X, y)
        Z = self.logits(w, X)
        P, nll = _softmax_and_nll(Z, y)
        return w, X, y, P, nll

    def losses(self, w, X, y):
        return self._forward(w, X, y)[4]

    def output_errors(self, w, X, y):
        _, _, y, P, _ = self._forward(w, X, y)
        return P - _onehot(y, self.n_classes)

    def grads(self, w, X, y):
        _, X, y, P, _ = self._forward(w, X, y)
        E = P - _onehot(y, self.n_classes)
        G = (E[:, :, None] * X[:, None, :]).reshape(X.shape[0], -1)
        if self.bias:
            G = np.hstack([G, E])
        return G

    def hvps(self, w, X, y, v):
        _, X, y, P, _ = self._forward(w, X, y)
        v = np.asarray(v, dtype=np.float64)
        if v.shape != (self.n_params,):
            raise ValueError("direction vector has the wrong length")
        VW, Vb = self._unpack(v)
        RZ = X @ VW.T
        if Vb is not None:
            RZ = RZ + Vb
        RE = P * RZ - P * (P * RZ).sum(axis=1, keepdims=True)
        out = (RE[:, :, None] * X[:, None, :]).reshape(X.shape[0], -1)
        if self.bias:
            out = np.hstack([out, RE])
        return out


class TwoLayerMLP(Model):
    """One tanh hidden layer followed by a linear softmax layer.

    Layout: ``W1`` (hidden x d), ``b1`` (hidden, optional), ``W2`` (K x hidden),
    ``b2`` (K, optional).
    """

    kind = "two-layer-mlp"

    def __init__(self, input_dim: int, hidden: int, n_classes: int, bias: bool = False):
        if input_dim < 1 or hidden < 1 or n_classes < 2:
            raise ValueError("need input_dim >= 1, hidden >= 1 and n_classes >= 2")
        self.input_dim = input_dim
        self.hidden = hidden
        self.n_classes = n_classes
        self.bias = bias
        nb = 1 if bias else 0
        self.n_params = hidden * input_dim + nb * hidden + n_classes * hidden + nb * n_classes

    def init_params(self, rng: SeededRng | None = None) -> np.ndarray:
        # tanh units need broken symmetry; zero init would freeze W1
        rng = rng if rng is not None else SeededRng(0)
        W1 = rng.normal(size=(self.hidden, self.input_dim)) / np.sqrt(self.input_dim)
        W2 = rng.normal(size=(self.n_classes, self.hidden)) / np.sqrt(self.hidden)
        parts = [W1.ravel()]
        if self.bias:
            parts.append(np.zeros(self.hidden))
        parts.append(W2.ravel())
        if self.bias:
            parts.append(np.zeros(self.n_classes))
        return np.concatenate(parts)

    def _unpack(self, w):
        d, H, K = self.input_dim, self.hidden, self.n_classes
        i = 0
        W1 = w[i : i + H * d].reshape(H, d)
        i += H * d
        b1 = None
        if self.bias:
            b1 = w[i : i + H]
            i += H
        W2 = w[i : i + K * H].reshape(K, H)
        i += K * H
        b2 = w[i : i + K] if self.bias else None
        return W1, b1, W2, b2

    def _pack(self, W1, b1, W2, b2) -> np.ndarray:
        n = W1.shape[0]
        parts = [W1.reshape(n, -1)]
        if self.bias:
            parts.append(b1)
        parts.append(W2.reshape(n, -1))
        if self.bias:
            parts.append(b2)
        return np.hstack(parts)

    def _hidden(self, w, X):
        W1, b1, W2, b2 = self._unpack(w)
        A = X @ W1.T
        if b1 is not None:
            A = A + b1
        Hh = np.tanh(A)
        Z = Hh @ W2.T
        if b2 is not None:
            Z = Z + b2
        return Hh, Z

    def logits(self, w, X):
        w, X, _ = self._check(w, X)
        return self._hidden(w, X)[1]

    def _forward(self, w, X, y):
        w, X, y = self._check(w, X, y)
        Hh, Z = self._hidden(w, X)
        P, nll = _softmax_and_nll(Z, y)
        return w, X, y, Hh, P, nll

    def losses(self, w, X, y):
        return self._forward(w, X, y)[5]

    def output_errors(self, w, X, y):
        _, _, y, _, P, _ = self._forward(w, X, y)
        return P - _onehot(y, self.n_classes)

    def grads(self, w, X, y):
        w, X, y, Hh, P, _ = self._forward(w, X, y)
        _, _, W2, _ = self._unpack(w)
        E = P - _onehot(y, self.n_classes)
        dA = (E @ W2) * (1.0 - Hh**2)
        gW1 = dA[:, :, None] * X[:, None, :]
        gW2 = E[:, :, None] * Hh[:, None, :]
        return self._pack(gW1, dA, gW2, E)

    def hvps(self, w, X, y, v):
        w, X, y, Hh, P, _ = self._forward(w, X, y)
        v = np.asarray(v, dtype=np.float64)
        if v.shape != (self.n_params,):
            raise ValueError("direction vector has the wrong length")
        _, _, W2, _ = self._unpack(w)
        V1, Vb1, V2, Vb2 = self._unpack(v)
        E = P - _onehot(y, self.n_classes)
        S = 1.0 - Hh**2
        dH = E @ W2

        RA = X @ V1.T
        if Vb1 is not None:
            RA = RA + Vb1
        RH = S * RA
        RZ = RH @ W2.T + Hh @ V2.T
        if Vb2 is not None:
            RZ = RZ + Vb2
        RE = P * RZ - P * (P * RZ).sum(axis=1, keepdims=True)

        RdH = RE @ W2 + E @ V2
        RdA = RdH * S + dH * (-2.0 * Hh * RH)
        RgW1 = RdA[:, :, None] * X[:, None, :]
        RgW2 = RE[:, :, None] * Hh[:, None, :] + E[:, :, None] * RH[:, None, :]
        return self._pack(RgW1, RdA, RgW2, RE)


class DiagonalQuadratic(Model):
    """Test model whose per-example loss is ``0.5 * sum(c * (w - center)**2) + offset``.

    Features are ignored. The Hessian is ``diag(c)`` for every example, which
    makes the quadratic surrogate exact and Hutchinson's estimate exact with a
    single probe. ``offset`` keeps the loss away from zero.
    """

    kind = "diag-quadratic"

    def __init__(self, curvature, center=None, offset: float = 1.0, input_dim: int = 1):
        self.curvature = np.asarray(curvature, dtype=np.float64)
        if np.any(self.curvature < 0):
            raise ValueError("curvature must be nonnegative")
        self.center = (
            np.zeros_like(self.curvature) if center is None else np.asarray(center, dtype=np.float64)
        )
        self.offset = float(offset)
        self.n_params = self.curvature.size
        self.input_dim = input_dim
        self.n_classes = 1

    def logits(self, w, X):
        w, X, _ = self._check(w, X)
        return np.zeros((X.shape[0], 1))

    def losses(self, w, X, y):
        w, X, _ = self._check(w, X)
        r = w - self.center
        return np.full(X.shape[0], 0.5 * np.dot(self.curvature * r, r) + self.offset)

    def grads(self, w, X, y):
        w, X, _ = self._check(w, X)
        return np.tile(self.curvature * (w - self.center), (X.shape[0], 1))

    def output_errors(self, w, X, y):
        return self.grads(w, X, y)

    def hvps(self, w, X, y, v):
        w, X, _ = self._check(w, X)
        return np.tile(self.curvature * np.asarray(v, dtype=np.float64), (X.shape[0], 1))


def make_model(kind: str, input_dim: int, n_classes: int, hidden: int = 32, bias: bool = False) -> Model:
    if kind == "softmax-regression":
        return SoftmaxRegression(input_dim, n_classes, bias=bias)
    if kind == "two-layer-mlp":
        return TwoLayerMLP(input_dim, hidden, n_classes, bias=bias)
    raise ValueError(f"unknown model kind {kind!r}; expected one of {MODEL_KINDS[:2]}")


# -- single-example and index-set conveniences ---------------------------------


def loss(model: Model, w, ex: Example) -> float:
    return float(model.losses(w, ex.features, [ex.label])[0])


def grad(model: Model, w, ex: Example) -> np.ndarray:
    return model.grads(w, ex.features, [ex.label])[0]


def last_layer_grad(model: Model, w, ex: Example) -> np.ndarray:
    """Softmax probabilities minus the one-hot label."""
    return model.output_errors(w, ex.features, [ex.label])[0]


def _indexed(dataset: Dataset, indices, weights):
    idx = np.asarray(indices, dtype=np.int64)
    if idx.size == 0:
        raise ValueError("index set is empty")
    gam = np.ones(idx.size) if weights is None else np.asarray(weights, dtype=np.float64)
    if gam.shape != idx.shape:
        raise ValueError("weights and indices differ in length")
    if np.any(gam < 0):
        raise ValueError("weights must be nonnegative")
    return idx, gam


def batch_weighted_grad(model: Model, w, dataset: Dataset, indices, weights=None) -> np.ndarray:
    """``(1/|S|) * sum_j weights[j] * grad_j`` over the index set ``S``."""
    idx, gam = _indexed(dataset, indices, weights)
    G = model.grads(w, dataset.X[idx], dataset.y[idx])
    return gam @ G / idx.size


def hvp(model: Model, w, dataset: Dataset, indices, weights, v) -> np.ndarray:
    """Weighted-mean Hessian over the index set, applied to ``v``."""
    idx, gam = _indexed(dataset, indices, weights)
    HV = model.hvps(w, dataset.X[idx], dataset.y[idx], v)
    return gam @ HV / idx.size


def mean_loss(model: Model, w, dataset: Dataset, indices=None) -> float:
    idx = dataset.active_indices() if indices is None else np.asarray(indices, dtype=np.int64)
    return float(np.mean(model.losses(w, dataset.X[idx], dataset.y[idx])))


def accuracy(model: Model, w, dataset: Dataset, indices=None) -> float:
    idx = dataset.active_indices() if indices is None else np.asarray(indices, dtype=np.int64)
    return float(np.mean(model.predict(w, dataset.X[idx]) == dataset.y[idx]))


def full_gradient(model: Model, w, dataset: Dataset, indices=None) -> np.ndarray:
    idx = dataset.active_indices() if indices is None else np.asarray(indices, dtype=np.int64)
    return model.grads(w, dataset.X[idx], dataset.y[idx]).mean(axis=0)


@dataclass(frozen=True)
class ModelSpec:
    kind: str = "softmax-regression"
    hidden: int = 32
    bias: bool = False

    def build(self, input_dim: int, n_classes: int) -> Model:
        return make_model(self.kind, input_dim, n_classes, hidden=self.hidden, bias=self.bias)
