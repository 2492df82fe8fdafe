"""Monte-Carlo bias and variance of mini-batch gradient estimators.

For an estimator ``g_hat`` of the full gradient ``g`` at fixed parameters:

    bias     = || mean over trials of g_hat - g ||
    variance = mean over trials of || g_hat - g ||**2

``stderr`` is ``sqrt(variance / trials)``, the scale of the bias an unbiased
estimator shows from sampling noise alone.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .datasets import Dataset
from .models import Model, batch_weighted_grad, full_gradient
from .numerics import SeededRng, pairwise_distances
from .quadmodel import LOSS_FLOOR
from .submodular import SelectionProblem, lazy_greedy_select
from .trainer import CoresetPool, select_epoch_coreset

ESTIMATORS = ("full", "random", "crest", "epoch-coreset")


@dataclass(frozen=True)
class EstimatorSpec:
    """``random`` uses batch size ``m``; ``crest`` selects ``m`` out of a random
    ``r``; ``epoch-coreset`` draws ``m`` from one coreset of ``fraction * n``."""

    kind: str
    m: int = 16
    r: int = 64
    fraction: float = 0.1

    def __post_init__(self):
        if self.kind not in ESTIMATORS:
            raise ValueError(f"unknown estimator {self.kind!r}; expected one of {ESTIMATORS}")

    @property
    def label(self) -> str:
        if self.kind == "random":
            return f"random-{self.m}"
        if self.kind == "crest":
            return f"crest-{self.m}of{self.r}"
        if self.kind == "epoch-coreset":
            return f"epoch-coreset-{self.fraction:g}"
        return "full"


@dataclass
class DiagnosticResult:
    estimator: str
    bias: float
    variance: float
    stderr: float
    full_norm: float
    trials: int

    @property
    def normalized_bias(self) -> float:
        return self.bias / self.full_norm if self.full_norm > LOSS_FLOOR else 0.0


def crest_coreset(model: Model, w, dataset: Dataset, subset: np.ndarray, m: int):
    """Mini-batch coreset of ``m`` from ``subset``; returns (indices, mean-one weights)."""
    E = model.output_errors(w, dataset.X[subset], dataset.y[subset])
    sel = lazy_greedy_select(SelectionProblem(pairwise_distances(E), min(m, subset.size)))
    gam = sel.weights.astype(np.float64)
    return subset[sel.indices], gam * (len(sel.indices) / gam.sum())


def gradient_estimator_diagnostics(
    model: Model,
    w,
    dataset: Dataset,
    estimator: EstimatorSpec,
    trials: int,
    rng: SeededRng,
) -> DiagnosticResult:
    if trials < 2:
        raise ValueError("trials must be >= 2")
    active = dataset.active_indices()
    full = full_gradient(model, w, dataset, active)
    ests = np.empty((trials, full.size))
    if estimator.kind == "full":
        ests[:] = full
    elif estimator.kind == "random":
        for i in range(trials):
            batch = np.sort(rng.choice(active, estimator.m))
            ests[i] = batch_weighted_grad(model, w, dataset, batch)
    elif estimator.kind == "crest":
        for i in range(trials):
            sub = np.sort(rng.choice(active, min(estimator.r, active.size)))
            idx, tw = crest_coreset(model, w, dataset, sub, estimator.m)
            ests[i] = batch_weighted_grad(model, w, dataset, idx, tw)
    else:
        k = max(1, math.ceil(estimator.fraction * active.size - 1e-9))
        members, gamma = select_epoch_coreset(model, w, dataset, k, active)
        tw = gamma * (k / gamma.sum())
        for i in range(trials):
            pos = np.sort(rng.choice(np.arange(members.size), min(estimator.m, members.size)))
            ests[i] = batch_weighted_grad(model, w, dataset, members[pos], tw[pos])
    err = ests - full
    var = float(np.mean(np.sum(err**2, axis=1)))
    return DiagnosticResult(
        estimator=estimator.label,
        bias=float(np.linalg.norm(err.mean(axis=0))),
        variance=var,
        stderr=math.sqrt(var / trials),
        full_norm=float(np.linalg.norm(full)),
        trials=trials,
    )


def normalized_bias(model: Model, w_anchor, pool: CoresetPool, dataset: Dataset) -> float:
    """Norm of the pool-mean coreset gradient error over the full-gradient norm.

    Returns 0 when the full gradient vanishes (converged).
    """
    active = dataset.active_indices()
    full = full_gradient(model, w_anchor, dataset, active)
    fn = float(np.linalg.norm(full))
    if fn <= LOSS_FLOOR:
        return 0.0
    mean_est = np.mean(
        [batch_weighted_grad(model, w_anchor, dataset, b.selected, b.train_weights) for b in pool.batches],
        axis=0,
    )
    return float(np.linalg.norm(mean_est - full)) / fn
