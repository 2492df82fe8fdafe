"""Adaptive mini-batch coreset training and the baselines it is compared to.

The main loop (:func:`run_crest`):

1. when an update is due, draw ``P`` random subsets of size ``r`` from the
   active examples, pick a weighted mini-batch coreset of size ``m`` from
   each by facility location on output-layer error vectors, and fit a
   quadratic model of the loss on the union of those coresets;
2. take ``T1`` momentum-SGD steps, each on one coreset from the pool;
3. compare the quadratic model with the mean loss on a fresh random probe
   ``V_r``; if the relative gap exceeds ``tau``, schedule a new pool and
   rescale ``T1`` and ``P`` by the shrinkage of the Hessian-diagonal norm.

Every ``T2`` iterations, examples whose observed losses all stayed below
``alpha`` over the window leave the active set.

Weight convention: selection weights ``gamma`` sum to the subset size.
Training and the quadratic fit use them rescaled to mean one over each
coreset, so a weighted batch mean estimates the subset mean gradient.
"""

from __future__ import annotations

import logging
import math
import time
from dataclasses import asdict, dataclass, field, fields

import numpy as np

from .datasets import Dataset
from .models import Model, accuracy, batch_weighted_grad, full_gradient, mean_loss
from .numerics import SeededRng, pairwise_distances
from .quadmodel import EMA_SCOPES, EmaStats, QuadraticSurrogate, build_surrogate, rho
from .submodular import SelectionProblem, assign_weights, lazy_greedy_select

log = logging.getLogger(__name__)

NEVER_REFRESH = math.inf
DECAY_SCHEDULES = ("none", "cosine")

# independent RNG streams, keyed by purpose
_STREAM_INIT, _STREAM_SELECT, _STREAM_ORDER, _STREAM_PROBE, _STREAM_HUTCH = range(5)


@dataclass
class TrainerConfig:
    m: int = 16
    r: int | None = None  # None: max(m, ceil(0.01 n))
    P0: int | None = None  # None: round(b)
    tau: float = 0.05
    alpha: float = 0.1
    h: float = 1.0
    b: float = 5.0
    T2: int = 20
    eta: float = 0.1
    momentum: float = 0.9
    N: int = 1000
    warmup_frac: float = 0.1
    decay: str = "none"
    beta1: float = 0.9
    beta2: float = 0.999
    seed: int = 0
    ema_scope: str = "lazy"
    num_hutchinson: int = 1
    drop: bool = True
    epoch_fraction: float = 0.1

    def resolved_r(self, n: int) -> int:
        r = self.r if self.r is not None else max(self.m, math.ceil(n / 100))
        return min(r, n)

    def resolved_P0(self) -> int:
        return self.P0 if self.P0 is not None else max(1, round(self.b))

    def validate(self, n: int | None = None) -> None:
        if self.m < 1:
            raise ValueError("m must be >= 1")
        if self.r is not None and self.r < self.m:
            raise ValueError("r must be >= m")
        if n is not None and self.m > n:
            raise ValueError(f"m={self.m} exceeds dataset size {n}")
        if not self.tau >= 0:
            raise ValueError("tau must be >= 0")
        if self.alpha < 0:
            raise ValueError("alpha must be >= 0")
        if self.h <= 0 or self.b <= 0:
            raise ValueError("h and b must be positive")
        if self.T2 < 1:
            raise ValueError("T2 must be >= 1")
        if not 0.0 <= self.momentum < 1.0:
            raise ValueError("momentum must lie in [0, 1)")
        if self.N < 0:
            raise ValueError("N must be >= 0")
        if not 0.0 <= self.warmup_frac <= 1.0:
            raise ValueError("warmup_frac must lie in [0, 1]")
        if self.decay not in DECAY_SCHEDULES:
            raise ValueError(f"decay must be one of {DECAY_SCHEDULES}")
        if self.ema_scope not in EMA_SCOPES:
            raise ValueError(f"ema_scope must be one of {EMA_SCOPES}")
        if self.num_hutchinson < 1:
            raise ValueError("num_hutchinson must be >= 1")
        if not 0.0 < self.epoch_fraction <= 1.0:
            raise ValueError("epoch_fraction must lie in (0, 1]")
        if self.P0 is not None and self.P0 < 1:
            raise ValueError("P0 must be >= 1")

    @classmethod
    def field_names(cls) -> list[str]:
        return [f.name for f in fields(cls)]


def learning_rate(config: TrainerConfig, t: int) -> float:
    """Linear warm-up over the first ``warmup_frac * N`` steps, then optional cosine decay."""
    warm = math.ceil(config.warmup_frac * config.N)
    lr = config.eta
    if warm and t < warm:
        return lr * (t + 1) / warm
    if config.decay == "cosine" and config.N > warm:
        frac = (t - warm) / (config.N - warm)
        lr *= 0.5 * (1.0 + math.cos(math.pi * frac))
    return lr


# -- pool -----------------------------------------------------------------------


@dataclass
class MiniBatchCoreset:
    source_subset: np.ndarray
    selected: np.ndarray
    weights: np.ndarray
    selected_at: int = 0

    @property
    def train_weights(self) -> np.ndarray:
        """Weights rescaled to mean one over the coreset."""
        total = self.weights.sum()
        return self.weights * (len(self.selected) / total)


@dataclass
class CoresetPool:
    batches: list[MiniBatchCoreset]
    order: np.ndarray = None
    cursor: int = 0

    def __post_init__(self):
        if not self.batches:
            raise ValueError("pool is empty")
        if self.order is None:
            self.order = np.arange(len(self.batches))

    def __len__(self) -> int:
        return len(self.batches)

    def next_batch(self, rng: SeededRng) -> MiniBatchCoreset:
        """Cycle through the pool without replacement, reshuffling when exhausted."""
        if self.cursor >= len(self.order):
            self.order = rng.permutation(len(self.batches))
            self.cursor = 0
        b = self.batches[self.order[self.cursor]]
        self.cursor += 1
        return b

    def union(self) -> tuple[np.ndarray, np.ndarray]:
        """Multiset union of (index, training weight) pairs."""
        idx = np.concatenate([b.selected for b in self.batches])
        w = np.concatenate([b.train_weights for b in self.batches])
        return idx, w

    def raw_union(self) -> tuple[np.ndarray, np.ndarray]:
        idx = np.concatenate([b.selected for b in self.batches])
        w = np.concatenate([b.weights for b in self.batches])
        return idx, w


# -- bookkeeping ------------------------------------------------------------------


class LossWindow:
    """Per-example loss observations inside the current drop window."""

    def __init__(self, n: int):
        self.count = np.zeros(n, dtype=np.int64)
        self.worst = np.full(n, -np.inf)

    def observe(self, idx, losses) -> None:
        idx = np.asarray(idx, dtype=np.int64)
        np.add.at(self.count, idx, 1)
        np.maximum.at(self.worst, idx, np.asarray(losses, dtype=np.float64))

    def reset(self) -> None:
        self.count[:] = 0
        self.worst[:] = -np.inf


class ForgettingTracker:
    """Counts correct -> incorrect transitions per example across observations."""

    def __init__(self, n: int):
        self.last = np.full(n, -1, dtype=np.int8)  # -1 unobserved, 0 wrong, 1 correct
        self.counts = np.zeros(n, dtype=np.int64)

    def observe(self, idx, correct) -> None:
        for i, c in zip(np.asarray(idx, dtype=np.int64), np.asarray(correct, dtype=bool)):
            if self.last[i] == 1 and not c:
                self.counts[i] += 1
            self.last[i] = 1 if c else 0

    @property
    def unobserved(self) -> np.ndarray:
        return self.last == -1


def forgetting_tracker(state: "TrainerState", idx, correct) -> np.ndarray:
    state.forgetting.observe(idx, correct)
    return state.forgetting.counts


@dataclass
class RunMetrics:
    method: str
    seed: int
    intervals: list = field(default_factory=list)
    updates: list = field(default_factory=list)
    diagnostics: list = field(default_factory=list)
    final: dict = field(default_factory=dict)
    grad_queries: int = 0
    selection_queries: int = 0
    training_queries: int = 0
    check_queries: int = 0
    selection_passes: int = 0
    subset_selections: int = 0
    training_steps: int = 0
    rho_checks: int = 0
    update_iters: list = field(default_factory=list)
    selection_counts: np.ndarray = None
    forgetting: np.ndarray = None
    dropped: list = field(default_factory=list)  # (iteration, index, loss at drop)
    converged: bool = False
    wall_ms: float = 0.0

    @property
    def updates_total(self) -> int:
        return len(self.update_iters)


@dataclass
class TrainerState:
    w: np.ndarray
    velocity: np.ndarray
    active: np.ndarray
    window: LossWindow
    forgetting: ForgettingTracker
    stats: EmaStats
    t: int = 0
    T1: int = 1
    P: int = 1
    h_norm_0: float | None = None
    update: bool = True
    pool: CoresetPool | None = None
    surrogate: QuadraticSurrogate | None = None
    n_selections: int = 0

    @classmethod
    def initial(cls, config: TrainerConfig, model: Model, dataset: Dataset, w0=None) -> "TrainerState":
        rng = SeededRng(config.seed).derive(_STREAM_INIT)
        w = model.init_params(rng) if w0 is None else np.array(w0, dtype=np.float64)
        return cls(
            w=w,
            velocity=np.zeros_like(w),
            active=dataset.active.copy(),
            window=LossWindow(dataset.n),
            forgetting=ForgettingTracker(dataset.n),
            stats=EmaStats(config.beta1, config.beta2),
            P=config.resolved_P0(),
        )


# -- algorithm steps ----------------------------------------------------------------


def select_pool(
    state: TrainerState,
    config: TrainerConfig,
    model: Model,
    dataset: Dataset,
    rng: SeededRng,
    metrics: RunMetrics | None = None,
) -> CoresetPool:
    """Select ``state.P`` mini-batch coresets at the current parameters.

    Subset ``p`` uses the stream ``rng.derive(p)`` so selections are
    independent of evaluation order.
    """
    active = np.flatnonzero(state.active)
    m = config.m
    if active.size < m:
        log.info("active set (%d) smaller than m=%d; pool falls back to the whole set", active.size, m)
        batch = MiniBatchCoreset(active, active, np.ones(active.size, dtype=np.int64), state.t)
        return CoresetPool([batch])
    r = min(config.resolved_r(dataset.n), active.size)
    batches = []
    for p in range(state.P):
        sub = np.sort(rng.derive(p).choice(active, r))
        X, y = dataset.X[sub], dataset.y[sub]
        E = model.output_errors(state.w, X, y)
        losses = model.losses(state.w, X, y)
        state.window.observe(sub, losses)
        problem = SelectionProblem(pairwise_distances(E), min(m, r))
        sel = lazy_greedy_select(problem)
        chosen = sub[sel.indices]
        batches.append(MiniBatchCoreset(sub, chosen, sel.weights, state.t))
        if metrics is not None:
            metrics.grad_queries += r
            metrics.selection_queries += r
            metrics.subset_selections += 1
            np.add.at(metrics.selection_counts, chosen, 1)
    order = rng.derive(state.P).permutation(len(batches))
    return CoresetPool(batches, order=order)


def train_interval(
    state: TrainerState,
    pool: CoresetPool,
    config: TrainerConfig,
    model: Model,
    dataset: Dataset,
    steps: int,
    rng: SeededRng,
    metrics: RunMetrics | None = None,
    after_step=None,
) -> TrainerState:
    """``steps`` momentum-SGD steps on coresets drawn from ``pool``.

    Momentum form: ``v <- mu * v + g``, ``w <- w - lr * v``.
    """
    for _ in range(steps):
        batch = pool.next_batch(rng)
        g = batch_weighted_grad(model, state.w, dataset, batch.selected, batch.train_weights)
        state.velocity = config.momentum * state.velocity + g
        state.w = state.w - learning_rate(config, state.t) * state.velocity
        state.t += 1
        if metrics is not None:
            metrics.grad_queries += batch.selected.size
            metrics.training_queries += batch.selected.size
            metrics.training_steps += 1
        if after_step is not None:
            after_step(state)
    return state


def drop_learned(state: TrainerState, config: TrainerConfig, model=None, dataset=None, metrics=None) -> np.ndarray:
    """Deactivate examples whose every loss seen in the window is below ``alpha``.

    Examples not observed in the window stay. At least ``m`` examples are
    always kept; when the guard binds, the lowest-loss candidates go first.
    The window is reset afterwards.
    """
    w = state.window
    cand = np.flatnonzero(state.active & (w.count > 0) & (w.worst < config.alpha))
    budget = int(state.active.sum()) - config.m
    if cand.size > budget:
        log.info("drop guard: keeping %d of %d droppable examples", cand.size - max(budget, 0), cand.size)
        cand = cand[np.argsort(w.worst[cand], kind="stable")[: max(budget, 0)]]
        cand = np.sort(cand)
    if cand.size:
        state.active[cand] = False
        if metrics is not None and model is not None:
            losses = model.losses(state.w, dataset.X[cand], dataset.y[cand])
            metrics.dropped.extend((state.t, int(i), float(l)) for i, l in zip(cand, losses))
    w.reset()
    return state.active


def check_and_refresh(
    state: TrainerState,
    config: TrainerConfig,
    model: Model,
    dataset: Dataset,
    rng: SeededRng,
    metrics: RunMetrics | None = None,
) -> str:
    """Probe the loss on a random subset and decide whether the pool is stale."""
    Q = state.surrogate
    if Q is None:
        raise ValueError("no surrogate to check")
    active = np.flatnonzero(state.active)
    r = min(config.resolved_r(dataset.n), active.size)
    probe = np.sort(rng.choice(active, r))
    X, y = dataset.X[probe], dataset.y[probe]
    losses = model.losses(state.w, X, y)
    correct = model.predict(state.w, X) == y
    state.window.observe(probe, losses)
    state.forgetting.observe(probe, correct)
    loss_vr = float(losses.mean())
    res = rho(Q, state.w - Q.anchor_w, loss_vr)
    if metrics is not None:
        metrics.grad_queries += r
        metrics.check_queries += r
        metrics.rho_checks += 1
    t1_used, p_used = state.T1, state.P
    if res.loss_vanished:
        decision = "keep"
        state.update = False
        if metrics is not None:
            metrics.converged = True
    elif res.value > config.tau:
        decision = "refresh"
        state.update = True
        h_t = Q.h_norm
        if h_t > 0.0 and state.h_norm_0 is not None:
            T1 = config.h * state.h_norm_0 / h_t
        else:
            T1 = config.N
        state.T1 = max(1, min(round(T1), max(config.N, 1)))
        state.P = max(1, round(config.b * state.T1))
    else:
        decision = "keep"
        state.update = False
    if metrics is not None:
        metrics.intervals.append(
            dict(
                iter=state.t,
                t1=t1_used,
                p=p_used,
                rho=res.value,
                refreshed=int(decision == "refresh"),
                active_n=int(state.active.sum()),
                loss_vr=loss_vr,
                acc_vr=float(correct.mean()),
                grad_queries_cum=metrics.grad_queries,
                wall_ms_cum=None,
            )
        )
    return decision


# -- full runs ----------------------------------------------------------------------


def _finalize(metrics: RunMetrics, model: Model, dataset: Dataset, w, started: float, timing: bool) -> RunMetrics:
    everyone = np.arange(dataset.n)
    metrics.final = dict(
        method=metrics.method,
        seed=metrics.seed,
        final_loss=mean_loss(model, w, dataset, everyone),
        final_acc=accuracy(model, w, dataset, everyone),
        updates_total=metrics.updates_total,
        grad_queries_total=metrics.grad_queries,
        wall_ms_total=None,
    )
    metrics.final_w = w
    metrics.wall_ms = (time.perf_counter() - started) * 1e3 if timing else 0.0
    metrics.final["wall_ms_total"] = metrics.wall_ms
    return metrics


def _stamp(metrics: RunMetrics, started: float, timing: bool) -> None:
    if metrics.intervals and metrics.intervals[-1]["wall_ms_cum"] is None:
        metrics.intervals[-1]["wall_ms_cum"] = (time.perf_counter() - started) * 1e3 if timing else 0.0


def pool_bias(model: Model, w, pool: CoresetPool, dataset: Dataset, active=None) -> dict:
    """Bias and spread of the pool's weighted coreset gradients against the
    full active-set gradient at ``w``."""
    idx = np.flatnonzero(dataset.active if active is None else active)
    full = full_gradient(model, w, dataset, idx)
    ests = np.array(
        [batch_weighted_grad(model, w, dataset, b.selected, b.train_weights) for b in pool.batches]
    )
    err = ests - full
    bias = float(np.linalg.norm(err.mean(axis=0)))
    fn = float(np.linalg.norm(full))
    return dict(
        bias=bias,
        variance=float(np.mean(np.sum(err**2, axis=1))),
        full_norm=fn,
        normalized_bias=bias / fn if fn > 1e-12 else 0.0,
    )


def run_crest(
    config: TrainerConfig,
    model: Model,
    dataset: Dataset,
    w0=None,
    diagnostics: bool = True,
    timing: bool = True,
) -> RunMetrics:
    config.validate(dataset.n)
    started = time.perf_counter()
    root = SeededRng(config.seed)
    rng_select = root.derive(_STREAM_SELECT)
    rng_order = root.derive(_STREAM_ORDER)
    rng_probe = root.derive(_STREAM_PROBE)
    rng_hutch = root.derive(_STREAM_HUTCH)
    state = TrainerState.initial(config, model, dataset, w0)
    metrics = RunMetrics("crest", config.seed, selection_counts=np.zeros(dataset.n, dtype=np.int64))
    metrics.state = state

    def after_step(s: TrainerState) -> None:
        if config.drop and s.t % config.T2 == 0:
            drop_learned(s, config, model, dataset, metrics)

    try:
        while state.t < config.N:
            if state.update:
                ev = state.n_selections
                state.pool = select_pool(state, config, model, dataset, rng_select.derive(ev), metrics)
                idx, wts = state.pool.union()
                state.surrogate = build_surrogate(
                    model, state.w, dataset, idx, wts, state.stats, rng_hutch.derive(ev),
                    num_hutchinson=config.num_hutchinson, t=state.t, ema_scope=config.ema_scope,
                )
                if state.h_norm_0 is None:
                    state.h_norm_0 = state.surrogate.h_norm
                state.n_selections += 1
                metrics.selection_passes += 1
                metrics.update_iters.append(state.t)
                row = dict(
                    update=state.n_selections,
                    iter=state.t,
                    t1=state.T1,
                    p=len(state.pool),
                    union_size=int(idx.size),
                    h_norm=state.surrogate.h_norm,
                    anchor_loss=state.surrogate.anchor_loss,
                    active_n=int(state.active.sum()),
                    normalized_bias=None,
                )
                if diagnostics:
                    pb = pool_bias(model, state.w, state.pool, dataset, state.active)
                    row["normalized_bias"] = pb["normalized_bias"]
                    metrics.diagnostics.append(
                        dict(iter=state.t, estimator="crest-pool", bias=pb["bias"],
                             variance=pb["variance"], normalized_bias=pb["normalized_bias"])
                    )
                metrics.updates.append(row)
            steps = min(state.T1, config.N - state.t)
            train_interval(state, state.pool, config, model, dataset, steps, rng_order, metrics, after_step)
            check_and_refresh(state, config, model, dataset, rng_probe, metrics)
            _stamp(metrics, started, timing)
    finally:
        metrics.forgetting = state.forgetting.counts.copy()
        metrics.final_active = state.active.copy()
        _finalize(metrics, model, dataset, state.w, started, timing)
    return metrics


def _epoch_batches(rng: SeededRng, members: np.ndarray, m: int):
    """One shuffled pass over ``members`` in batches of at most ``m`` (positions)."""
    order = rng.permutation(members.size)
    for lo in range(0, members.size, m):
        yield np.sort(order[lo : lo + m])


def _sgd_step(state: TrainerState, config: TrainerConfig, g: np.ndarray) -> None:
    state.velocity = config.momentum * state.velocity + g
    state.w = state.w - learning_rate(config, state.t) * state.velocity
    state.t += 1


def _log_probe(state, config, model, dataset, rng, metrics, started, timing, r) -> None:
    """Monitoring probe for baselines; not charged to the query budget."""
    probe = np.sort(rng.choice(np.arange(dataset.n), r))
    X, y = dataset.X[probe], dataset.y[probe]
    losses = model.losses(state.w, X, y)
    correct = model.predict(state.w, X) == y
    state.forgetting.observe(probe, correct)
    metrics.intervals.append(
        dict(iter=state.t, t1=None, p=None, rho=None, refreshed=0, active_n=dataset.n,
             loss_vr=float(losses.mean()), acc_vr=float(correct.mean()),
             grad_queries_cum=metrics.grad_queries, wall_ms_cum=None)
    )
    _stamp(metrics, started, timing)


def run_random_baseline(
    config: TrainerConfig, model: Model, dataset: Dataset, w0=None, log_every: int | None = None, timing: bool = True
) -> RunMetrics:
    """Plain momentum SGD on uniformly shuffled mini-batches of size ``m``."""
    config.validate(dataset.n)
    started = time.perf_counter()
    root = SeededRng(config.seed)
    rng_order, rng_probe = root.derive(_STREAM_ORDER), root.derive(_STREAM_PROBE)
    state = TrainerState.initial(config, model, dataset, w0)
    metrics = RunMetrics("random", config.seed, selection_counts=np.zeros(dataset.n, dtype=np.int64))
    everyone = np.arange(dataset.n)
    r = config.resolved_r(dataset.n)
    every = log_every or config.T2
    while state.t < config.N:
        for pos in _epoch_batches(rng_order, everyone, config.m):
            if state.t >= config.N:
                break
            g = batch_weighted_grad(model, state.w, dataset, everyone[pos], None)
            _sgd_step(state, config, g)
            metrics.grad_queries += pos.size
            metrics.training_queries += pos.size
            metrics.training_steps += 1
            if state.t % every == 0 or state.t == config.N:
                _log_probe(state, config, model, dataset, rng_probe, metrics, started, timing, r)
    metrics.forgetting = state.forgetting.counts.copy()
    return _finalize(metrics, model, dataset, state.w, started, timing)


def run_full_batch(config: TrainerConfig, model: Model, dataset: Dataset, w0=None, **kw) -> RunMetrics:
    """Full-batch gradient descent with the same momentum and schedule."""
    from dataclasses import replace

    metrics = run_random_baseline(replace(config, m=dataset.n, r=None), model, dataset, w0, **kw)
    metrics.method = "full"
    metrics.final["method"] = "full"
    return metrics


def select_epoch_coreset(model: Model, w, dataset: Dataset, k: int, idx=None):
    """Facility-location coreset of size ``k`` from the whole data at ``w``.

    Returns (indices, gamma) with gamma summing to the number of candidates.
    """
    idx = np.arange(dataset.n) if idx is None else np.asarray(idx, dtype=np.int64)
    E = model.output_errors(w, dataset.X[idx], dataset.y[idx])
    problem = SelectionProblem(pairwise_distances(E), k)
    if k == idx.size:
        chosen = list(range(idx.size))
        return idx, assign_weights(problem, chosen)
    sel = lazy_greedy_select(problem)
    return idx[sel.indices], sel.weights


def run_epoch_coreset_baseline(
    config: TrainerConfig,
    model: Model,
    dataset: Dataset,
    fraction: float | None = None,
    w0=None,
    diagnostics: bool = True,
    log_every: int | None = None,
    timing: bool = True,
) -> RunMetrics:
    """Reselect one weighted coreset from the full data at every epoch boundary.

    An epoch is one shuffled pass over the current coreset in weighted
    mini-batches of size ``m``.
    """
    fraction = config.epoch_fraction if fraction is None else fraction
    if not 0.0 < fraction <= 1.0:
        raise ValueError("fraction must lie in (0, 1]")
    config.validate(dataset.n)
    started = time.perf_counter()
    root = SeededRng(config.seed)
    rng_order, rng_probe = root.derive(_STREAM_ORDER), root.derive(_STREAM_PROBE)
    state = TrainerState.initial(config, model, dataset, w0)
    metrics = RunMetrics("epoch-coreset", config.seed, selection_counts=np.zeros(dataset.n, dtype=np.int64))
    k = max(1, math.ceil(fraction * dataset.n - 1e-9))
    r = config.resolved_r(dataset.n)
    every = log_every or config.T2
    while state.t < config.N:
        members, gamma = select_epoch_coreset(model, state.w, dataset, k)
        metrics.grad_queries += dataset.n
        metrics.selection_queries += dataset.n
        metrics.selection_passes += 1
        metrics.update_iters.append(state.t)
        np.add.at(metrics.selection_counts, members, 1)
        tw = gamma * (k / gamma.sum())
        batch = MiniBatchCoreset(np.arange(dataset.n), members, gamma, state.t)
        row = dict(update=len(metrics.update_iters), iter=state.t, t1=None, p=1, union_size=k,
                   h_norm=None, anchor_loss=None, active_n=dataset.n, normalized_bias=None)
        if diagnostics:
            pb = pool_bias(model, state.w, CoresetPool([batch]), dataset)
            row["normalized_bias"] = pb["normalized_bias"]
            metrics.diagnostics.append(dict(iter=state.t, estimator="epoch-coreset", bias=pb["bias"],
                                            variance=pb["variance"], normalized_bias=pb["normalized_bias"]))
        metrics.updates.append(row)
        for pos in _epoch_batches(rng_order, members, config.m):
            if state.t >= config.N:
                break
            g = batch_weighted_grad(model, state.w, dataset, members[pos], tw[pos])
            _sgd_step(state, config, g)
            metrics.grad_queries += pos.size
            metrics.training_queries += pos.size
            metrics.training_steps += 1
            if state.t % every == 0 or state.t == config.N:
                _log_probe(state, config, model, dataset, rng_probe, metrics, started, timing, r)
    metrics.forgetting = state.forgetting.counts.copy()
    return _finalize(metrics, model, dataset, state.w, started, timing)


def config_dict(config: TrainerConfig) -> dict:
    return asdict(config)
