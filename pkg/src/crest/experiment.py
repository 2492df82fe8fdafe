"""Run one configured experiment and persist its tables and manifest."""

from __future__ import annotations

import logging
from dataclasses import replace
from pathlib import Path

from .config import ExperimentConfig, render_config
from .datasets import Dataset
from .diagnostics import EstimatorSpec, gradient_estimator_diagnostics
from .metrics_io import write_run
from .numerics import SeededRng
from .trainer import RunMetrics, run_crest, run_epoch_coreset_baseline, run_random_baseline

log = logging.getLogger(__name__)

# stream for end-of-run estimator diagnostics, apart from the trainer's streams
_STREAM_SNAPSHOT = 7


def snapshot_rows(cfg: ExperimentConfig, model, w, dataset: Dataset, iteration: int) -> list[dict]:
    """Monte-Carlo bias/variance rows for the standard estimators at ``w``."""
    trials = cfg.diagnostics.trials
    m = cfg.trainer.m
    r = cfg.diagnostics.snapshot_r or 4 * m
    r = min(r, dataset.n)
    specs = [
        EstimatorSpec("random", m=m),
        EstimatorSpec("random", m=r),
        EstimatorSpec("crest", m=m, r=r),
        EstimatorSpec("epoch-coreset", m=m, fraction=cfg.trainer.epoch_fraction),
    ]
    root = SeededRng(cfg.trainer.seed).derive(_STREAM_SNAPSHOT)
    rows = []
    for i, spec in enumerate(specs):
        res = gradient_estimator_diagnostics(model, w, dataset, spec, trials, root.derive(i))
        rows.append(dict(iter=iteration, estimator=res.estimator, bias=res.bias,
                         variance=res.variance, normalized_bias=res.normalized_bias))
    return rows


def execute(cfg: ExperimentConfig, dataset: Dataset) -> RunMetrics:
    model = cfg.model.build(dataset.d, dataset.n_classes)
    tc = cfg.trainer
    d = cfg.diagnostics
    log_every = d.log_every or None
    if cfg.method == "crest":
        metrics = run_crest(tc, model, dataset, diagnostics=d.enabled, timing=d.timing)
    elif cfg.method == "random":
        metrics = run_random_baseline(tc, model, dataset, log_every=log_every, timing=d.timing)
    else:
        metrics = run_epoch_coreset_baseline(
            tc, model, dataset, diagnostics=d.enabled, log_every=log_every, timing=d.timing
        )
    if d.trials:
        metrics.diagnostics.extend(snapshot_rows(cfg, model, metrics.final_w, dataset, tc.N))
    return metrics


def run_to_dir(cfg: ExperimentConfig, out_dir, base: Path | None = None) -> RunMetrics:
    """Execute ``cfg`` and write the four tables plus ``manifest.txt`` to ``out_dir``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    dataset = cfg.load_data(base)
    manifest = replace(cfg, output_dir=str(out))
    if cfg.dataset_kind == "file":
        path = Path(cfg.dataset_path)
        if not path.is_absolute() and base is not None:
            manifest = replace(manifest, dataset_path=str((base / path).resolve()))
    (out / "manifest.txt").write_text(render_config(manifest), encoding="utf-8")
    metrics = execute(cfg, dataset)
    write_run(out, metrics)
    return metrics
