"""Experiment configuration files.

The format is line based: ``key = value`` with ``#`` comments and dotted keys
for nesting. Example::

    method = crest
    dataset.kind = synthetic
    dataset.n = 2000
    model.kind = softmax-regression
    trainer.N = 1500
    trainer.seed = 0
    output.dir = runs/crest

Unknown keys, malformed lines and bad values raise :class:`ConfigError`
carrying the offending line number.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

from . import __version__
from .datasets import Dataset, SyntheticSpec, generate_synthetic, load_dataset
from .models import MODEL_KINDS, ModelSpec
from .trainer import TrainerConfig

METHODS = ("crest", "random", "epoch-coreset")
DATASET_KINDS = ("synthetic", "file")


class ConfigError(ValueError):
    """Parse or validation failure; ``line`` is 1-based when known."""

    def __init__(self, message: str, line: int | None = None, source: str | None = None):
        self.line = line
        self.source = source
        where = ""
        if source is not None and line is not None:
            where = f"{source}:{line}: "
        elif line is not None:
            where = f"line {line}: "
        super().__init__(where + message)


class MissingField(ConfigError):
    def __init__(self, name: str, source: str | None = None):
        self.field = name
        super().__init__(f"missing required field '{name}'", None, source)


@dataclass
class DiagnosticsConfig:
    enabled: bool = True  # pool bias at every refresh
    timing: bool = True  # False writes zeros in the wall-clock columns
    log_every: int = 0  # baseline probe cadence; 0 means trainer.T2
    trials: int = 0  # end-of-run Monte-Carlo estimator rows; 0 disables
    snapshot_r: int = 0  # subset size for the crest estimator; 0 means 4 * m


@dataclass
class ExperimentConfig:
    method: str
    dataset_kind: str
    synthetic: SyntheticSpec
    dataset_seed: int
    dataset_path: str | None
    model: ModelSpec
    trainer: TrainerConfig
    output_dir: str | None
    diagnostics: DiagnosticsConfig = field(default_factory=DiagnosticsConfig)

    def load_data(self, base: Path | None = None) -> Dataset:
        if self.dataset_kind == "file":
            path = Path(self.dataset_path)
            if not path.is_absolute() and base is not None:
                path = base / path
            return load_dataset(path)
        return generate_synthetic(self.synthetic, self.dataset_seed)


def _parse_bool(text: str) -> bool:
    low = text.lower()
    if low in ("true", "yes", "1", "on"):
        return True
    if low in ("false", "no", "0", "off"):
        return False
    raise ValueError(f"expected a boolean, got {text!r}")


def _parse_optional_int(text: str):
    return None if text.lower() in ("none", "auto", "") else int(text)


def _parse_float(text: str) -> float:
    low = text.lower()
    if low in ("inf", "+inf", "infinity", "never"):
        return math.inf
    return float(text)


def _converter(annotation):
    ann = str(annotation)
    if "None" in ann and "int" in ann:
        return _parse_optional_int
    if "bool" in ann:
        return _parse_bool
    if "int" in ann:
        return int
    if "float" in ann:
        return _parse_float
    return str


_SYNTH_FIELDS = {f.name: _converter(f.type) for f in fields(SyntheticSpec)}
_MODEL_FIELDS = {f.name: _converter(f.type) for f in fields(ModelSpec)}
_TRAINER_FIELDS = {f.name: _converter(f.type) for f in fields(TrainerConfig)}
_DIAG_FIELDS = {f.name: _converter(f.type) for f in fields(DiagnosticsConfig)}
_SCALAR = {
    "method": str,
    "version": str,
    "dataset.kind": str,
    "dataset.path": str,
    "dataset.seed": int,
    "output.dir": str,
}


def _key_converter(key: str):
    if key in _SCALAR:
        return _SCALAR[key]
    section, _, name = key.partition(".")
    table = {
        "dataset": _SYNTH_FIELDS,
        "model": _MODEL_FIELDS,
        "trainer": _TRAINER_FIELDS,
        "diagnostics": _DIAG_FIELDS,
    }.get(section)
    if table is None or name not in table:
        return None
    return table[name]


def parse_lines(text: str, source: str | None = None) -> dict:
    """``{key: (value, line)}`` with values converted to their field types."""
    out: dict = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"expected 'key = value', got {raw.strip()!r}", lineno, source)
        key, _, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if not key:
            raise ConfigError("empty key", lineno, source)
        conv = _key_converter(key)
        if conv is None:
            raise ConfigError(f"unknown key '{key}'", lineno, source)
        if key in out:
            raise ConfigError(f"duplicate key '{key}' (first set on line {out[key][1]})", lineno, source)
        try:
            out[key] = (conv(value), lineno)
        except ValueError as exc:
            raise ConfigError(f"bad value for '{key}': {exc}", lineno, source) from None
    return out


def build_config(values: dict, source: str | None = None) -> ExperimentConfig:
    def get(key, default=None):
        return values[key][0] if key in values else default

    def section(prefix):
        return {k[len(prefix) :]: v for k, (v, _) in values.items() if k.startswith(prefix)}

    def fail(key, message):
        line = values[key][1] if key in values else None
        raise ConfigError(message, line, source)

    if "method" not in values:
        raise MissingField("method", source)
    method = get("method")
    if method not in METHODS:
        fail("method", f"method must be one of {', '.join(METHODS)}; got {method!r}")

    kind = get("dataset.kind", "file" if "dataset.path" in values else None)
    if kind is None:
        raise MissingField("dataset.kind", source)
    if kind not in DATASET_KINDS:
        fail("dataset.kind", f"dataset.kind must be one of {', '.join(DATASET_KINDS)}")
    if kind == "file" and "dataset.path" not in values:
        raise MissingField("dataset.path", source)
    synth = {k: v for k, v in section("dataset.").items() if k in _SYNTH_FIELDS}
    if kind == "file" and synth:
        fail(f"dataset.{next(iter(synth))}", "synthetic dataset fields given for a file dataset")
    if method == "epoch-coreset" and "trainer.epoch_fraction" not in values:
        raise MissingField("trainer.epoch_fraction", source)

    try:
        spec = SyntheticSpec(**synth)
        spec.validate()
    except ValueError as exc:
        raise ConfigError(f"dataset: {exc}", None, source) from None
    model = ModelSpec(**section("model."))
    if model.kind not in MODEL_KINDS[:2]:
        fail("model.kind", f"model.kind must be one of {', '.join(MODEL_KINDS[:2])}")
    if model.hidden < 1:
        fail("model.hidden", "model.hidden must be >= 1")
    trainer = TrainerConfig(**section("trainer."))
    try:
        trainer.validate()
    except ValueError as exc:
        raise ConfigError(f"trainer: {exc}", None, source) from None
    diag = DiagnosticsConfig(**section("diagnostics."))
    return ExperimentConfig(
        method=method,
        dataset_kind=kind,
        synthetic=spec,
        dataset_seed=get("dataset.seed", 0),
        dataset_path=get("dataset.path"),
        model=model,
        trainer=trainer,
        output_dir=get("output.dir"),
        diagnostics=diag,
    )


def parse_config(text: str, source: str | None = None) -> ExperimentConfig:
    return build_config(parse_lines(text, source), source)


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc.strerror}", None, str(path)) from None
    return parse_config(text, str(path))


def _fmt(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if value is None:
        return "auto"
    if isinstance(value, float):
        return "inf" if value == math.inf else repr(value)
    return str(value)


def render_config(cfg: ExperimentConfig) -> str:
    """Full config text that parses back to ``cfg``; used for run manifests."""
    lines = [f"# crest-coresets {__version__} run manifest", f"version = {__version__}", f"method = {cfg.method}"]
    lines.append(f"dataset.kind = {cfg.dataset_kind}")
    if cfg.dataset_kind == "file":
        lines.append(f"dataset.path = {cfg.dataset_path}")
    else:
        lines.append(f"dataset.seed = {cfg.dataset_seed}")
        for f in fields(SyntheticSpec):
            lines.append(f"dataset.{f.name} = {_fmt(getattr(cfg.synthetic, f.name))}")
    for f in fields(ModelSpec):
        lines.append(f"model.{f.name} = {_fmt(getattr(cfg.model, f.name))}")
    for f in fields(TrainerConfig):
        lines.append(f"trainer.{f.name} = {_fmt(getattr(cfg.trainer, f.name))}")
    for f in fields(DiagnosticsConfig):
        lines.append(f"diagnostics.{f.name} = {_fmt(getattr(cfg.diagnostics, f.name))}")
    if cfg.output_dir is not None:
        lines.append(f"output.dir = {cfg.output_dir}")
    return "\n".join(lines) + "\n"


def with_trainer(cfg: ExperimentConfig, **changes) -> ExperimentConfig:
    return replace(cfg, trainer=replace(cfg.trainer, **changes))


def trainer_field_converter(name: str):
    """Value parser for a sweepable trainer field, or None if unknown."""
    return _TRAINER_FIELDS.get(name)
