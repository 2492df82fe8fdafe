"""Datasets: an immutable feature/label store plus synthetic and file sources.

File format (UTF-8, LF)::

    d K
    x_1 ... x_d label
    ...
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .numerics import SeededRng, as_rng


class DatasetFormatError(ValueError):
    """Malformed dataset file; the message names the offending line."""


class EmptyDatasetError(DatasetFormatError):
    pass


@dataclass(frozen=True)
class Example:
    features: np.ndarray
    label: int


@dataclass(frozen=True, eq=False)
class Dataset:
    X: np.ndarray
    y: np.ndarray
    n_classes: int
    active: np.ndarray = field(default=None)

    def __post_init__(self):
        X = np.ascontiguousarray(self.X, dtype=np.float64)
        y = np.asarray(self.y, dtype=np.int64)
        if X.ndim != 2 or y.shape != (X.shape[0],):
            raise ValueError("X must be (n, d) and y must be (n,)")
        if not np.all(np.isfinite(X)):
            raise ValueError("features must be finite")
        if y.size and (y.min() < 0 or y.max() >= self.n_classes):
            raise ValueError(f"labels must lie in [0, {self.n_classes})")
        active = np.ones(X.shape[0], dtype=bool) if self.active is None else np.asarray(self.active, dtype=bool)
        if active.shape != y.shape:
            raise ValueError("active mask has the wrong length")
        X.setflags(write=False)
        y.setflags(write=False)
        active.setflags(write=False)
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "active", active)

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def d(self) -> int:
        return self.X.shape[1]

    def __len__(self) -> int:
        return self.n

    def __getitem__(self, i: int) -> Example:
        return Example(self.X[i], int(self.y[i]))

    @property
    def examples(self) -> list[Example]:
        return [self[i] for i in range(self.n)]

    def active_indices(self) -> np.ndarray:
        return np.flatnonzero(self.active)

    def with_active(self, mask) -> "Dataset":
        return Dataset(self.X, self.y, self.n_classes, mask)

    def same_as(self, other: "Dataset") -> bool:
        return (
            self.n_classes == other.n_classes
            and np.array_equal(self.X, other.X)
            and np.array_equal(self.y, other.y)
            and np.array_equal(self.active, other.active)
        )


@dataclass(frozen=True)
class SyntheticSpec:
    """Gaussian class clusters.

    ``imbalance`` is the share of class 0 (0 means balanced classes); the
    remaining examples are split evenly over the other classes. Class ``k``
    has standard deviation ``spread * (1 + heteroscedasticity * k / (K - 1))``.
    ``noise`` is the fraction of labels flipped to a different class.
    """

    n: int = 2000
    d: int = 10
    K: int = 4
    spread: float = 1.0
    imbalance: float = 0.0
    noise: float = 0.0
    heteroscedasticity: float = 0.0
    center_scale: float = 2.0

    def validate(self) -> None:
        if self.K < 2 or self.n < self.K:
            raise ValueError("need n >= K >= 2")
        if self.d < 1:
            raise ValueError("need d >= 1")
        if self.spread < 0 or self.heteroscedasticity < 0 or self.center_scale <= 0:
            raise ValueError("spread and heteroscedasticity must be >= 0, center_scale > 0")
        if not 0.0 <= self.imbalance < 1.0:
            raise ValueError("imbalance must lie in [0, 1)")
        if not 0.0 <= self.noise <= 1.0:
            raise ValueError("noise must lie in [0, 1]")


def class_counts(spec: SyntheticSpec) -> np.ndarray:
    n, K = spec.n, spec.K
    if spec.imbalance == 0.0:
        counts = np.full(K, n // K)
        counts[: n % K] += 1
        return counts
    first = int(round(spec.imbalance * n))
    rest = n - first
    counts = np.concatenate([[first], np.full(K - 1, rest // (K - 1))])
    counts[1 : 1 + rest % (K - 1)] += 1
    return counts


def generate_synthetic(spec: SyntheticSpec, seed: int | SeededRng = 0) -> Dataset:
    spec.validate()
    rng = as_rng(seed)
    K, d = spec.K, spec.d
    centers = spec.center_scale * rng.normal(size=(K, d))
    counts = class_counts(spec)
    X_parts, y_parts = [], []
    for k in range(K):
        sd = spec.spread * (1.0 + spec.heteroscedasticity * k / (K - 1))
        X_parts.append(centers[k] + sd * rng.normal(size=(counts[k], d)))
        y_parts.append(np.full(counts[k], k))
    X = np.vstack(X_parts)
    y = np.concatenate(y_parts)
    n_flip = int(round(spec.noise * spec.n))
    if n_flip:
        flip = rng.choice(np.arange(spec.n), n_flip)
        y[flip] = (y[flip] + rng.integers(1, K, size=n_flip)) % K
    order = rng.permutation(spec.n)
    return Dataset(X[order], y[order], K)


def save_dataset(dataset: Dataset, path) -> None:
    lines = [f"{dataset.d} {dataset.n_classes}"]
    for x, label in zip(dataset.X, dataset.y):
        lines.append(" ".join(repr(float(v)) for v in x) + f" {int(label)}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def load_dataset(path) -> Dataset:
    text = Path(path).read_text(encoding="utf-8")
    lines = text.split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    if not lines:
        raise DatasetFormatError(f"{path}: line 1: missing header 'd K'")
    header = lines[0].split()
    try:
        if len(header) != 2:
            raise ValueError
        d, K = int(header[0]), int(header[1])
        if d < 1 or K < 2:
            raise ValueError
    except ValueError:
        raise DatasetFormatError(f"{path}: line 1: header must be 'd K' with d >= 1, K >= 2") from None
    X = []
    y = []
    for lineno, line in enumerate(lines[1:], start=2):
        parts = line.split()
        if len(parts) != d + 1:
            raise DatasetFormatError(f"{path}: line {lineno}: expected {d + 1} fields, found {len(parts)}")
        try:
            feats = [float(p) for p in parts[:d]]
            label = int(parts[d])
        except ValueError:
            raise DatasetFormatError(f"{path}: line {lineno}: non-numeric field") from None
        if not np.all(np.isfinite(feats)):
            raise DatasetFormatError(f"{path}: line {lineno}: non-finite feature")
        if not 0 <= label < K:
            raise DatasetFormatError(f"{path}: line {lineno}: label {label} outside [0, {K})")
        X.append(feats)
        y.append(label)
    if not X:
        raise EmptyDatasetError(f"{path}: dataset has a header but no examples")
    return Dataset(np.array(X), np.array(y), K)
