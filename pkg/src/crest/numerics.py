"""Dense numeric primitives shared by the rest of the package.

Everything is float64. Randomness goes through :class:`SeededRng`, a thin
wrapper over numpy's counter-based Philox generator so that independent
streams can be derived by index (one per worker or per random subset).
"""

from __future__ import annotations

from typing import Callable, Sequence

import numpy as np


class SeededRng:
    """Deterministic random stream keyed by ``(seed, *stream_path)``."""

    def __init__(self, seed: int, stream: tuple[int, ...] = ()):
        if seed < 0 or seed >= 2**64:
            raise ValueError(f"seed must be a 64-bit unsigned integer, got {seed}")
        self.seed = int(seed)
        self.stream = tuple(int(s) for s in stream)
        ss = np.random.SeedSequence(self.seed, spawn_key=self.stream)
        self.gen = np.random.Generator(np.random.Philox(ss))

    def derive(self, index: int) -> "SeededRng":
        """Independent child stream; does not advance this one."""
        return SeededRng(self.seed, self.stream + (index,))

    def choice(self, pool: np.ndarray, size: int) -> np.ndarray:
        """``size`` distinct elements of ``pool``, uniformly, in draw order."""
        pool = np.asarray(pool)
        return pool[self.gen.permutation(len(pool))[:size]]

    def permutation(self, n: int) -> np.ndarray:
        return self.gen.permutation(n)

    def normal(self, size=None, loc=0.0, scale=1.0):
        return self.gen.normal(loc, scale, size)

    def uniform(self, size=None, low=0.0, high=1.0):
        return self.gen.uniform(low, high, size)

    def integers(self, low, high=None, size=None):
        return self.gen.integers(low, high, size)

    def __repr__(self) -> str:
        return f"SeededRng(seed={self.seed}, stream={self.stream})"


def as_rng(rng: SeededRng | int) -> SeededRng:
    return rng if isinstance(rng, SeededRng) else SeededRng(rng)


def sample_rademacher(dim: int, rng: SeededRng) -> np.ndarray:
    """Vector of i.i.d. +1/-1 entries, each with probability 1/2."""
    if dim < 1:
        raise ValueError(f"dim must be >= 1, got {dim}")
    bits = rng.integers(0, 2, size=dim)
    return 2.0 * bits - 1.0


_DIST_BLOCK = 256


def pairwise_distances(rows: Sequence[np.ndarray] | np.ndarray) -> np.ndarray:
    """Euclidean distance matrix between rows.

    Computed from explicit differences (not the Gram-matrix identity), so the
    result is exactly symmetric with an exactly zero diagonal.
    """
    if isinstance(rows, np.ndarray):
        X = np.asarray(rows, dtype=np.float64)
        if X.ndim == 1:
            X = X[:, None]
    else:
        dims = {np.shape(r) for r in rows}
        if len(dims) > 1:
            raise ValueError(f"rows have mismatched dimensions: {sorted(dims)}")
        X = np.asarray(rows, dtype=np.float64)
        if X.ndim == 1:
            X = X[:, None]
    if X.ndim != 2:
        raise ValueError("rows must form a 2-D array")
    n = X.shape[0]
    D = np.empty((n, n))
    for lo in range(0, n, _DIST_BLOCK):
        diff = X[lo : lo + _DIST_BLOCK, None, :] - X[None, :, :]
        D[lo : lo + _DIST_BLOCK] = np.sqrt(np.einsum("ijk,ijk->ij", diff, diff))
    # exact symmetry: the two halves can differ in the last ulp otherwise
    D = np.minimum(D, D.T)
    np.fill_diagonal(D, 0.0)
    return D


def check_distance_matrix(D: np.ndarray) -> None:
    """Raise ``ValueError`` naming the first violated invariant."""
    D = np.asarray(D)
    if D.ndim != 2 or D.shape[0] != D.shape[1]:
        raise ValueError("distance matrix invariant violated: square shape")
    if not np.all(np.isfinite(D)):
        raise ValueError("distance matrix invariant violated: finite entries")
    if not np.array_equal(D, D.T):
        raise ValueError("distance matrix invariant violated: symmetry")
    if np.any(np.diag(D) != 0.0):
        raise ValueError("distance matrix invariant violated: zero diagonal")
    if np.any(D < 0.0):
        raise ValueError("distance matrix invariant violated: nonnegativity")


def l2_norm(v: np.ndarray) -> float:
    return float(np.linalg.norm(np.asarray(v, dtype=np.float64)))


def finite_diff_gradient(
    f: Callable[[np.ndarray], float], w: np.ndarray, step: float = 1e-5
) -> np.ndarray:
    """Central-difference gradient of a scalar function."""
    if step <= 0:
        raise ValueError("step must be positive")
    w = np.asarray(w, dtype=np.float64)
    g = np.empty_like(w)
    e = np.zeros_like(w)
    for i in range(w.size):
        e[i] = step
        g[i] = (f(w + e) - f(w - e)) / (2.0 * step)
        e[i] = 0.0
    return g
