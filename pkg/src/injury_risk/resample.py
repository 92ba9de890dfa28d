"""Resampling primitives: SMOTE and random under/over-sampling.

All functions take plain row arrays and an integer seed and are
deterministic given that seed.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree


@dataclass(frozen=True)
class SmoteConfig:
    k_neighbors: int = 5
    n_synthetic: int = 0
    seed: int = 0

    def __post_init__(self):
        if self.k_neighbors < 1:
            raise ValueError("k_neighbors must be >= 1")
        if self.n_synthetic < 0:
            raise ValueError("n_synthetic must be >= 0")


@dataclass(frozen=True)
class SmoteResult:
    rows: np.ndarray
    base_index: np.ndarray
    neighbor_index: np.ndarray
    gap: np.ndarray


def minority_neighbors(minority: np.ndarray, k: int) -> np.ndarray:
    """Indices of the ``k`` nearest other minority rows, on standardized features.

    Ties in distance resolve to the lower row index.
    """
    minority = np.asarray(minority, dtype=np.float64)
    scale = minority.std(axis=0)
    scale[scale == 0] = 1.0
    Z = (minority - minority.mean(axis=0)) / scale
    n = len(Z)
    q = min(n, k + 1)
    dist, idx = cKDTree(Z).query(Z, k=q)
    dist = dist.reshape(n, q)
    idx = idx.reshape(n, q)
    out = np.empty((n, k), dtype=np.int64)
    for i in range(n):
        # row i may be displaced by an exact duplicate, leaving k + 1 candidates
        keep = idx[i] != i
        d_i, j_i = dist[i][keep], idx[i][keep]
        out[i] = j_i[np.lexsort((j_i, d_i))][:k]
    return out


def smote_detailed(minority, cfg: SmoteConfig) -> SmoteResult:
    """SMOTE with provenance: base row, neighbour row and interpolation gap per synthetic."""
    minority = np.asarray(minority, dtype=np.float64)
    if minority.ndim != 2 or minority.shape[0] == 0:
        raise ValueError("SMOTE needs a non-empty 2-D minority set")
    n = minority.shape[0]
    m = cfg.n_synthetic
    empty = np.zeros(0, dtype=np.int64)
    if m == 0:
        return SmoteResult(np.zeros((0, minority.shape[1])), empty, empty, np.zeros(0))
    rng = np.random.default_rng(cfg.seed)
    base = np.arange(m) % n
    if n == 1:
        return SmoteResult(np.repeat(minority, m, axis=0), base, base.copy(), np.zeros(m))
    k = min(cfg.k_neighbors, n - 1)
    nn = minority_neighbors(minority, k)
    pick = rng.integers(0, k, size=m)
    gap = rng.random(m)
    neighbor = nn[base, pick]
    rows = minority[base] + gap[:, None] * (minority[neighbor] - minority[base])
    return SmoteResult(rows, base, neighbor, gap)


def smote(minority, cfg: SmoteConfig) -> np.ndarray:
    """``cfg.n_synthetic`` synthetic rows interpolated towards k-nearest minority neighbours.

    Base rows are taken round-robin; each picks a neighbour uniformly among
    its ``k`` nearest. With ``k >= n`` the neighbourhood shrinks to ``n - 1``;
    a single minority row is simply repeated.
    """
    return smote_detailed(minority, cfg).rows


def undersample_indices(n: int, n_keep: int, seed: int) -> np.ndarray:
    """Sorted indices of ``n_keep`` of ``n`` rows drawn uniformly without replacement."""
    if not 0 <= n_keep <= n:
        raise ValueError(f"n_keep must lie in [0, {n}], got {n_keep}")
    rng = np.random.default_rng(seed)
    return np.sort(rng.choice(n, size=n_keep, replace=False))


def oversample_indices(n: int, n_total: int, seed: int) -> np.ndarray:
    """Indices of all ``n`` rows plus uniform-with-replacement duplicates up to ``n_total``."""
    if n == 0:
        raise ValueError("cannot oversample an empty set")
    if n_total < n:
        raise ValueError(f"n_total={n_total} is below the row count {n}")
    rng = np.random.default_rng(seed)
    return np.concatenate([np.arange(n), rng.integers(0, n, size=n_total - n)])


def random_undersample(majority, n_keep: int, seed: int) -> np.ndarray:
    majority = np.asarray(majority)
    return majority[undersample_indices(len(majority), n_keep, seed)]


def random_oversample(minority, n_total: int, seed: int) -> np.ndarray:
    minority = np.asarray(minority)
    return minority[oversample_indices(len(minority), n_total, seed)]
