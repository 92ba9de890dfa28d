"""Model explanations: binned log-odds impact, partial dependence, back-door adjusted curves, loess."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Mapping

import numpy as np

from .causal import BackdoorViolation, Dag, backdoor_violation
from .dataset import BinningScheme, Dataset
from .gbdt import GbdtModel, sigmoid


@dataclass(frozen=True)
class FeatureImpact:
    feature: str
    bin_labels: tuple[str, ...]
    mean_contribution: np.ndarray
    counts: np.ndarray


@dataclass(frozen=True)
class BinnedImpact:
    features: tuple[FeatureImpact, ...]
    mean_bias: float
    n_samples: int

    def __getitem__(self, name: str) -> FeatureImpact:
        for f in self.features:
            if f.feature == name:
                return f
        raise KeyError(name)


@dataclass(frozen=True)
class PdpCurve:
    feature: str
    grid: np.ndarray
    values: np.ndarray
    adjustment_set: tuple[str, ...]


def _check(m: GbdtModel, d: Dataset):
    if d.n_features != m.n_features:
        raise ValueError(f"model expects {m.n_features} features, dataset has {d.n_features}")


def binned_impact(m: GbdtModel, d: Dataset, bins: BinningScheme) -> BinnedImpact:
    """Mean per-sample log-odds contribution of each feature within each of its bins.

    Empty bins report a mean of 0 with count 0.
    """
    _check(m, d)
    if len(bins.edges) != d.n_features:
        raise ValueError("binning scheme does not match the dataset's features")
    bias, contrib = m.contributions_matrix(d.features)
    idx = bins.assign(d.features)
    out = []
    for j, name in enumerate(d.feature_names):
        k = bins.n_effective(j)
        counts = np.bincount(idx[:, j], minlength=k)
        sums = np.bincount(idx[:, j], weights=contrib[:, j], minlength=k)
        means = np.divide(sums, counts, out=np.zeros(k), where=counts > 0)
        out.append(FeatureImpact(name, tuple(bins.labels(j)), means, counts))
    return BinnedImpact(tuple(out), float(bias.mean()), d.n_samples)


def _feature_index(d: Dataset, feature) -> int:
    if isinstance(feature, str):
        try:
            return d.feature_names.index(feature)
        except ValueError:
            raise ValueError(f"unknown feature {feature!r}") from None
    j = int(feature)
    if not 0 <= j < d.n_features:
        raise ValueError(f"feature index {j} out of range")
    return j


def default_grid(d: Dataset, feature, bins: BinningScheme | None = None, n_points: int = 20) -> np.ndarray:
    """Bin edges of ``feature`` when available, else a uniform grid over its range."""
    j = _feature_index(d, feature)
    if bins is not None and len(bins.edges[j]) >= 2:
        return np.asarray(bins.edges[j], dtype=np.float64)
    col = d.features[:, j]
    return np.linspace(col.min(), col.max(), n_points)


def _substituted_margins(m: GbdtModel, X: np.ndarray, j: int, grid: np.ndarray) -> np.ndarray:
    """Margins with column ``j`` set to each grid value: shape ``(len(grid), n)``."""
    out = np.empty((len(grid), X.shape[0]))
    Xv = X.copy()
    for g_i, v in enumerate(grid):
        Xv[:, j] = v
        out[g_i] = m.predict_margin(Xv)
    return out


def pdp_margin(m: GbdtModel, d: Dataset, feature, grid) -> np.ndarray:
    """Partial dependence in margin (log-odds) space."""
    _check(m, d)
    j = _feature_index(d, feature)
    grid = _as_grid(grid)
    return _substituted_margins(m, d.features, j, grid).mean(axis=1)


def _as_grid(grid) -> np.ndarray:
    grid = np.asarray(grid, dtype=np.float64).ravel()
    if grid.size == 0 or not np.all(np.isfinite(grid)):
        raise ValueError("grid must be non-empty and finite")
    return grid


def pdp(m: GbdtModel, d: Dataset, feature, grid) -> PdpCurve:
    """``PDP(v) = mean_i sigmoid(margin(x_i with feature := v))``."""
    _check(m, d)
    j = _feature_index(d, feature)
    grid = _as_grid(grid)
    values = sigmoid(_substituted_margins(m, d.features, j, grid)).mean(axis=1)
    others = tuple(n for i, n in enumerate(d.feature_names) if i != j)
    return PdpCurve(d.feature_names[j], grid, values, others)


def adjusted_effect_curve(
    m: GbdtModel,
    d: Dataset,
    feature,
    grid,
    g: Dag,
    z: Iterable[str],
    node_to_feature: Mapping[str, str] | None = None,
) -> PdpCurve:
    """Back-door adjusted effect of ``feature`` on the outcome, averaging over the empirical ``z``.

    ``z`` must satisfy the back-door criterion in ``g`` for the pair
    (``feature``'s node, ``g.outcome``); otherwise :class:`BackdoorViolation`
    names the failed condition. Graph nodes map to dataset columns by name
    unless ``node_to_feature`` says otherwise.
    """
    _check(m, d)
    mapping = dict(node_to_feature or {})
    j = _feature_index(d, feature)
    name = d.feature_names[j]
    inverse = {v: k for k, v in mapping.items()}
    x_node = inverse.get(name, name)
    z = list(z)
    if x_node not in g.nodes:
        raise ValueError(f"feature {name!r} is not a node of the graph")
    reason = backdoor_violation(g, z, x_node, g.outcome)
    if reason is not None:
        raise BackdoorViolation(reason)
    z_features = []
    for node in z:
        col = mapping.get(node, node)
        if col not in d.feature_names:
            raise ValueError(f"adjustment node {node!r} has no dataset column")
        z_features.append(col)
    grid = _as_grid(grid)
    # z and the remaining covariates keep their per-sample values, so the
    # empirical average over samples is the adjustment over z
    values = sigmoid(_substituted_margins(m, d.features, j, grid)).mean(axis=1)
    return PdpCurve(name, grid, values, tuple(z_features))


def loess_smooth(x, y, span: float = 0.5, x_eval=None) -> np.ndarray:
    """Local linear regression with tricube weights over the ``ceil(span * n)`` nearest points."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape or x.ndim != 1:
        raise ValueError("x and y must be 1-D arrays of equal length")
    n = len(x)
    if n < 5:
        raise ValueError("loess needs at least 5 points")
    if not 0.0 < span <= 1.0:
        raise ValueError("span must lie in (0, 1]")
    q = int(math.ceil(span * n))
    if q < 2:
        raise ValueError("span * n must be at least 2")
    if np.all(x == x[0]):
        raise ValueError("all x values are identical")
    x_eval = x if x_eval is None else np.asarray(x_eval, dtype=np.float64)
    out = np.empty(len(x_eval))
    for i, x0 in enumerate(x_eval):
        dist = np.abs(x - x0)
        near = np.argpartition(dist, q - 1)[:q]
        dmax = dist[near].max()
        if dmax > 0:
            w = (1.0 - (dist[near] / dmax) ** 3) ** 3
        else:
            w = np.ones(q)
        # a point sitting exactly at dmax gets weight 0; keep the fit determined
        if np.count_nonzero(w) < 2:
            w = np.ones(q)
        xs, ys = x[near], y[near]
        sw = w.sum()
        xm = np.dot(w, xs) / sw
        ym = np.dot(w, ys) / sw
        sxx = np.dot(w, (xs - xm) ** 2)
        if sxx <= 1e-300:
            out[i] = ym
        else:
            slope = np.dot(w, (xs - xm) * (ys - ym)) / sxx
            out[i] = ym + slope * (x0 - xm)
    return out
