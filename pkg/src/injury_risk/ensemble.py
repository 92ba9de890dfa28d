"""Resampling ensembles for class imbalance.

Two bagging variants (UnderBagging, SMOTEBagging) average member
probabilities. Two boosting variants (RUSBoost, SMOTEBoost) run binary
AdaBoost.M2: with two labels the mislabel distribution collapses to one
weight per sample, the pseudo-loss of a confidence-rated hypothesis ``p(x)``
is ``sum_i D(i) * (1 - h(x_i)[y_i] + h(x_i)[1 - y_i]) / 2`` and the update
raises ``beta`` to ``(1 + h[y_i] - h[1 - y_i]) / 2``.
"""

from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import resample
from ._tree import LEAF, Tree, _finalize, grow_tree, presort
from .dataset import Dataset
from .gbdt import FORMAT_VERSION, GbdtModel
from .seeding import derive_seed

BETA_FLOOR = 1e-10
MAX_CONSECUTIVE_FAILURES = 5

BAGGING_KINDS = ("underbagging", "smotebagging")
BOOSTING_KINDS = ("rusboost", "smoteboost")


@dataclass(frozen=True)
class EnsembleConfig:
    """``n_members=None`` picks 50 for bagging and 20 for boosting.

    ``target_ratio`` is the minority:majority count ratio after resampling.
    """

    n_members: int | None = None
    weak_max_depth: int = 3
    target_ratio: float = 1.0
    smote_k: int = 5
    seed: int = 0
    n_jobs: int = 1

    def __post_init__(self):
        if self.n_members is not None and self.n_members < 1:
            raise ValueError("n_members must be >= 1")
        if self.weak_max_depth < 1:
            raise ValueError("weak_max_depth must be >= 1")
        if self.target_ratio <= 0:
            raise ValueError("target_ratio must be positive")
        if self.smote_k < 1:
            raise ValueError("smote_k must be >= 1")

    def members_for(self, kind: str) -> int:
        if self.n_members is not None:
            return self.n_members
        return 50 if kind in BAGGING_KINDS else 20

    def to_json(self) -> dict:
        return {
            "n_members": self.n_members,
            "weak_max_depth": self.weak_max_depth,
            "target_ratio": self.target_ratio,
            "smote_k": self.smote_k,
            "seed": self.seed,
        }


@dataclass(frozen=True, eq=False)
class WeakTree:
    """Depth-limited weighted Gini tree whose leaves hold the positive-class probability."""

    tree: Tree

    def predict_proba(self, X) -> np.ndarray:
        return self.tree.predict(np.asarray(X, dtype=np.float64))


def fit_weak_tree(X, y, w, max_depth: int) -> WeakTree:
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    w = np.asarray(w, dtype=np.float64)
    rows = np.flatnonzero(w > 0)
    grown = grow_tree(
        X,
        presort(X, rows),
        w * y,
        w,
        max_depth=max_depth,
        lam=0.0,
        min_child_weight=0.0,
        leaf_value=lambda P, W: P / W if W > 0 else 0.5,
    )
    # re-sum each leaf directly so pure leaves are exactly 0 or 1
    leaf = grown.apply(X[rows])
    P = np.bincount(leaf, weights=w[rows] * y[rows], minlength=grown.n_nodes)
    W = np.bincount(leaf, weights=w[rows], minlength=grown.n_nodes)
    is_leaf = grown.feature == LEAF
    value = np.where(is_leaf & (W > 0), P / np.where(W > 0, W, 1.0), np.where(is_leaf, 0.5, 0.0))
    tree = _finalize(
        grown.feature.copy(),
        grown.threshold.copy(),
        grown.left.copy(),
        grown.right.copy(),
        value,
        grown.cover.copy(),
    )
    return WeakTree(tree)


def _check_features(X, n_features):
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X[None, :]
    if X.shape[1] != n_features:
        raise ValueError(f"expected {n_features} features, got {X.shape[1]}")
    return X


@dataclass(frozen=True, eq=False)
class BaggedEnsemble:
    kind: str
    members: tuple[WeakTree, ...]
    n_features: int

    def predict_proba(self, X) -> np.ndarray:
        X = _check_features(X, self.n_features)
        total = np.zeros(X.shape[0])
        for m in self.members:
            total += m.predict_proba(X)
        return np.clip(total / len(self.members), 0.0, 1.0)

    def to_json(self) -> dict:
        return {
            "format_version": FORMAT_VERSION,
            "kind": self.kind,
            "n_features": self.n_features,
            "members": [m.tree.to_json() for m in self.members],
        }


@dataclass(frozen=True)
class BoostRound:
    """State of one accepted boosting round; ``d_before`` is the distribution it was fitted under."""

    epsilon: float
    beta: float
    d_before: np.ndarray
    d_after: np.ndarray
    attempt: int


@dataclass(frozen=True, eq=False)
class BoostedEnsemble:
    kind: str
    members: tuple[WeakTree, ...]
    betas: tuple[float, ...]
    n_features: int
    rounds: tuple[BoostRound, ...] = field(default=())
    n_failures: int = 0

    @property
    def member_weights(self) -> np.ndarray:
        return np.log(1.0 / np.asarray(self.betas))

    def predict_proba(self, X) -> np.ndarray:
        """``sum_t log(1/beta_t) h_t(x) / sum_t log(1/beta_t)``."""
        X = _check_features(X, self.n_features)
        a = self.member_weights
        total = np.zeros(X.shape[0])
        for a_t, m in zip(a, self.members):
            total += a_t * m.predict_proba(X)
        return np.clip(total / a.sum(), 0.0, 1.0)

    def to_json(self) -> dict:
        return {
            "format_version": FORMAT_VERSION,
            "kind": self.kind,
            "n_features": self.n_features,
            "betas": list(self.betas),
            "members": [m.tree.to_json() for m in self.members],
        }


# ---------------------------------------------------------------------------
# class bookkeeping


@dataclass(frozen=True)
class _Classes:
    minority_label: int
    minority: np.ndarray
    majority: np.ndarray


def _classes(train: Dataset) -> _Classes:
    pos = np.flatnonzero(train.labels == 1)
    neg = np.flatnonzero(train.labels == 0)
    if len(pos) == 0 or len(neg) == 0:
        raise ValueError("ensemble training needs both classes present")
    if len(pos) <= len(neg):
        return _Classes(1, pos, neg)
    return _Classes(0, neg, pos)


def _n_majority_kept(c: _Classes, ratio: float) -> int:
    return min(len(c.majority), max(1, int(round(len(c.minority) / ratio))))


def _n_minority_needed(n_majority: int, n_minority: int, ratio: float) -> int:
    return max(0, int(round(ratio * n_majority)) - n_minority)


# ---------------------------------------------------------------------------
# bagging


def underbagging_bag(train: Dataset, cfg: EnsembleConfig, member: int) -> np.ndarray:
    """Row indices of UnderBagging member ``member``: all minority plus undersampled majority."""
    c = _classes(train)
    kept = resample.undersample_indices(
        len(c.majority), _n_majority_kept(c, cfg.target_ratio), derive_seed(cfg.seed, "underbag", member)
    )
    return np.sort(np.concatenate([c.minority, c.majority[kept]]))


@dataclass(frozen=True)
class Bag:
    X: np.ndarray
    y: np.ndarray
    n_smote: int
    n_oversampled: int


def smotebagging_bag(train: Dataset, cfg: EnsembleConfig, member: int, n_members: int) -> Bag:
    """Bag of SMOTEBagging member ``member`` (0-based) out of ``n_members``.

    The majority class is bootstrapped; the minority is topped up to the
    target ratio, a fraction ``(member + 1) / n_members`` of the new rows by
    SMOTE and the rest by random oversampling.
    """
    c = _classes(train)
    rng = np.random.default_rng(derive_seed(cfg.seed, "smotebag", member, "bootstrap"))
    maj = c.majority[rng.integers(0, len(c.majority), size=len(c.majority))]
    n_new = _n_minority_needed(len(maj), len(c.minority), cfg.target_ratio)
    n_smote = int(round((member + 1) / n_members * n_new))
    n_over = n_new - n_smote
    X = train.features
    over = c.minority[
        resample.oversample_indices(
            len(c.minority), len(c.minority) + n_over, derive_seed(cfg.seed, "smotebag", member, "over")
        )
    ]
    synth = resample.smote(
        X[c.minority],
        resample.SmoteConfig(cfg.smote_k, n_smote, derive_seed(cfg.seed, "smotebag", member, "smote")),
    )
    Xb = np.vstack([X[maj], X[over], synth])
    yb = np.concatenate(
        [
            np.full(len(maj), 1 - c.minority_label),
            np.full(len(over) + len(synth), c.minority_label),
        ]
    )
    return Bag(Xb, yb, n_smote, n_over)


def _map_members(fn, n: int, n_jobs: int):
    if n_jobs <= 1:
        return [fn(i) for i in range(n)]
    with ThreadPoolExecutor(max_workers=n_jobs) as pool:
        return list(pool.map(fn, range(n)))


def fit_underbagging(train: Dataset, cfg: EnsembleConfig | None = None) -> BaggedEnsemble:
    cfg = cfg or EnsembleConfig()
    _classes(train)

    def member(i):
        rows = underbagging_bag(train, cfg, i)
        return fit_weak_tree(train.features[rows], train.labels[rows], np.ones(len(rows)), cfg.weak_max_depth)

    members = _map_members(member, cfg.members_for("underbagging"), cfg.n_jobs)
    return BaggedEnsemble("underbagging", tuple(members), train.n_features)


def fit_smotebagging(train: Dataset, cfg: EnsembleConfig | None = None) -> BaggedEnsemble:
    cfg = cfg or EnsembleConfig()
    _classes(train)
    B = cfg.members_for("smotebagging")

    def member(i):
        bag = smotebagging_bag(train, cfg, i, B)
        return fit_weak_tree(bag.X, bag.y, np.ones(len(bag.y)), cfg.weak_max_depth)

    members = _map_members(member, B, cfg.n_jobs)
    return BaggedEnsemble("smotebagging", tuple(members), train.n_features)


# ---------------------------------------------------------------------------
# boosting


def pseudo_loss(d: np.ndarray, p: np.ndarray, y: np.ndarray) -> float:
    """Binary AdaBoost.M2 pseudo-loss of positive-class confidences ``p``."""
    h_true = np.where(y == 1, p, 1.0 - p)
    return float(np.sum(d * (1.0 - h_true + (1.0 - h_true))) / 2.0)


def update_distribution(d: np.ndarray, p: np.ndarray, y: np.ndarray, beta: float) -> np.ndarray:
    h_true = np.where(y == 1, p, 1.0 - p)
    exponent = 0.5 * (1.0 + h_true - (1.0 - h_true))
    new = d * np.power(beta, exponent)
    return new / new.sum()


def _boost(train: Dataset, cfg: EnsembleConfig, kind: str, weak_training_set) -> BoostedEnsemble:
    X = train.features
    y = train.labels
    n = train.n_samples
    d = np.full(n, 1.0 / n)
    members: list[WeakTree] = []
    betas: list[float] = []
    rounds: list[BoostRound] = []
    target = cfg.members_for(kind)
    failures = 0
    total_failures = 0
    attempt = 0
    while len(members) < target:
        Xw, yw, ww = weak_training_set(d, derive_seed(cfg.seed, kind, "round", attempt))
        weak = fit_weak_tree(Xw, yw, ww, cfg.weak_max_depth)
        p = weak.predict_proba(X)
        eps = pseudo_loss(d, p, y)
        if eps >= 0.5:
            failures += 1
            total_failures += 1
            attempt += 1
            d = np.full(n, 1.0 / n)
            if failures >= MAX_CONSECUTIVE_FAILURES:
                break
            continue
        failures = 0
        beta = max(eps / (1.0 - eps), BETA_FLOOR)
        d_next = update_distribution(d, p, y, beta)
        rounds.append(BoostRound(eps, beta, d, d_next, attempt))
        members.append(weak)
        betas.append(beta)
        d = d_next
        attempt += 1
    if not members:
        raise RuntimeError(f"{kind}: every weak learner had pseudo-loss >= 0.5")
    return BoostedEnsemble(kind, tuple(members), tuple(betas), train.n_features, tuple(rounds), total_failures)


def fit_rusboost(train: Dataset, cfg: EnsembleConfig | None = None) -> BoostedEnsemble:
    """AdaBoost.M2 whose weak learners see uniformly undersampled majority rows.

    Kept rows carry their current boosting weights, renormalized to sum to one;
    the pseudo-loss and the update use the full training set.
    """
    cfg = cfg or EnsembleConfig()
    c = _classes(train)
    n_keep = _n_majority_kept(c, cfg.target_ratio)

    def weak_training_set(d, seed):
        kept = resample.undersample_indices(len(c.majority), n_keep, seed)
        rows = np.sort(np.concatenate([c.minority, c.majority[kept]]))
        w = d[rows]
        return train.features[rows], train.labels[rows], w / w.sum()

    return _boost(train, cfg, "rusboost", weak_training_set)


def fit_smoteboost(train: Dataset, cfg: EnsembleConfig | None = None) -> BoostedEnsemble:
    """AdaBoost.M2 whose weak learners also see a fresh SMOTE batch each round.

    The synthetic rows share a total weight equal to the current minority mass
    and are dropped before the pseudo-loss and the distribution update.
    """
    cfg = cfg or EnsembleConfig()
    c = _classes(train)
    n_syn = _n_minority_needed(len(c.majority), len(c.minority), cfg.target_ratio)
    X_min = train.features[c.minority]

    def weak_training_set(d, seed):
        if n_syn == 0:
            return train.features, train.labels, d
        synth = resample.smote(X_min, resample.SmoteConfig(cfg.smote_k, n_syn, seed))
        syn_w = np.full(n_syn, d[c.minority].sum() / n_syn)
        w = np.concatenate([d, syn_w])
        Xw = np.vstack([train.features, synth])
        yw = np.concatenate([train.labels, np.full(n_syn, c.minority_label)])
        return Xw, yw, w / w.sum()

    return _boost(train, cfg, "smoteboost", weak_training_set)


FITTERS = {
    "underbagging": fit_underbagging,
    "smotebagging": fit_smotebagging,
    "rusboost": fit_rusboost,
    "smoteboost": fit_smoteboost,
}


def predict_proba(model, X) -> np.ndarray:
    return model.predict_proba(X)


def model_from_json(doc: dict):
    """Rebuild any persisted model (boosted trees or resampling ensemble) from its JSON document."""
    if doc.get("format_version") != FORMAT_VERSION:
        raise ValueError(f"unsupported model format {doc.get('format_version')!r}")
    kind = doc.get("kind", "gbdt")
    if kind == "gbdt":
        return GbdtModel.from_json(doc)
    members = tuple(WeakTree(Tree.from_json(t)) for t in doc["members"])
    if kind in BAGGING_KINDS:
        return BaggedEnsemble(kind, members, doc["n_features"])
    if kind in BOOSTING_KINDS:
        return BoostedEnsemble(kind, members, tuple(doc["betas"]), doc["n_features"])
    raise ValueError(f"unknown model kind {kind!r}")


def save_model(model, path) -> None:
    Path(path).write_text(json.dumps(model.to_json(), indent=1))


def load_model(path):
    return model_from_json(json.loads(Path(path).read_text()))
