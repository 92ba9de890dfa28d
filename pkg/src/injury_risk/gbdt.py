"""Instance-weighted Newton boosting of regression trees under logistic loss."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

import numpy as np

from . import evaluation
from ._tree import Tree, grow_tree, presort
from .dataset import Dataset

FORMAT_VERSION = 1


class MetricKind(str, Enum):
    AUCPR = "AUCPR"
    MACRO_F1 = "MACRO_F1"
    PROFIT = "PROFIT"
    LOGLOSS = "LOGLOSS"


@dataclass(frozen=True)
class EvalMetric:
    """Validation metric for early stopping. Threshold applies to MACRO_F1 and PROFIT."""

    kind: MetricKind = MetricKind.LOGLOSS
    profit_matrix: evaluation.ProfitMatrix | None = None
    threshold: float = 0.5

    def __post_init__(self):
        object.__setattr__(self, "kind", MetricKind(self.kind))
        if self.kind is MetricKind.PROFIT and self.profit_matrix is None:
            raise ValueError("PROFIT metric needs a profit matrix")

    @property
    def higher_is_better(self) -> bool:
        return self.kind is not MetricKind.LOGLOSS

    def __call__(self, margins: np.ndarray, labels: np.ndarray, weights: np.ndarray) -> float:
        if self.kind is MetricKind.LOGLOSS:
            return evaluation.log_loss(margins, labels, weights)
        p = sigmoid(margins)
        if self.kind is MetricKind.AUCPR:
            return evaluation.aucpr(p, labels, weights)
        c = evaluation.confusion_at_threshold(p, labels, weights, self.threshold)
        if self.kind is MetricKind.MACRO_F1:
            return evaluation.macro_f1(c)
        return self.profit_matrix.profit(c)


@dataclass(frozen=True)
class GbdtConfig:
    n_rounds: int = 100
    max_depth: int = 4
    learning_rate: float = 0.1
    l2_leaf_regularization: float = 1.0
    min_child_hessian: float = 1.0
    early_stopping_rounds: int | None = None
    eval_metric: EvalMetric = field(default_factory=EvalMetric)
    seed: int = 0

    def __post_init__(self):
        if self.n_rounds < 1:
            raise ValueError("n_rounds must be >= 1")
        if self.max_depth < 1:
            raise ValueError("max_depth must be >= 1")
        if not 0.0 < self.learning_rate <= 1.0:
            raise ValueError("learning_rate must lie in (0, 1]")
        if self.l2_leaf_regularization < 0 or self.min_child_hessian < 0:
            raise ValueError("regularization parameters must be non-negative")
        if self.early_stopping_rounds is not None and self.early_stopping_rounds < 1:
            raise ValueError("early_stopping_rounds must be >= 1")

    def to_json(self) -> dict:
        m = self.eval_metric
        return {
            "n_rounds": self.n_rounds,
            "max_depth": self.max_depth,
            "learning_rate": self.learning_rate,
            "l2_leaf_regularization": self.l2_leaf_regularization,
            "min_child_hessian": self.min_child_hessian,
            "early_stopping_rounds": self.early_stopping_rounds,
            "eval_metric": {
                "kind": m.kind.value,
                "threshold": m.threshold,
                "profit_matrix": None if m.profit_matrix is None else m.profit_matrix.to_json(),
            },
            "seed": self.seed,
        }

    @classmethod
    def from_json(cls, doc: dict) -> "GbdtConfig":
        doc = dict(doc)
        metric = doc.pop("eval_metric", None)
        if isinstance(metric, str):
            metric = {"kind": metric}
        if metric is not None:
            pm = metric.get("profit_matrix")
            doc["eval_metric"] = EvalMetric(
                kind=metric.get("kind", "LOGLOSS"),
                profit_matrix=None if pm is None else evaluation.ProfitMatrix(**pm),
                threshold=metric.get("threshold", 0.5),
            )
        return cls(**doc)


def sigmoid(m):
    m = np.asarray(m, dtype=np.float64)
    return 0.5 * (1.0 + np.tanh(0.5 * m))


@dataclass(frozen=True)
class ContributionVector:
    """Additive split of one margin into a bias and per-feature log-odds contributions."""

    bias: float
    contributions: np.ndarray

    @property
    def total(self) -> float:
        return float(self.bias + self.contributions.sum())


@dataclass(frozen=True, eq=False)
class GbdtModel:
    trees: tuple[Tree, ...]
    learning_rate: float
    base_margin: float
    n_features: int
    best_iteration: int | None = None
    train_loss: tuple[float, ...] = ()
    eval_history: tuple[float, ...] = ()

    def _n_trees(self, n_trees: int | None) -> int:
        if n_trees is None:
            return self.best_iteration if self.best_iteration is not None else len(self.trees)
        if not 0 <= n_trees <= len(self.trees):
            raise ValueError(f"n_trees must lie in [0, {len(self.trees)}]")
        return n_trees

    def _check(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        if X.ndim == 1:
            X = X[None, :]
        if X.shape[1] != self.n_features:
            raise ValueError(f"expected {self.n_features} features, got {X.shape[1]}")
        return X

    def leaf_sum(self, X, n_trees: int | None = None) -> np.ndarray:
        X = self._check(X)
        total = np.zeros(X.shape[0])
        for tree in self.trees[: self._n_trees(n_trees)]:
            total += tree.predict(X)
        return total

    def predict_margin(self, X, n_trees: int | None = None) -> np.ndarray:
        """``base_margin + learning_rate * sum of leaf values`` for each row of ``X``."""
        return self.base_margin + self.learning_rate * self.leaf_sum(X, n_trees)

    def predict_proba(self, X, n_trees: int | None = None) -> np.ndarray:
        return sigmoid(self.predict_margin(X, n_trees))

    def path_contributions(self, x, n_trees: int | None = None) -> ContributionVector:
        """Credit each split on ``x``'s path with the change in cover-weighted node value."""
        x = self._check(x)[0]
        contrib = np.zeros(self.n_features)
        bias = self.base_margin
        lr = self.learning_rate
        for tree in self.trees[: self._n_trees(n_trees)]:
            path = tree.decision_path(x)
            bias += lr * tree.node_value[0]
            for parent, child in zip(path[:-1], path[1:]):
                contrib[tree.feature[parent]] += lr * (tree.node_value[child] - tree.node_value[parent])
        return ContributionVector(float(bias), contrib)

    def contributions_matrix(self, X, n_trees: int | None = None) -> tuple[np.ndarray, np.ndarray]:
        """Vectorized :meth:`path_contributions` over rows: ``(bias, contributions)``."""
        X = self._check(X)
        n = X.shape[0]
        contrib = np.zeros((n, self.n_features))
        bias = np.full(n, self.base_margin)
        lr = self.learning_rate
        rows = np.arange(n)
        for tree in self.trees[: self._n_trees(n_trees)]:
            bias += lr * tree.node_value[0]
            node = np.zeros(n, dtype=np.int64)
            active = tree.feature[node] >= 0
            while active.any():
                r = rows[active]
                cur = node[r]
                f = tree.feature[cur]
                nxt = np.where(X[r, f] < tree.threshold[cur], tree.left[cur], tree.right[cur])
                np.add.at(contrib, (r, f), lr * (tree.node_value[nxt] - tree.node_value[cur]))
                node[r] = nxt
                active = tree.feature[node] >= 0
        return bias, contrib

    def to_json(self) -> dict:
        return {
            "format_version": FORMAT_VERSION,
            "kind": "gbdt",
            "base_margin": self.base_margin,
            "learning_rate": self.learning_rate,
            "n_features": self.n_features,
            "best_iteration": self.best_iteration,
            "trees": [t.to_json() for t in self.trees],
        }

    @classmethod
    def from_json(cls, doc: dict) -> "GbdtModel":
        if doc.get("format_version") != FORMAT_VERSION:
            raise ValueError(f"unsupported model format {doc.get('format_version')!r}")
        return cls(
            trees=tuple(Tree.from_json(t) for t in doc["trees"]),
            learning_rate=doc["learning_rate"],
            base_margin=doc["base_margin"],
            n_features=doc["n_features"],
            best_iteration=doc["best_iteration"],
        )

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_json(), indent=1))

    @classmethod
    def load(cls, path) -> "GbdtModel":
        return cls.from_json(json.loads(Path(path).read_text()))


def fit(train: Dataset, valid: Dataset | None = None, cfg: GbdtConfig | None = None) -> GbdtModel:
    """Fit a boosted ensemble; early-stops on ``cfg.eval_metric`` over ``valid`` when configured."""
    cfg = cfg or GbdtConfig()
    X, y, w = train.features, train.labels.astype(np.float64), train.weights
    pos_mass = float(w[y == 1].sum())
    neg_mass = float(w[y == 0].sum())
    if pos_mass <= 0 or neg_mass <= 0:
        raise ValueError("training data needs both classes with positive total weight")
    needs_valid = cfg.early_stopping_rounds is not None or cfg.eval_metric.kind is not MetricKind.LOGLOSS
    if needs_valid and valid is None:
        raise ValueError("a validation set is required for early stopping or a non-LOGLOSS metric")
    if valid is not None and valid.n_features != train.n_features:
        raise ValueError("validation set has a different number of features")

    prior = pos_mass / (pos_mass + neg_mass)
    base_margin = float(np.log(prior / (1.0 - prior)))
    lam = cfg.l2_leaf_regularization
    lr = cfg.learning_rate

    # zero-weight rows are left out of split search entirely
    sorted_rows = presort(X, np.flatnonzero(w > 0))
    leaf_sum = np.zeros(train.n_samples)
    valid_sum = None if valid is None else np.zeros(valid.n_samples)

    def newton_leaf(G: float, H: float) -> float:
        return -G / (H + lam)

    trees: list[Tree] = []
    losses: list[float] = []
    history: list[float] = []
    best_score = None
    best_iter = None
    since_best = 0
    metric = cfg.eval_metric
    for _ in range(cfg.n_rounds):
        margin = base_margin + lr * leaf_sum
        p = sigmoid(margin)
        g = w * (p - y)
        h = w * p * (1.0 - p)
        tree = grow_tree(
            X,
            sorted_rows,
            g,
            h,
            max_depth=cfg.max_depth,
            lam=lam,
            min_child_weight=cfg.min_child_hessian,
            leaf_value=newton_leaf,
        )
        trees.append(tree)
        leaf_sum += tree.predict(X)
        losses.append(evaluation.log_loss(base_margin + lr * leaf_sum, y, w))
        if valid is None:
            continue
        valid_sum += tree.predict(valid.features)
        score = metric(base_margin + lr * valid_sum, valid.labels, valid.weights)
        history.append(score)
        improved = best_score is None or (score > best_score if metric.higher_is_better else score < best_score)
        if improved:
            best_score, best_iter, since_best = score, len(trees), 0
        else:
            since_best += 1
            if cfg.early_stopping_rounds is not None and since_best >= cfg.early_stopping_rounds:
                break

    return GbdtModel(
        trees=tuple(trees),
        learning_rate=lr,
        base_margin=base_margin,
        n_features=train.n_features,
        best_iteration=best_iter if cfg.early_stopping_rounds is not None else None,
        train_loss=tuple(losses),
        eval_history=tuple(history),
    )
