"""Weighted classification metrics, ROC/PR curves, cost curves and profit thresholds.

Every metric accepts per-sample weights; a sample of weight 2 counts exactly
like two copies of it. Scores at or above a threshold are predicted positive.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class ConfusionCounts:
    tp: float
    fp: float
    tn: float
    fn: float

    @property
    def total(self) -> float:
        return self.tp + self.fp + self.tn + self.fn


@dataclass(frozen=True)
class ProfitMatrix:
    """Profit per case for each confusion cell (negative values are costs)."""

    v_tp: float
    v_fp: float
    v_tn: float
    v_fn: float

    def profit(self, c: ConfusionCounts) -> float:
        return self.v_tp * c.tp + self.v_fp * c.fp + self.v_tn * c.tn + self.v_fn * c.fn

    def to_json(self) -> dict:
        return {"v_tp": self.v_tp, "v_fp": self.v_fp, "v_tn": self.v_tn, "v_fn": self.v_fn}


@dataclass(frozen=True)
class CostLine:
    fpr: float
    fnr: float

    def __call__(self, pc):
        return self.fnr * np.asarray(pc) + self.fpr * (1.0 - np.asarray(pc))


@dataclass(frozen=True)
class CostCurve:
    lines: tuple[CostLine, ...]
    pc: np.ndarray
    envelope: np.ndarray
    always_negative: np.ndarray
    always_positive: np.ndarray


@dataclass(frozen=True)
class ProfitSweep:
    best_threshold: float
    best_profit: float
    thresholds: np.ndarray
    profits: np.ndarray
    benchmark_profit: float
    # profits / benchmark_profit, or None when the benchmark is not positive
    ratios: np.ndarray | None = field(default=None)

    @property
    def ratio_defined(self) -> bool:
        return self.ratios is not None


def _prepare(scores, labels, weights):
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels)
    weights = np.ones(len(scores)) if weights is None else np.asarray(weights, dtype=np.float64)
    if not (len(scores) == len(labels) == len(weights)):
        raise ValueError(
            f"length mismatch: scores={len(scores)} labels={len(labels)} weights={len(weights)}"
        )
    if not np.all(np.isfinite(scores)):
        raise ValueError("scores must be finite")
    return scores, labels.astype(np.int64), weights


def confusion_at_threshold(scores, labels, weights=None, t: float = 0.5) -> ConfusionCounts:
    scores, labels, weights = _prepare(scores, labels, weights)
    pred = scores >= t
    pos = labels == 1
    return ConfusionCounts(
        tp=float(weights[pred & pos].sum()),
        fp=float(weights[pred & ~pos].sum()),
        tn=float(weights[~pred & ~pos].sum()),
        fn=float(weights[~pred & pos].sum()),
    )


def _safe_div(a: float, b: float) -> float:
    return a / b if b > 0 else 0.0


def precision(c: ConfusionCounts) -> float:
    return _safe_div(c.tp, c.tp + c.fp)


def recall(c: ConfusionCounts) -> float:
    return _safe_div(c.tp, c.tp + c.fn)


def f1_positive(c: ConfusionCounts) -> float:
    return _safe_div(2 * c.tp, 2 * c.tp + c.fp + c.fn)


def f1_negative(c: ConfusionCounts) -> float:
    return _safe_div(2 * c.tn, 2 * c.tn + c.fn + c.fp)


def macro_f1(c: ConfusionCounts) -> float:
    """Mean of the positive-class and negative-class F1 (0/0 counts as 0)."""
    return 0.5 * (f1_positive(c) + f1_negative(c))


def _cumulative_by_threshold(scores, labels, weights):
    """Cumulative positive/negative mass at each distinct score, descending."""
    order = np.argsort(-scores, kind="stable")
    s = scores[order]
    wp = np.where(labels[order] == 1, weights[order], 0.0)
    wn = np.where(labels[order] == 1, 0.0, weights[order])
    distinct, starts = np.unique(-s, return_index=True)
    tp = np.cumsum(np.add.reduceat(wp, starts))
    fp = np.cumsum(np.add.reduceat(wn, starts))
    return -distinct, tp, fp


def pr_curve_and_aucpr(scores, labels, weights=None):
    """Precision-recall points and average precision.

    Returns ``(recall, precision, thresholds), aucpr`` where the curve has one
    point per distinct score, descending; tied scores share a point.
    """
    scores, labels, weights = _prepare(scores, labels, weights)
    total_pos = weights[labels == 1].sum()
    if not total_pos > 0:
        raise ValueError("AUCPR needs at least one positive with positive weight")
    thresholds, tp, fp = _cumulative_by_threshold(scores, labels, weights)
    with np.errstate(invalid="ignore", divide="ignore"):
        prec = np.where(tp + fp > 0, tp / (tp + fp), 0.0)
    rec = tp / total_pos
    aucpr = float(np.sum(np.diff(np.concatenate(([0.0], rec))) * prec))
    return (rec, prec, thresholds), aucpr


def aucpr(scores, labels, weights=None) -> float:
    return pr_curve_and_aucpr(scores, labels, weights)[1]


def roc_points(scores, labels, weights=None) -> np.ndarray:
    """ROC staircase as an ``(m, 2)`` array of ``(fpr, tpr)`` from (0,0) to (1,1)."""
    scores, labels, weights = _prepare(scores, labels, weights)
    P = weights[labels == 1].sum()
    N = weights[labels != 1].sum()
    if not (P > 0 and N > 0):
        raise ValueError("ROC needs both classes present")
    _, tp, fp = _cumulative_by_threshold(scores, labels, weights)
    fpr = np.concatenate(([0.0], fp / N))
    tpr = np.concatenate(([0.0], tp / P))
    # guard the endpoint against accumulated rounding
    fpr[-1] = 1.0
    tpr[-1] = 1.0
    return np.column_stack([fpr, tpr])


def roc_auc(scores, labels, weights=None) -> float:
    pts = roc_points(scores, labels, weights)
    return float(np.sum(np.diff(pts[:, 0]) * (pts[1:, 1] + pts[:-1, 1]) / 2.0))


def cost_curve(roc, grid_size: int = 101) -> CostCurve:
    """Lower envelope of the cost lines dual to the given ROC points.

    The always-negative (NE = PC) and always-positive (NE = 1 - PC) trivial
    classifiers are reported separately; they enter the envelope only if they
    are among the supplied ROC points, as they are for :func:`roc_points`.
    """
    roc = np.asarray(roc, dtype=np.float64).reshape(-1, 2)
    if roc.shape[0] == 0:
        raise ValueError("empty ROC")
    if grid_size < 2:
        raise ValueError("grid_size must be at least 2")
    lines = tuple(CostLine(fpr=float(f), fnr=float(1.0 - t)) for f, t in roc)
    pc = np.linspace(0.0, 1.0, grid_size)
    fpr = roc[:, 0][:, None]
    fnr = (1.0 - roc[:, 1])[:, None]
    ne = fnr * pc[None, :] + fpr * (1.0 - pc[None, :])
    return CostCurve(
        lines=lines,
        pc=pc,
        envelope=ne.min(axis=0),
        always_negative=pc.copy(),
        always_positive=1.0 - pc,
    )


def threshold_grid(n_thresholds: int = 100) -> np.ndarray:
    """``n`` evenly spaced thresholds strictly inside (0, 1)."""
    if n_thresholds < 2:
        raise ValueError("n_thresholds must be at least 2")
    return np.arange(1, n_thresholds + 1) / (n_thresholds + 1)


def optimize_profit_threshold(
    scores, labels, weights=None, pm: ProfitMatrix | None = None, n_thresholds: int = 100
) -> ProfitSweep:
    """Grid-search the threshold maximizing total profit; ties go to the smallest threshold."""
    if pm is None:
        raise ValueError("a profit matrix is required")
    scores, labels, weights = _prepare(scores, labels, weights)
    grid = threshold_grid(n_thresholds)
    profits = np.array([pm.profit(confusion_at_threshold(scores, labels, weights, t)) for t in grid])
    best = int(np.argmax(profits))
    pos_mass = float(weights[labels == 1].sum())
    neg_mass = float(weights[labels != 1].sum())
    benchmark = pm.v_tn * neg_mass + pm.v_fn * pos_mass
    ratios = profits / benchmark if benchmark > 0 else None
    return ProfitSweep(
        best_threshold=float(grid[best]),
        best_profit=float(profits[best]),
        thresholds=grid,
        profits=profits,
        benchmark_profit=float(benchmark),
        ratios=ratios,
    )


def log_loss(margins, labels, weights=None) -> float:
    """Weighted mean logistic loss computed from margins (log-odds)."""
    margins = np.asarray(margins, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.float64)
    weights = np.ones(len(margins)) if weights is None else np.asarray(weights, dtype=np.float64)
    # log(1 + exp(m)) - y*m, stable for large |m|
    loss = np.logaddexp(0.0, margins) - labels * margins
    return float(np.sum(weights * loss) / np.sum(weights))


def summary_metrics(scores, labels, weights=None, threshold: float = 0.5) -> dict[str, float]:
    """Precision, recall, macro-F1 at ``threshold`` plus AUCPR."""
    c = confusion_at_threshold(scores, labels, weights, threshold)
    return {
        "precision": precision(c),
        "recall": recall(c),
        "macro_f1": macro_f1(c),
        "aucpr": aucpr(scores, labels, weights),
    }
