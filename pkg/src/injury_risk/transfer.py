"""Instance-weighted transfer from a source organization to a target organization.

The target risk is rewritten as ``alpha * E_T[err] + (1 - alpha) * E_S[err * w]``
with ``w = P_T(x) / P_S(x)``. Source weights come from a discriminative domain
classifier, a diagonal Gaussian density model, or the hybrid of the
discriminative weight and a task weight (signed distance of each source sample
to the decision boundary of a model trained on the union).
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

import numpy as np

from . import gbdt
from .dataset import Dataset, Domain, concat

VARIANCE_FLOOR = 1e-6


class Method(str, Enum):
    T = "T"
    S = "S"
    S_UNION_T = "S_UNION_T"
    ONES = "ONES"
    GAUSSIAN = "GAUSSIAN"
    HYBRID = "HYBRID"


ALL_METHODS = tuple(Method)


@dataclass(frozen=True)
class TransferConfig:
    alpha: float = 0.7
    method: Method = Method.HYBRID
    clip_min: float = 1e-3
    clip_max: float = 1e3
    lr_lambda: float = 1.0
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "method", Method(self.method))
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError("alpha must lie in [0, 1]")
        if not 0.0 < self.clip_min <= self.clip_max:
            raise ValueError("need 0 < clip_min <= clip_max")
        if self.lr_lambda < 0:
            raise ValueError("lr_lambda must be non-negative")

    def to_json(self) -> dict:
        return {
            "alpha": self.alpha,
            "method": self.method.value,
            "clip_min": self.clip_min,
            "clip_max": self.clip_max,
            "lr_lambda": self.lr_lambda,
            "seed": self.seed,
        }


# ---------------------------------------------------------------------------
# discriminative domain weights


@dataclass(frozen=True)
class DomainClassifier:
    """Logistic model of P(source | x); ``w_lr`` and ``c_lr`` act on unscaled features."""

    w_lr: np.ndarray
    c_lr: float
    mean: np.ndarray
    scale: np.ndarray
    n_iter: int
    converged: bool

    def decision(self, X) -> np.ndarray:
        return np.asarray(X, dtype=np.float64) @ self.w_lr + self.c_lr


def _check_pair(source: Dataset, target: Dataset):
    if source.n_samples == 0 or target.n_samples == 0:
        raise ValueError("source and target must both be non-empty")
    if source.n_features != target.n_features:
        raise ValueError(
            f"feature mismatch: source has {source.n_features}, target has {target.n_features}"
        )


def fit_domain_classifier(
    source: Dataset, target: Dataset, lam: float = 1.0, max_iter: int = 100, tol: float = 1e-8
) -> DomainClassifier:
    """L2-regularized logistic regression, source = 1 and target = 0, by damped Newton steps.

    Each domain gets the same total sample weight, so the fitted log-odds
    estimate ``log P_S(x) / P_T(x)`` without the sample-size prior. Features
    are standardized for fitting and the coefficients mapped back.
    """
    _check_pair(source, target)
    X = np.vstack([source.features, target.features])
    if not np.all(np.isfinite(X)):
        raise ValueError("non-finite features")
    n_s, n_t = source.n_samples, target.n_samples
    n = n_s + n_t
    y = np.concatenate([np.ones(n_s), np.zeros(n_t)])
    v = np.concatenate([np.full(n_s, n / (2.0 * n_s)), np.full(n_t, n / (2.0 * n_t))])

    mean = X.mean(axis=0)
    scale = X.std(axis=0)
    scale[scale == 0] = 1.0
    Z = np.hstack([(X - mean) / scale, np.ones((n, 1))])
    d = Z.shape[1]
    reg = np.full(d, lam)
    reg[-1] = 0.0  # intercept is not penalized

    def objective(theta):
        m = Z @ theta
        return float(np.sum(v * (np.logaddexp(0.0, m) - y * m)) + 0.5 * np.sum(reg * theta * theta))

    theta = np.zeros(d)
    f = objective(theta)
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        p = 0.5 * (1.0 + np.tanh(0.5 * (Z @ theta)))
        grad = Z.T @ (v * (p - y)) + reg * theta
        if np.max(np.abs(grad)) <= tol:
            converged = True
            it -= 1
            break
        hess = (Z * (v * p * (1.0 - p))[:, None]).T @ Z + np.diag(reg) + 1e-12 * np.eye(d)
        step = np.linalg.solve(hess, grad)
        t = 1.0
        while True:
            cand = theta - t * step
            f_cand = objective(cand)
            if f_cand <= f or t < 1e-10:
                break
            t *= 0.5
        theta, f = cand, f_cand
    w_std, c_std = theta[:-1], theta[-1]
    w_lr = w_std / scale
    c_lr = float(c_std - np.sum(w_std * mean / scale))
    return DomainClassifier(w_lr, c_lr, mean, scale, it, converged)


def domain_weights_discriminative(
    dc: DomainClassifier, X, clip_min: float = 1e-3, clip_max: float = 1e3
) -> np.ndarray:
    """``exp(-(x . w_lr + c_lr))`` clipped to ``[clip_min, clip_max]``."""
    return np.clip(np.exp(-dc.decision(X)), clip_min, clip_max)


# ---------------------------------------------------------------------------
# Gaussian baseline


@dataclass(frozen=True)
class GaussianDomainModel:
    mean_target: np.ndarray
    var_target: np.ndarray
    mean_source: np.ndarray
    var_source: np.ndarray


def fit_gaussian_domain_model(source: Dataset, target: Dataset, floor: float = VARIANCE_FLOOR) -> GaussianDomainModel:
    _check_pair(source, target)
    return GaussianDomainModel(
        target.features.mean(axis=0),
        np.maximum(target.features.var(axis=0), floor),
        source.features.mean(axis=0),
        np.maximum(source.features.var(axis=0), floor),
    )


def _diag_log_density(X, mean, var):
    return -0.5 * np.sum(np.log(2.0 * np.pi * var) + (X - mean) ** 2 / var, axis=1)


def gaussian_log_ratio(g: GaussianDomainModel, X) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    return _diag_log_density(X, g.mean_target, g.var_target) - _diag_log_density(X, g.mean_source, g.var_source)


def domain_weights_gaussian(g: GaussianDomainModel, X, clip_min: float = 1e-3, clip_max: float = 1e3) -> np.ndarray:
    """Ratio of diagonal Gaussian densities, target over source, evaluated in log space."""
    return np.clip(np.exp(gaussian_log_ratio(g, X)), clip_min, clip_max)


# ---------------------------------------------------------------------------
# task weights and the hybrid


def signed_boundary_distance(margins: np.ndarray, labels: np.ndarray) -> np.ndarray:
    """``|margin|`` when the sign of the margin agrees with the label, ``-|margin|`` otherwise."""
    margins = np.asarray(margins, dtype=np.float64)
    correct = (margins > 0) == (np.asarray(labels) == 1)
    return np.where(correct, np.abs(margins), -np.abs(margins))


def task_weights(
    source: Dataset,
    target: Dataset,
    base_cfg: gbdt.GbdtConfig | None = None,
    model: gbdt.GbdtModel | None = None,
) -> np.ndarray:
    """Signed boundary distance of each source sample under a union-trained model.

    Distances are divided by their mean absolute value over the source
    samples; a constant model gives all zeros.
    """
    if model is None:
        union = concat([source.with_weights(None), target.with_weights(None)])
        model = gbdt.fit(union, None, _plain(base_cfg))
    margins = model.predict_margin(source.features)
    signed = signed_boundary_distance(margins, source.labels)
    scale = np.mean(np.abs(margins))
    if not scale > 0:
        return np.zeros(source.n_samples)
    return signed / scale


def hybrid_weights(w_domain, w_task) -> np.ndarray:
    """``max(0, w_domain + w_task)`` elementwise."""
    w_domain = np.asarray(w_domain, dtype=np.float64)
    w_task = np.asarray(w_task, dtype=np.float64)
    if w_domain.shape != w_task.shape:
        raise ValueError(f"length mismatch: {w_domain.shape} vs {w_task.shape}")
    return np.maximum(0.0, w_domain + w_task)


def alpha_mixed_training_set(target: Dataset, source: Dataset, w_source, alpha: float) -> Dataset:
    """Concatenate target then source with weights giving the target a mass share of ``alpha``.

    Total mass is ``N = N_T + N_S``; each target sample gets ``alpha * N / N_T``
    and source sample ``j`` gets ``(1 - alpha) * N * w_j / sum(w)``.
    """
    if not 0.0 <= alpha <= 1.0:
        raise ValueError("alpha must lie in [0, 1]")
    w_source = np.asarray(w_source, dtype=np.float64)
    n_t, n_s = target.n_samples, source.n_samples
    if w_source.shape != (n_s,):
        raise ValueError(f"expected {n_s} source weights, got {w_source.shape}")
    if np.any(w_source < 0) or not np.all(np.isfinite(w_source)):
        raise ValueError("source weights must be finite and non-negative")
    if alpha > 0 and n_t == 0:
        raise ValueError("alpha > 0 needs target samples")
    if alpha < 1 and (n_s == 0 or not w_source.sum() > 0):
        raise ValueError("alpha < 1 needs source samples with positive total weight")
    n = n_t + n_s
    wt = np.full(n_t, alpha * n / n_t) if n_t else np.zeros(0)
    ws = (1.0 - alpha) * n * w_source / w_source.sum() if alpha < 1 else np.zeros(n_s)
    return concat([target.with_domain(Domain.TARGET).with_weights(wt), source.with_domain(Domain.SOURCE).with_weights(ws)])


@dataclass(frozen=True)
class SourceWeights:
    w_domain: np.ndarray
    w_task: np.ndarray
    w_combined: np.ndarray
    notes: dict = field(default_factory=dict)

    def to_csv(self, path) -> None:
        with Path(path).open("w", newline="") as fh:
            out = csv.writer(fh, lineterminator="\n")
            out.writerow(["sample_index", "w_domain", "w_task", "w_combined"])
            for i, (a, b, c) in enumerate(zip(self.w_domain, self.w_task, self.w_combined)):
                out.writerow([i, repr(float(a)), repr(float(b)), repr(float(c))])


def _plain(base_cfg: gbdt.GbdtConfig | None) -> gbdt.GbdtConfig:
    """``base_cfg`` stripped of early stopping, for fits without a validation set."""
    cfg = base_cfg or gbdt.GbdtConfig()
    return gbdt.GbdtConfig(
        n_rounds=cfg.n_rounds,
        max_depth=cfg.max_depth,
        learning_rate=cfg.learning_rate,
        l2_leaf_regularization=cfg.l2_leaf_regularization,
        min_child_hessian=cfg.min_child_hessian,
        seed=cfg.seed,
    )


def _clip_notes(w, lo, hi) -> dict:
    return {"clip": [lo, hi], "n_clipped_low": int(np.sum(w <= lo)), "n_clipped_high": int(np.sum(w >= hi))}


def compute_source_weights(
    source: Dataset, target: Dataset, cfg: TransferConfig, base_cfg: gbdt.GbdtConfig | None = None
) -> SourceWeights | None:
    """Source weights for the weighted methods; ``None`` for T, S and S_UNION_T."""
    _check_pair(source, target)
    n_s = source.n_samples
    if cfg.method is Method.ONES:
        ones = np.ones(n_s)
        return SourceWeights(ones, np.zeros(n_s), ones.copy(), {"method": "ONES"})
    if cfg.method is Method.GAUSSIAN:
        g = fit_gaussian_domain_model(source, target)
        wd = domain_weights_gaussian(g, source.features, cfg.clip_min, cfg.clip_max)
        return SourceWeights(wd, np.zeros(n_s), wd.copy(), {"method": "GAUSSIAN", **_clip_notes(wd, cfg.clip_min, cfg.clip_max)})
    if cfg.method is Method.HYBRID:
        dc = fit_domain_classifier(source, target, cfg.lr_lambda)
        wd = domain_weights_discriminative(dc, source.features, cfg.clip_min, cfg.clip_max)
        wt = task_weights(source, target, base_cfg)
        wc = hybrid_weights(wd, wt)
        notes = {
            "method": "HYBRID",
            **_clip_notes(wd, cfg.clip_min, cfg.clip_max),
            "task_weight_scale": "divided by mean |margin| over source",
            "n_combined_zero": int(np.sum(wc == 0)),
            "domain_classifier_converged": dc.converged,
        }
        return SourceWeights(wd, wt, wc, notes)
    return None


def fit_transfer_model(
    source: Dataset,
    target: Dataset,
    cfg: TransferConfig,
    base_cfg: gbdt.GbdtConfig | None = None,
    weights: SourceWeights | None = None,
) -> gbdt.GbdtModel:
    """Fit the predictive model of the chosen transfer method.

    T, S and S_UNION_T ignore ``alpha``; ONES, GAUSSIAN and HYBRID train on the
    alpha-mixed set. Precomputed ``weights`` skip the weight estimation.
    """
    _check_pair(source, target)
    plain = _plain(base_cfg)
    m = cfg.method
    if m is Method.T:
        return gbdt.fit(target.with_weights(None), None, plain)
    if m is Method.S:
        return gbdt.fit(source.with_weights(None), None, plain)
    if m is Method.S_UNION_T:
        return gbdt.fit(concat([target.with_weights(None), source.with_weights(None)]), None, plain)
    if weights is None:
        weights = compute_source_weights(source, target, cfg, base_cfg)
    mixed = alpha_mixed_training_set(target, source, weights.w_combined, cfg.alpha)
    return gbdt.fit(mixed, None, plain)
