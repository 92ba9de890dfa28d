"""Tabular injury data: container, CSV I/O, splitting, quantile binning and a synthetic generator."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Sequence

import numpy as np

LABEL_COLUMN = "label"
DOMAIN_COLUMN = "domain"
WEIGHT_COLUMN = "weight"


class Domain(str, Enum):
    SOURCE = "source"
    TARGET = "target"


class DataError(ValueError):
    """Raised for malformed input data; carries the offending row/column when known."""

    def __init__(self, message: str, row: int | None = None, column: str | None = None):
        where = []
        if row is not None:
            where.append(f"row {row}")
        if column is not None:
            where.append(f"column {column!r}")
        super().__init__(f"{message} ({', '.join(where)})" if where else message)
        self.row = row
        self.column = column


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class Dataset:
    """Immutable feature matrix with binary labels, sample weights and optional domain tags."""

    features: np.ndarray
    labels: np.ndarray
    weights: np.ndarray | None = None
    domain_tags: np.ndarray | None = None
    feature_names: tuple[str, ...] | None = None

    def __post_init__(self):
        X = np.asarray(self.features, dtype=np.float64)
        if X.ndim != 2:
            raise DataError(f"features must be 2-D, got shape {X.shape}")
        n, d = X.shape
        if not np.all(np.isfinite(X)):
            bad = np.argwhere(~np.isfinite(X))[0]
            raise DataError("non-finite feature value", row=int(bad[0]), column=str(bad[1]))
        y = np.asarray(self.labels)
        if y.shape != (n,):
            raise DataError(f"labels must have shape ({n},), got {y.shape}")
        if not np.all((y == 0) | (y == 1)):
            raise DataError("labels must be 0 or 1")
        y = y.astype(np.int64)
        w = np.ones(n) if self.weights is None else np.asarray(self.weights, dtype=np.float64)
        if w.shape != (n,):
            raise DataError(f"weights must have shape ({n},), got {w.shape}")
        if not np.all(np.isfinite(w)) or np.any(w < 0):
            raise DataError("weights must be finite and non-negative")
        tags = None
        if self.domain_tags is not None:
            tags = np.array([Domain(t).value for t in self.domain_tags], dtype=object)
            if tags.shape != (n,):
                raise DataError(f"domain_tags must have length {n}")
        names = self.feature_names
        names = tuple(f"f{j:02d}" for j in range(d)) if names is None else tuple(names)
        if len(names) != d:
            raise DataError(f"expected {d} feature names, got {len(names)}")
        object.__setattr__(self, "features", _frozen(X))
        object.__setattr__(self, "labels", _frozen(y))
        object.__setattr__(self, "weights", _frozen(w))
        object.__setattr__(self, "domain_tags", None if tags is None else _frozen(tags))
        object.__setattr__(self, "feature_names", names)

    @property
    def n_samples(self) -> int:
        return self.features.shape[0]

    @property
    def n_features(self) -> int:
        return self.features.shape[1]

    @property
    def prevalence(self) -> float:
        return float(self.labels.mean()) if self.n_samples else 0.0

    def subset(self, rows) -> "Dataset":
        rows = np.asarray(rows)
        return Dataset(
            self.features[rows],
            self.labels[rows],
            self.weights[rows],
            None if self.domain_tags is None else self.domain_tags[rows],
            self.feature_names,
        )

    def with_weights(self, weights) -> "Dataset":
        return Dataset(self.features, self.labels, weights, self.domain_tags, self.feature_names)

    def with_domain(self, domain: Domain) -> "Dataset":
        tags = np.full(self.n_samples, Domain(domain).value, dtype=object)
        return Dataset(self.features, self.labels, self.weights, tags, self.feature_names)

    def equals(self, other: "Dataset") -> bool:
        def same_tags(a, b):
            if a is None or b is None:
                return a is None and b is None
            return list(a) == list(b)

        return (
            self.feature_names == other.feature_names
            and np.array_equal(self.features, other.features)
            and np.array_equal(self.labels, other.labels)
            and np.array_equal(self.weights, other.weights)
            and same_tags(self.domain_tags, other.domain_tags)
        )


def concat(datasets: Sequence[Dataset]) -> Dataset:
    names = datasets[0].feature_names
    if any(d.feature_names != names for d in datasets):
        raise DataError("cannot concatenate datasets with different features")
    tags = None
    if all(d.domain_tags is not None for d in datasets):
        tags = np.concatenate([d.domain_tags for d in datasets])
    return Dataset(
        np.vstack([d.features for d in datasets]),
        np.concatenate([d.labels for d in datasets]),
        np.concatenate([d.weights for d in datasets]),
        tags,
        names,
    )


# ---------------------------------------------------------------------------
# CSV


@dataclass(frozen=True)
class CsvSchema:
    """Column mapping for :func:`load_csv`; ``feature_columns=None`` means every other column."""

    label: str = LABEL_COLUMN
    domain: str = DOMAIN_COLUMN
    weight: str = WEIGHT_COLUMN
    feature_columns: tuple[str, ...] | None = None


def _parse_float(text: str, row: int, column: str) -> float:
    try:
        value = float(text)
    except ValueError:
        raise DataError(f"cannot parse {text!r} as a number", row=row, column=column) from None
    if not math.isfinite(value):
        raise DataError(f"non-finite value {text!r}", row=row, column=column)
    return value


def load_csv(path, schema: CsvSchema | None = None) -> Dataset:
    """Read a headered CSV. Rows are numbered from 1 after the header in error messages."""
    schema = schema or CsvSchema()
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"no such file: {path}")
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError("empty file, header row required") from None
        if schema.label not in header:
            raise DataError(f"missing label column {schema.label!r}")
        reserved = {schema.label, schema.domain, schema.weight}
        if schema.feature_columns is None:
            feature_cols = [c for c in header if c not in reserved]
        else:
            missing = [c for c in schema.feature_columns if c not in header]
            if missing:
                raise DataError(f"missing feature columns {missing}")
            feature_cols = list(schema.feature_columns)
        col_index = {c: i for i, c in enumerate(header)}
        f_idx = [col_index[c] for c in feature_cols]
        has_domain = schema.domain in col_index
        has_weight = schema.weight in col_index

        X, y, w, tags = [], [], [], []
        for r, row in enumerate(reader, start=1):
            if not row:
                continue
            if len(row) != len(header):
                raise DataError(f"expected {len(header)} fields, got {len(row)}", row=r)
            X.append([_parse_float(row[i], r, header[i]) for i in f_idx])
            label = row[col_index[schema.label]].strip()
            if label not in ("0", "1"):
                raise DataError(f"label must be 0 or 1, got {label!r}", row=r, column=schema.label)
            y.append(int(label))
            if has_weight:
                wv = _parse_float(row[col_index[schema.weight]], r, schema.weight)
                if wv < 0:
                    raise DataError("negative weight", row=r, column=schema.weight)
                w.append(wv)
            if has_domain:
                tag = row[col_index[schema.domain]].strip()
                if tag not in (Domain.SOURCE.value, Domain.TARGET.value):
                    raise DataError(f"unknown domain tag {tag!r}", row=r, column=schema.domain)
                tags.append(tag)

    n = len(y)
    return Dataset(
        np.asarray(X, dtype=np.float64).reshape(n, len(feature_cols)),
        np.asarray(y, dtype=np.int64),
        np.asarray(w) if has_weight else None,
        np.asarray(tags, dtype=object) if has_domain else None,
        tuple(feature_cols),
    )


def write_csv(d: Dataset, path) -> None:
    """Write ``d`` in the format read by :func:`load_csv`.

    Floats use ``repr`` so values survive the round trip exactly. The weight
    column is written only when some weight differs from 1.
    """
    write_weight = bool(np.any(d.weights != 1.0))
    header = list(d.feature_names) + [LABEL_COLUMN]
    if write_weight:
        header.append(WEIGHT_COLUMN)
    if d.domain_tags is not None:
        header.append(DOMAIN_COLUMN)
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        out = csv.writer(fh, lineterminator="\n")
        out.writerow(header)
        for i in range(d.n_samples):
            row = [repr(float(v)) for v in d.features[i]]
            row.append(str(int(d.labels[i])))
            if write_weight:
                row.append(repr(float(d.weights[i])))
            if d.domain_tags is not None:
                row.append(d.domain_tags[i])
            out.writerow(row)


# ---------------------------------------------------------------------------
# Splitting and binning


def stratified_split(d: Dataset, test_fraction: float, seed: int) -> tuple[Dataset, Dataset]:
    """Partition ``d`` into (train, test) with per-class proportional allocation.

    Each class contributes ``round(test_fraction * n_class)`` rows to the test
    split, clamped so both splits keep at least one row of each class. Rows
    keep their original relative order.
    """
    if not 0.0 < test_fraction < 1.0:
        raise ValueError("test_fraction must lie in (0, 1)")
    rng = np.random.default_rng(seed)
    test_rows = []
    for cls in (0, 1):
        rows = np.flatnonzero(d.labels == cls)
        if len(rows) < 2:
            raise DataError(f"class {cls} has {len(rows)} samples; at least 2 needed to split")
        n_test = min(max(int(round(test_fraction * len(rows))), 1), len(rows) - 1)
        test_rows.append(rng.permutation(rows)[:n_test])
    is_test = np.zeros(d.n_samples, dtype=bool)
    is_test[np.concatenate(test_rows)] = True
    return d.subset(np.flatnonzero(~is_test)), d.subset(np.flatnonzero(is_test))


@dataclass(frozen=True)
class BinningScheme:
    """Per-feature interior cut points; bin ``i`` of a feature is ``(edge[i-1], edge[i]]``."""

    edges: tuple[np.ndarray, ...]
    n_bins: int
    feature_names: tuple[str, ...] = field(default=())

    def n_effective(self, feature: int) -> int:
        return len(self.edges[feature]) + 1

    def assign(self, X: np.ndarray) -> np.ndarray:
        """Bin index of every entry of ``X`` (same shape, integer)."""
        X = np.asarray(X, dtype=np.float64)
        if X.ndim != 2 or X.shape[1] != len(self.edges):
            raise ValueError(f"expected {len(self.edges)} features, got shape {X.shape}")
        out = np.empty(X.shape, dtype=np.int64)
        for j, e in enumerate(self.edges):
            out[:, j] = np.searchsorted(e, X[:, j], side="left")
        return out

    def labels(self, feature: int) -> list[str]:
        e = self.edges[feature]
        if len(e) == 0:
            return ["all"]
        out = [f"<= {e[0]:.4g}"]
        out += [f"({a:.4g}, {b:.4g}]" for a, b in zip(e[:-1], e[1:])]
        out.append(f"> {e[-1]:.4g}")
        return out


def fit_quantile_bins(d: Dataset, n_bins: int = 10) -> BinningScheme:
    """Equal-frequency bins from the empirical quantiles at ``i / n_bins``.

    Duplicate cut points are merged and cut points at the feature maximum are
    dropped, so low-cardinality features get fewer effective bins.
    """
    if n_bins < 2:
        raise ValueError("n_bins must be at least 2")
    if d.n_samples < n_bins:
        raise ValueError(f"need at least n_bins={n_bins} samples, got {d.n_samples}")
    probs = np.arange(1, n_bins) / n_bins
    edges = []
    for j in range(d.n_features):
        col = d.features[:, j]
        q = np.unique(np.quantile(col, probs, method="inverted_cdf"))
        q = q[q < col.max()]
        q.setflags(write=False)
        edges.append(q)
    return BinningScheme(tuple(edges), n_bins, d.feature_names)


# ---------------------------------------------------------------------------
# Synthetic organization pair


@dataclass(frozen=True)
class SyntheticOrgConfig:
    """Sizes, prevalences and shift of a generated source/target organization pair.

    Negatives are ``N(0, I)``. Positives have mean ``class_separation * v``
    for a random unit vector ``v`` and standard deviation ``positive_spread``
    along a second random unit vector ``u`` (unit elsewhere). Both target
    classes sit ``shift_magnitude`` further along ``u``, so the risk surface
    moves with the covariates and a source-fitted boundary is off in the target.
    """

    n_target_train: int = 12225
    n_source: int = 46046
    n_target_test: int = 3057
    n_features: int = 38
    injury_rate_target: float = 0.03
    injury_rate_source: float = 0.05
    shift_magnitude: float = 1.2
    noise_flip_rate: float = 0.0
    seed: int = 0
    class_separation: float = 1.0
    positive_spread: float = 2.0

    def __post_init__(self):
        for name in ("n_target_train", "n_source", "n_target_test", "n_features"):
            if int(getattr(self, name)) < 1:
                raise ValueError(f"{name} must be a positive integer")
        for name in ("injury_rate_target", "injury_rate_source"):
            if not 0.0 < getattr(self, name) < 1.0:
                raise ValueError(f"{name} must lie in (0, 1)")
        if self.shift_magnitude < 0:
            raise ValueError("shift_magnitude must be non-negative")
        if not 0.0 <= self.noise_flip_rate < 0.5:
            raise ValueError("noise_flip_rate must lie in [0, 0.5)")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")
        if self.positive_spread <= 0:
            raise ValueError("positive_spread must be positive")

    def to_json(self) -> dict:
        return dict(self.__dict__)


def _unit(rng: np.random.Generator, d: int) -> np.ndarray:
    v = rng.standard_normal(d)
    return v / np.linalg.norm(v)


def org_pair_geometry(cfg: SyntheticOrgConfig) -> tuple[np.ndarray, np.ndarray]:
    """The (class direction, shift direction) unit vectors used for ``cfg``."""
    rng = np.random.default_rng(cfg.seed)
    return _unit(rng, cfg.n_features), _unit(rng, cfg.n_features)


def _draw_domain(rng, n, rate, class_dir, shift_dir, offset, cfg, names, domain):
    n_pos = int(round(rate * n))
    d = cfg.n_features
    y = np.zeros(n, dtype=np.int64)
    y[:n_pos] = 1
    X = rng.standard_normal((n, d))
    # positives are stretched along the shift direction only
    along = X[:n_pos] @ shift_dir
    X[:n_pos] += np.outer((cfg.positive_spread - 1.0) * along, shift_dir)
    X[:n_pos] += cfg.class_separation * class_dir
    X += offset
    if cfg.noise_flip_rate > 0:
        flip = rng.random(n) < cfg.noise_flip_rate
        y = np.where(flip, 1 - y, y)
    perm = rng.permutation(n)
    tags = np.full(n, domain.value, dtype=object)
    return Dataset(X[perm], y[perm], None, tags, names)


def generate_org_pair(cfg: SyntheticOrgConfig) -> tuple[Dataset, Dataset, Dataset]:
    """Draw ``(source, target_train, target_test)``; bit-identical for identical configs."""
    rng = np.random.default_rng(cfg.seed)
    class_dir = _unit(rng, cfg.n_features)
    shift_dir = _unit(rng, cfg.n_features)
    names = tuple(f"f{j:02d}" for j in range(cfg.n_features))
    target_offset = cfg.shift_magnitude * shift_dir
    zero = np.zeros(cfg.n_features)
    source = _draw_domain(rng, cfg.n_source, cfg.injury_rate_source, class_dir, shift_dir, zero, cfg, names, Domain.SOURCE)
    target_train = _draw_domain(
        rng, cfg.n_target_train, cfg.injury_rate_target, class_dir, shift_dir, target_offset, cfg, names, Domain.TARGET
    )
    target_test = _draw_domain(
        rng, cfg.n_target_test, cfg.injury_rate_target, class_dir, shift_dir, target_offset, cfg, names, Domain.TARGET
    )
    return source, target_train, target_test
