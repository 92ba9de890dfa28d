"""Experiment harness: ``injury-risk <command> --config run.json [overrides]``.

Every command writes its artifacts into a temporary directory next to the
output directory and moves them in only after the run succeeds. ``report.json``
holds everything that is a function of the configuration; wall-clock time goes
to ``timing.json`` so that reports of repeated runs compare byte for byte.

Exit codes: 0 success, 1 runtime failure, 2 invalid configuration.
"""

from __future__ import annotations

import argparse
import json
import os
import platform
import shutil
import sys
import tempfile
import time
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable

import numpy as np

from . import __version__, ensemble, evaluation, explain, export, gbdt, transfer
from .causal import load_dag
from .dataset import (
    Dataset,
    SyntheticOrgConfig,
    concat,
    fit_quantile_bins,
    generate_org_pair,
    load_csv,
    stratified_split,
    write_csv,
)
from .seeding import derive_seed

MODEL_KINDS = {
    "GBDT": "gbdt",
    "UNDERBAG": "underbagging",
    "SMOTEBAG": "smotebagging",
    "RUSBOOST": "rusboost",
    "SMOTEBOOST": "smoteboost",
}
ALPHA_GRID = tuple(round(0.1 * i, 1) for i in range(11))
METRIC_NAMES = ("precision", "recall", "macro_f1", "aucpr")
VALID_FRACTION = 0.2


class ConfigError(ValueError):
    """Configuration problem; reported with exit code 2."""


# ---------------------------------------------------------------------------
# configuration


@dataclass(frozen=True)
class ExperimentConfig:
    synthetic: SyntheticOrgConfig | None = None
    paths: dict = field(default_factory=dict)
    model_kind: str = "GBDT"
    model_path: str | None = None
    gbdt: gbdt.GbdtConfig = field(default_factory=gbdt.GbdtConfig)
    ensemble: ensemble.EnsembleConfig = field(default_factory=ensemble.EnsembleConfig)
    transfer: transfer.TransferConfig | None = None
    metrics: tuple[str, ...] = METRIC_NAMES
    threshold: float = 0.5
    profit_matrix: evaluation.ProfitMatrix | None = None
    n_thresholds: int = 100
    cost_curve: bool = True
    cost_curve_kinds: tuple[str, ...] = ("GBDT", "RUSBOOST", "UNDERBAG")
    explain: dict = field(default_factory=dict)
    output_dir: str = "runs/latest"
    seed: int = 0
    threads: int = 1

    def to_json(self) -> dict:
        return {
            "dataset": {"synthetic": self.synthetic.to_json()} if self.synthetic else {"paths": dict(self.paths)},
            "model": {
                "kind": self.model_kind,
                "path": self.model_path,
                "gbdt": self.gbdt.to_json(),
                "ensemble": self.ensemble.to_json(),
            },
            "transfer": None if self.transfer is None else self.transfer.to_json(),
            "eval": {
                "metrics": list(self.metrics),
                "threshold": self.threshold,
                "profit_matrix": None if self.profit_matrix is None else self.profit_matrix.to_json(),
                "n_thresholds": self.n_thresholds,
                "cost_curve": self.cost_curve,
                "cost_curve_kinds": list(self.cost_curve_kinds),
            },
            "explain": dict(self.explain),
            "seed": self.seed,
        }


_TOP_KEYS = {"dataset", "model", "transfer", "eval", "explain", "output_dir", "seed", "threads"}
_EXPLAIN_KEYS = {"n_bins", "features", "grid_points", "dag", "adjustment", "node_to_feature"}


def _only(doc: dict, allowed: set, where: str) -> None:
    extra = set(doc) - allowed
    if extra:
        raise ConfigError(f"unknown {where} keys: {sorted(extra)}")


def _model_kind(name: str) -> str:
    key = str(name).upper().replace("-", "_")
    if key not in MODEL_KINDS:
        raise ConfigError(f"unknown model kind {name!r}; expected one of {sorted(MODEL_KINDS)}")
    return key


def config_from_json(doc: dict, overrides: dict | None = None) -> ExperimentConfig:
    """Build a validated config; ``overrides`` are flag values that replace file values."""
    doc = dict(doc or {})
    o = {k: v for k, v in (overrides or {}).items() if v is not None}
    _only(doc, _TOP_KEYS, "top-level")
    seed = int(o.get("seed", doc.get("seed", 0)))
    if not 0 <= seed < 2**64:
        raise ConfigError("seed must be a 64-bit unsigned integer")
    threads = int(o.get("threads", doc.get("threads", 1)))
    if threads < 1:
        raise ConfigError("threads must be >= 1")
    try:
        ds = dict(doc.get("dataset") or {"synthetic": {}})
        _only(ds, {"synthetic", "paths"}, "dataset")
        if ("synthetic" in ds) == ("paths" in ds):
            raise ConfigError("dataset needs exactly one of 'synthetic' or 'paths'")
        synthetic, paths = None, {}
        if "synthetic" in ds:
            syn = dict(ds["synthetic"] or {})
            syn.setdefault("seed", derive_seed(seed, "dataset"))
            synthetic = SyntheticOrgConfig(**syn)
        else:
            paths = {k: str(v) for k, v in dict(ds["paths"]).items()}
            _only(paths, {"train", "test", "source", "target_train", "target_test"}, "dataset.paths")

        md = dict(doc.get("model") or {})
        _only(md, {"kind", "path", "gbdt", "ensemble"}, "model")
        kind = _model_kind(o.get("model_kind", md.get("kind", "GBDT")))
        gdoc = dict(md.get("gbdt") or {})
        gdoc.setdefault("seed", derive_seed(seed, "gbdt"))
        gcfg = gbdt.GbdtConfig.from_json(gdoc)
        edoc = dict(md.get("ensemble") or {})
        edoc.setdefault("seed", derive_seed(seed, "ensemble"))
        edoc["n_jobs"] = threads
        ecfg = ensemble.EnsembleConfig(**edoc)

        tdoc = doc.get("transfer")
        tcfg = None
        if tdoc is not None or "alpha" in o:
            tdoc = dict(tdoc or {})
            tdoc.setdefault("seed", derive_seed(seed, "transfer"))
            if "alpha" in o:
                tdoc["alpha"] = float(o["alpha"])
            tcfg = transfer.TransferConfig(**tdoc)

        ev = dict(doc.get("eval") or {})
        _only(ev, {"metrics", "threshold", "profit_matrix", "n_thresholds", "cost_curve", "cost_curve_kinds"}, "eval")
        metrics = tuple(ev.get("metrics", METRIC_NAMES))
        bad = set(metrics) - set(METRIC_NAMES)
        if bad:
            raise ConfigError(f"unknown metrics: {sorted(bad)}")
        pm = ev.get("profit_matrix")
        pm = None if pm is None else evaluation.ProfitMatrix(**pm)
        threshold = float(ev.get("threshold", 0.5))
        if not 0.0 <= threshold <= 1.0:
            raise ConfigError("threshold must lie in [0, 1]")
        n_thr = int(ev.get("n_thresholds", 100))
        if n_thr < 2:
            raise ConfigError("n_thresholds must be >= 2")
        cc_kinds = tuple(_model_kind(k) for k in ev.get("cost_curve_kinds", ("GBDT", "RUSBOOST", "UNDERBAG")))

        ex = dict(doc.get("explain") or {})
        _only(ex, _EXPLAIN_KEYS, "explain")
    except ConfigError:
        raise
    except (TypeError, ValueError, KeyError) as e:
        raise ConfigError(str(e)) from e
    return ExperimentConfig(
        synthetic=synthetic,
        paths=paths,
        model_kind=kind,
        model_path=o.get("model_path", md.get("path")),
        gbdt=gcfg,
        ensemble=ecfg,
        transfer=tcfg,
        metrics=metrics,
        threshold=threshold,
        profit_matrix=pm,
        n_thresholds=n_thr,
        cost_curve=bool(ev.get("cost_curve", True)),
        cost_curve_kinds=cc_kinds,
        explain=ex,
        output_dir=str(o.get("output_dir", doc.get("output_dir", "runs/latest"))),
        seed=seed,
        threads=threads,
    )


def load_config(path: str | None, overrides: dict | None = None) -> ExperimentConfig:
    doc = {}
    if path is not None:
        p = Path(path)
        if not p.is_file():
            raise ConfigError(f"config file not found: {path}")
        try:
            doc = json.loads(p.read_text())
        except json.JSONDecodeError as e:
            raise ConfigError(f"config is not valid JSON: {e}") from e
        if not isinstance(doc, dict):
            raise ConfigError("config must be a JSON object")
    return config_from_json(doc, overrides)


# ---------------------------------------------------------------------------
# data and models


def _read(paths: dict, key: str) -> Dataset:
    p = paths[key]
    if not Path(p).is_file():
        raise ConfigError(f"dataset file not found: {p}")
    return load_csv(p)


def org_pair(cfg: ExperimentConfig) -> tuple[Dataset, Dataset, Dataset]:
    """``(source, target_train, target_test)`` from the synthetic generator or CSV paths."""
    if cfg.synthetic is not None:
        return generate_org_pair(cfg.synthetic)
    missing = {"source", "target_train", "target_test"} - set(cfg.paths)
    if missing:
        raise ConfigError(f"transfer runs need dataset paths {sorted(missing)}")
    return _read(cfg.paths, "source"), _read(cfg.paths, "target_train"), _read(cfg.paths, "target_test")


def train_test(cfg: ExperimentConfig) -> tuple[Dataset, Dataset | None]:
    """Single-organization data; the synthetic pair contributes its target split."""
    if cfg.synthetic is not None:
        _, tr, te = generate_org_pair(cfg.synthetic)
        return tr, te
    key = "train" if "train" in cfg.paths else "target_train"
    if key not in cfg.paths:
        raise ConfigError("dataset paths need 'train' (or 'target_train')")
    test_key = "test" if "test" in cfg.paths else "target_test"
    return _read(cfg.paths, key), _read(cfg.paths, test_key) if test_key in cfg.paths else None


def _needs_valid(c: gbdt.GbdtConfig) -> bool:
    return c.early_stopping_rounds is not None or c.eval_metric.kind is not gbdt.MetricKind.LOGLOSS


def fit_model(cfg: ExperimentConfig, train: Dataset, kind: str | None = None):
    kind = kind or cfg.model_kind
    if kind == "GBDT":
        if _needs_valid(cfg.gbdt):
            fit_part, valid = stratified_split(train, VALID_FRACTION, derive_seed(cfg.seed, "valid"))
            return gbdt.fit(fit_part, valid, cfg.gbdt)
        return gbdt.fit(train, None, cfg.gbdt)
    return ensemble.FITTERS[MODEL_KINDS[kind]](train, cfg.ensemble)


def metric_row(scores, d: Dataset, threshold: float, names=METRIC_NAMES) -> dict:
    m = evaluation.summary_metrics(scores, d.labels, None, threshold)
    return {k: m[k] for k in names}


def transfer_table(
    source: Dataset,
    target: Dataset,
    test: Dataset,
    tcfg: transfer.TransferConfig,
    base_cfg: gbdt.GbdtConfig,
    threshold: float = 0.5,
    methods=transfer.ALL_METHODS,
) -> tuple[dict, transfer.SourceWeights | None]:
    """Metrics of each transfer method on ``test`` plus the hybrid source weights."""
    rows, hybrid = {}, None
    for m in methods:
        mcfg = replace(tcfg, method=m)
        w = transfer.compute_source_weights(source, target, mcfg, base_cfg)
        if m is transfer.Method.HYBRID:
            hybrid = w
        model = transfer.fit_transfer_model(source, target, mcfg, base_cfg, w)
        rows[m.value] = metric_row(model.predict_proba(test.features), test, threshold)
    return rows, hybrid


def alpha_sweep(
    source: Dataset,
    target: Dataset,
    test: Dataset,
    tcfg: transfer.TransferConfig,
    base_cfg: gbdt.GbdtConfig,
    alphas=ALPHA_GRID,
    threshold: float = 0.5,
) -> list[dict]:
    """HYBRID metrics at each alpha; the source weights do not depend on alpha and are computed once."""
    hcfg = replace(tcfg, method=transfer.Method.HYBRID)
    w = transfer.compute_source_weights(source, target, hcfg, base_cfg)
    out = []
    for a in alphas:
        model = transfer.fit_transfer_model(source, target, replace(hcfg, alpha=float(a)), base_cfg, w)
        out.append({"alpha": float(a), **metric_row(model.predict_proba(test.features), test, threshold)})
    return out


def domain_auc(source: Dataset, target: Dataset, lam: float = 1.0) -> float:
    """In-sample ROC AUC of the domain classifier separating source from target."""
    dc = transfer.fit_domain_classifier(source, target, lam)
    scores = np.concatenate([dc.decision(source.features), dc.decision(target.features)])
    labels = np.r_[np.ones(source.n_samples), np.zeros(target.n_samples)]
    return evaluation.roc_auc(scores, labels)


# ---------------------------------------------------------------------------
# run directory


class Run:
    """Collects artifacts in a temporary directory and publishes them atomically per file."""

    def __init__(self, command: str, cfg: ExperimentConfig):
        self.command = command
        self.cfg = cfg
        self.out = Path(cfg.output_dir)
        self.out.parent.mkdir(parents=True, exist_ok=True)
        self.tmp = Path(tempfile.mkdtemp(prefix=f".{self.out.name}.tmp-", dir=self.out.parent))
        self.files: list[str] = []
        self.started = time.perf_counter()

    def path(self, name: str) -> Path:
        if name not in self.files:
            self.files.append(name)
        return self.tmp / name

    def finish(self, results: dict) -> dict:
        report = {
            "command": self.command,
            "config": self.cfg.to_json(),
            "versions": {
                "injury_risk": __version__,
                "numpy": np.__version__,
                "python": platform.python_version(),
            },
            "results": results,
            "artifacts": sorted(self.files + ["report.json"]),
        }
        (self.tmp / "report.json").write_text(json.dumps(report, indent=1, sort_keys=True) + "\n")
        elapsed = time.perf_counter() - self.started
        (self.tmp / "timing.json").write_text(json.dumps({"wall_clock_seconds": round(elapsed, 3)}) + "\n")
        self.out.mkdir(parents=True, exist_ok=True)
        for f in sorted(self.tmp.iterdir()):
            os.replace(f, self.out / f.name)
        self.tmp.rmdir()
        return report

    def abort(self) -> None:
        shutil.rmtree(self.tmp, ignore_errors=True)


# ---------------------------------------------------------------------------
# commands


def cmd_generate(cfg: ExperimentConfig, run: Run) -> dict:
    if cfg.synthetic is None:
        raise ConfigError("generate needs a synthetic dataset config")
    source, tr, te = generate_org_pair(cfg.synthetic)
    counts = {}
    for name, d in (("source", source), ("target_train", tr), ("target_test", te)):
        write_csv(d, run.path(f"{name}.csv"))
        counts[name] = {"n_samples": d.n_samples, "n_positive": int(d.labels.sum())}
    return {"datasets": counts, "domain_auc": domain_auc(source, tr)}


def _save_model(run: Run, model) -> None:
    run.path("model.json").write_text(json.dumps(model.to_json(), indent=1) + "\n")


def _load_model(cfg: ExperimentConfig):
    if cfg.model_path is None:
        raise ConfigError("a model path is required (--model or model.path)")
    if not Path(cfg.model_path).is_file():
        raise ConfigError(f"model file not found: {cfg.model_path}")
    return ensemble.load_model(cfg.model_path)


def _curves(run: Run, scores, d: Dataset, tag: str = "") -> None:
    (rec, prec, _), ap = evaluation.pr_curve_and_aucpr(scores, d.labels)
    export.write_columns(run.path(f"pr{tag}.csv"), {"recall": rec, "precision": prec})
    export.line_chart(run.path(f"pr{tag}.svg"), {f"AUCPR={ap:.4f}": (rec, prec)}, "recall", "precision")
    roc = evaluation.roc_points(scores, d.labels)
    export.write_columns(run.path(f"roc{tag}.csv"), {"fpr": roc[:, 0], "tpr": roc[:, 1]})
    export.line_chart(run.path(f"roc{tag}.svg"), {"ROC": (roc[:, 0], roc[:, 1])}, "false positive rate", "true positive rate")


def cmd_train(cfg: ExperimentConfig, run: Run) -> dict:
    train, test = train_test(cfg)
    model = fit_model(cfg, train)
    _save_model(run, model)
    out = {"model_kind": cfg.model_kind, "n_train": train.n_samples}
    if isinstance(model, gbdt.GbdtModel):
        out["n_trees"] = len(model.trees)
        out["best_iteration"] = model.best_iteration
    if test is not None:
        scores = model.predict_proba(test.features)
        out["test"] = metric_row(scores, test, cfg.threshold, cfg.metrics)
    return out


def cmd_evaluate(cfg: ExperimentConfig, run: Run) -> dict:
    model = _load_model(cfg)
    _, test = train_test(cfg)
    if test is None:
        raise ConfigError("evaluate needs a test dataset")
    scores = model.predict_proba(test.features)
    _curves(run, scores, test)
    return {"n_test": test.n_samples, "test": metric_row(scores, test, cfg.threshold, cfg.metrics)}


def cmd_costcurve(cfg: ExperimentConfig, run: Run) -> dict:
    train, test = train_test(cfg)
    if test is None:
        raise ConfigError("costcurve needs a test dataset")
    cols, series, areas = {}, {}, {}
    pc = None
    for kind in cfg.cost_curve_kinds:
        model = fit_model(cfg, train, kind)
        curve = evaluation.cost_curve(evaluation.roc_points(model.predict_proba(test.features), test.labels))
        pc = curve.pc
        cols[kind] = curve.envelope
        series[kind] = (curve.pc, curve.envelope)
        areas[kind] = float(np.sum((curve.envelope[1:] + curve.envelope[:-1]) / 2.0 * np.diff(curve.pc)))
    table = {"pc": pc, "always_negative": pc.copy(), "always_positive": 1.0 - pc, **cols}
    export.write_columns(run.path("costcurve.csv"), table)
    series["always negative"] = (pc, pc)
    series["always positive"] = (pc, 1.0 - pc)
    styles = {"always negative": "k:", "always positive": "k--"}
    export.line_chart(run.path("costcurve.svg"), series, "probability cost PC(+)", "normalized expected cost", styles=styles)
    return {"n_test": test.n_samples, "prevalence": test.prevalence, "envelope_area": areas}


def cmd_optimize_threshold(cfg: ExperimentConfig, run: Run) -> dict:
    if cfg.profit_matrix is None:
        raise ConfigError("optimize-threshold needs eval.profit_matrix")
    train, test = train_test(cfg)
    if test is None:
        raise ConfigError("optimize-threshold needs a test dataset")
    model = _load_model(cfg) if cfg.model_path else fit_model(cfg, train)
    sweep = evaluation.optimize_profit_threshold(
        model.predict_proba(test.features), test.labels, None, cfg.profit_matrix, cfg.n_thresholds
    )
    cols = {"threshold": sweep.thresholds, "profit": sweep.profits}
    if sweep.ratios is not None:
        cols["profit_ratio"] = sweep.ratios
    export.write_columns(run.path("threshold_sweep.csv"), cols)
    export.line_chart(run.path("threshold_sweep.svg"), {"profit": (sweep.thresholds, sweep.profits)}, "threshold", "profit")
    return {
        "best_threshold": sweep.best_threshold,
        "best_profit": sweep.best_profit,
        "benchmark_profit": sweep.benchmark_profit,
        "best_profit_ratio": None if sweep.ratios is None else float(sweep.best_profit / sweep.benchmark_profit),
        "n_thresholds": cfg.n_thresholds,
    }


def _transfer_cfg(cfg: ExperimentConfig) -> transfer.TransferConfig:
    return cfg.transfer or transfer.TransferConfig(seed=derive_seed(cfg.seed, "transfer"))


def cmd_transfer(cfg: ExperimentConfig, run: Run) -> dict:
    source, tr, te = org_pair(cfg)
    tcfg = _transfer_cfg(cfg)
    rows, hybrid = transfer_table(source, tr, te, tcfg, cfg.gbdt, cfg.threshold)
    export.write_table(
        run.path("transfer_table.csv"),
        ["method", *METRIC_NAMES],
        [[name, *(r[k] for k in METRIC_NAMES)] for name, r in rows.items()],
    )
    hybrid.to_csv(run.path("hybrid_weights.csv"))
    return {
        "alpha": tcfg.alpha,
        "domain_auc": domain_auc(source, tr, tcfg.lr_lambda),
        "table": rows,
        "hybrid_weight_notes": hybrid.notes,
    }


def cmd_sweep_alpha(cfg: ExperimentConfig, run: Run) -> dict:
    source, tr, te = org_pair(cfg)
    rows = alpha_sweep(source, tr, te, _transfer_cfg(cfg), cfg.gbdt, ALPHA_GRID, cfg.threshold)
    export.write_table(run.path("alpha_sweep.csv"), ["alpha", *METRIC_NAMES], [[r["alpha"], *(r[k] for k in METRIC_NAMES)] for r in rows])
    x = [r["alpha"] for r in rows]
    export.line_chart(run.path("alpha_sweep.svg"), {"HYBRID": (x, [r["aucpr"] for r in rows])}, "alpha", "AUCPR", styles={"HYBRID": "o-"})
    best = max(rows, key=lambda r: r["aucpr"])
    return {"sweep": rows, "best_alpha": best["alpha"]}


def cmd_explain(cfg: ExperimentConfig, run: Run) -> dict:
    train, _ = train_test(cfg)
    model = _load_model(cfg) if cfg.model_path else fit_model(cfg, train, "GBDT")
    if not isinstance(model, gbdt.GbdtModel):
        raise ConfigError("explain needs a boosted-tree (GBDT) model")
    ex = cfg.explain
    bins = fit_quantile_bins(train, int(ex.get("n_bins", 10)))
    impact = explain.binned_impact(model, train, bins)
    rows = []
    for f in impact.features:
        rows.extend([f.feature, i, lab, int(c), m] for i, (lab, c, m) in enumerate(zip(f.bin_labels, f.counts, f.mean_contribution)))
    export.write_table(run.path("binned_impact.csv"), ["feature", "bin", "label", "count", "mean_contribution"], rows)

    features = list(ex.get("features") or train.feature_names[:3])
    unknown = [f for f in features if f not in train.feature_names]
    if unknown:
        raise ConfigError(f"unknown explain features: {unknown}")
    n_points = int(ex.get("grid_points", 20))
    pdp_rows, results = [], {"mean_bias": impact.mean_bias, "features": features}
    for name in features:
        fi = impact[name]
        safe = name.replace("/", "_")
        export.bar_chart(run.path(f"impact_{safe}.svg"), list(fi.bin_labels), list(fi.mean_contribution), "mean log-odds contribution", name)
        grid = explain.default_grid(train, name, None, n_points)
        curve = explain.pdp(model, train, name, grid)
        pdp_rows.extend([name, v, p] for v, p in zip(curve.grid, curve.values))
        export.line_chart(run.path(f"pdp_{safe}.svg"), {name: (curve.grid, curve.values)}, name, "mean predicted risk")
    export.write_table(run.path("pdp.csv"), ["feature", "value", "pdp"], pdp_rows)

    if "dag" in ex:
        dag_path = Path(ex["dag"])
        if not dag_path.is_file():
            raise ConfigError(f"DAG file not found: {dag_path}")
        g = load_dag(dag_path)
        if g.treatment is None or g.outcome is None:
            raise ConfigError("DAG must declare a treatment and an outcome")
        mapping = dict(ex.get("node_to_feature") or {})
        x_feature = mapping.get(g.treatment, g.treatment)
        z = list(ex.get("adjustment") or [])
        grid = explain.default_grid(train, x_feature, None, n_points)
        try:
            curve = explain.adjusted_effect_curve(model, train, x_feature, grid, g, z, mapping)
        except explain.BackdoorViolation as e:
            raise ConfigError(f"adjustment set rejected: {e}") from e
        j = train.feature_names.index(x_feature)
        # the association the raw data shows, for comparison with the adjusted curve
        assoc = explain.loess_smooth(train.features[:, j], model.predict_proba(train.features), 0.5, curve.grid)
        export.write_columns(
            run.path("adjusted_effect.csv"), {"value": curve.grid, "adjusted_risk": curve.values, "loess_risk": assoc}
        )
        export.line_chart(
            run.path("adjusted_effect.svg"),
            {f"adjusted for {', '.join(z) or 'nothing'}": (curve.grid, curve.values), "loess of predictions": (curve.grid, assoc)},
            x_feature,
            "risk",
        )
        results["adjusted_effect"] = {"treatment": x_feature, "adjustment_set": list(curve.adjustment_set)}
    return results


COMMANDS: dict[str, Callable[[ExperimentConfig, Run], dict]] = {
    "generate": cmd_generate,
    "train": cmd_train,
    "evaluate": cmd_evaluate,
    "costcurve": cmd_costcurve,
    "optimize-threshold": cmd_optimize_threshold,
    "transfer": cmd_transfer,
    "sweep-alpha": cmd_sweep_alpha,
    "explain": cmd_explain,
}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="injury-risk", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        s = sub.add_parser(name)
        s.add_argument("--config", help="JSON experiment config")
        s.add_argument("--seed", type=int)
        s.add_argument("--alpha", type=float)
        s.add_argument("--model-kind", choices=sorted(MODEL_KINDS))
        s.add_argument("--model", dest="model_path", help="saved model.json to load")
        s.add_argument("--output-dir")
        s.add_argument("--threads", type=int)
    return p


def run_command(command: str, cfg: ExperimentConfig) -> dict:
    run = Run(command, cfg)
    try:
        results = COMMANDS[command](cfg, run)
        return run.finish(results)
    except BaseException:
        run.abort()
        raise


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    overrides = {k: getattr(args, k) for k in ("seed", "alpha", "model_kind", "model_path", "output_dir", "threads")}
    try:
        cfg = load_config(args.config, overrides)
        report = run_command(args.command, cfg)
    except ConfigError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except Exception as e:  # noqa: BLE001 - any runtime failure maps to exit 1
        print(f"error: {type(e).__name__}: {e}", file=sys.stderr)
        return 1
    print(json.dumps({"command": report["command"], "output_dir": cfg.output_dir, "artifacts": report["artifacts"]}))
    return 0


if __name__ == "__main__":
    sys.exit(main())
