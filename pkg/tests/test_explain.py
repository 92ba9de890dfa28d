import math

import numpy as np
import pytest

from injury_risk import causal, explain, gbdt
from injury_risk._tree import Tree
from injury_risk.dataset import Dataset, fit_quantile_bins


def fitted(n=200, d=3, seed=0, rounds=15):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(n, d))
    y = (X[:, 0] - 0.5 * X[:, 1] + 0.8 * rng.normal(size=n) > 0.5).astype(int)
    y[:2] = [0, 1]
    ds = Dataset(X, y, feature_names=tuple(f"x{j}" for j in range(d)))
    return gbdt.fit(ds, None, gbdt.GbdtConfig(n_rounds=rounds, max_depth=3)), ds


def stump(feature, threshold, left, right):
    arr = lambda v, t=float: np.array(v, dtype=t)  # noqa: E731
    return Tree(
        arr([feature, -1, -1], np.int64),
        arr([threshold, 0, 0]),
        arr([1, -1, -1], np.int64),
        arr([2, -1, -1], np.int64),
        arr([0.0, left, right]),
        arr([2.0, 1.0, 1.0]),
        arr([(left + right) / 2, left, right]),
    )


class TestBinnedImpact:
    def test_matches_group_by_oracle(self):
        m, d = fitted()
        bins = fit_quantile_bins(d, 5)
        out = explain.binned_impact(m, d, bins)
        idx = bins.assign(d.features)
        for j, f in enumerate(out.features):
            groups = {}
            for i in range(d.n_samples):
                c = m.path_contributions(d.features[i]).contributions[j]
                groups.setdefault(int(idx[i, j]), []).append(c)
            for b, vals in groups.items():
                assert f.mean_contribution[b] == pytest.approx(sum(vals) / len(vals), abs=1e-12)
                assert f.counts[b] == len(vals)
            assert f.counts.sum() == d.n_samples

    def test_global_mean_equals_mean_margin(self):
        m, d = fitted(seed=1)
        out = explain.binned_impact(m, d, fit_quantile_bins(d, 4))
        total = out.mean_bias + sum(float(np.dot(f.counts, f.mean_contribution)) / out.n_samples for f in out.features)
        assert total == pytest.approx(m.predict_margin(d.features).mean(), abs=1e-6)

    def test_ignored_feature_is_zero(self):
        _, d = fitted(seed=2)
        model = gbdt.GbdtModel((stump(0, 0.0, -1.0, 1.0),), 0.5, 0.1, 3)
        out = explain.binned_impact(model, d, fit_quantile_bins(d, 5))
        assert np.all(out["x2"].mean_contribution == 0) and np.all(out["x1"].mean_contribution == 0)

    def test_single_sample_bin(self):
        model = gbdt.GbdtModel((stump(0, 0.0, -1.0, 1.0),), 1.0, 0.0, 1)
        d = Dataset(np.array([[-1.0], [0.5], [0.6], [0.7]]), [0, 1, 0, 1])
        bins = fit_quantile_bins(d, 4)
        out = explain.binned_impact(model, d, bins)
        first = out.features[0]
        lone = int(bins.assign(d.features)[0, 0])
        assert first.counts[lone] == 1
        assert first.mean_contribution[lone] == model.path_contributions([-1.0]).contributions[0]

    def test_dimension_mismatch(self):
        m, _ = fitted()
        d = Dataset(np.zeros((4, 2)), [0, 1, 0, 1])
        with pytest.raises(ValueError):
            explain.binned_impact(m, d, fit_quantile_bins(d, 2))


class TestPdp:
    def test_brute_force_substitution(self):
        m, d = fitted(n=100, seed=3)
        grid = [-1.5, -0.2, 0.0, 0.7, 2.0]
        curve = explain.pdp(m, d, 0, grid)
        for v, got in zip(grid, curve.values):
            probs = []
            for row in d.features:
                x = row.copy()
                x[0] = v
                probs.append(1 / (1 + math.exp(-m.predict_margin(x)[0])))
            assert got == pytest.approx(sum(probs) / len(probs), abs=1e-14)
        assert curve.adjustment_set == ("x1", "x2")

    def test_ignored_feature_gives_constant(self):
        model = gbdt.GbdtModel((stump(0, 0.0, -1.0, 1.0),), 1.0, 0.2, 2)
        _, d = fitted(d=2, seed=4)
        curve = explain.pdp(model, d, 1, np.linspace(-2, 2, 7))
        np.testing.assert_allclose(curve.values, model.predict_proba(d.features).mean(), atol=1e-15)

    def test_additive_two_stumps(self):
        model = gbdt.GbdtModel((stump(0, 0.0, -1.0, 2.0), stump(1, 0.5, 3.0, -4.0)), 1.0, 0.0, 2)
        _, d = fitted(d=2, seed=5)
        h_mean = np.where(d.features[:, 1] < 0.5, 3.0, -4.0).mean()
        got = explain.pdp_margin(model, d, 0, [-1.0, 1.0])
        np.testing.assert_allclose(got, [-1.0 + h_mean, 2.0 + h_mean], atol=1e-12)

    def test_order_and_duplication_invariance(self):
        m, d = fitted(seed=6)
        grid = np.linspace(-2, 2, 9)
        base = explain.pdp(m, d, "x1", grid).values
        perm = np.random.default_rng(0).permutation(d.n_samples)
        np.testing.assert_allclose(explain.pdp(m, d.subset(perm), "x1", grid).values, base, rtol=1e-12)
        doubled = d.subset(np.r_[np.arange(d.n_samples), np.arange(d.n_samples)])
        np.testing.assert_allclose(explain.pdp(m, doubled, "x1", grid).values, base, rtol=1e-12)

    def test_probabilities_in_range(self):
        m, d = fitted(seed=7)
        v = explain.pdp(m, d, 2, explain.default_grid(d, 2)).values
        assert len(v) == 20 and np.all((v >= 0) & (v <= 1))

    def test_default_grid_uses_bin_edges(self):
        _, d = fitted(seed=8)
        bins = fit_quantile_bins(d, 5)
        np.testing.assert_array_equal(explain.default_grid(d, 0, bins), bins.edges[0])

    @pytest.mark.parametrize("grid", [[], [np.nan]])
    def test_bad_grid(self, grid):
        m, d = fitted()
        with pytest.raises(ValueError):
            explain.pdp(m, d, 0, grid)

    def test_unknown_feature(self):
        m, d = fitted()
        with pytest.raises(ValueError):
            explain.pdp(m, d, "height", [0.0])
        with pytest.raises(ValueError):
            explain.pdp(m, d, 7, [0.0])


class TestAdjustedCurve:
    GRAPH = causal.Dag.from_edges(
        [("x1", "x0"), ("x1", "injury"), ("x0", "injury"), ("x2", "injury")], treatment="x0", outcome="injury"
    )

    def test_full_set_equals_pdp(self):
        m, d = fitted(seed=9)
        grid = np.linspace(-1, 1, 5)
        adj = explain.adjusted_effect_curve(m, d, "x0", grid, self.GRAPH, {"x1", "x2"})
        assert adj.values.tobytes() == explain.pdp(m, d, "x0", grid).values.tobytes()
        assert sorted(adj.adjustment_set) == ["x1", "x2"]

    def test_empty_set_on_direct_graph(self):
        m, d = fitted(seed=10)
        g = causal.Dag.from_edges([("x0", "injury")], outcome="injury")
        grid = [0.0, 1.0]
        adj = explain.adjusted_effect_curve(m, d, "x0", grid, g, ())
        np.testing.assert_array_equal(adj.values, explain.pdp(m, d, 0, grid).values)

    def test_refuses_open_backdoor(self):
        m, d = fitted(seed=11)
        with pytest.raises(causal.BackdoorViolation, match="back-door path"):
            explain.adjusted_effect_curve(m, d, "x0", [0.0], self.GRAPH, set())

    def test_node_mapping(self):
        m, d = fitted(seed=12)
        g = causal.Dag.from_edges([("T", "A"), ("T", "Y"), ("A", "Y")], outcome="Y")
        mapping = {"A": "x0", "T": "x1"}
        adj = explain.adjusted_effect_curve(m, d, "x0", [0.0, 0.5], g, {"T"}, mapping)
        assert adj.adjustment_set == ("x1",)
        g2 = causal.Dag.from_edges([("T", "A"), ("T", "Y"), ("A", "Y"), ("Q", "Y")], outcome="Y")
        with pytest.raises(ValueError, match="column"):
            explain.adjusted_effect_curve(m, d, "x0", [0.0], g2, {"T", "Q"}, mapping)

    def test_simpson_reversal(self):
        rng = np.random.default_rng(0)
        n = 4000
        c = rng.normal(size=n)
        x = 2.0 * c + 0.5 * rng.normal(size=n)
        # structural effect of x is +1; the confounder pushes x up and risk down
        logit = 1.0 * x - 3.0 * c - 1.0
        y = (rng.random(n) < 1 / (1 + np.exp(-logit))).astype(int)
        d = Dataset(np.c_[x, c], y, feature_names=("x", "c"))
        m = gbdt.fit(d, None, gbdt.GbdtConfig(n_rounds=150, max_depth=3))
        g = causal.Dag.from_edges([("c", "x"), ("c", "y"), ("x", "y")], outcome="y")
        grid = np.quantile(x, np.linspace(0.1, 0.9, 9))
        adj = explain.adjusted_effect_curve(m, d, "x", grid, g, {"c"})
        adj_slope = np.polyfit(grid, adj.values, 1)[0]
        smooth = explain.loess_smooth(x, y.astype(float), 0.5, grid)
        raw_slope = np.polyfit(grid, smooth, 1)[0]
        assert adj_slope > 0 > raw_slope


class TestLoess:
    def test_line(self):
        x = np.random.default_rng(0).random(50) * 10
        y = 3.0 * x - 2.0
        np.testing.assert_allclose(explain.loess_smooth(x, y, 0.3), y, atol=1e-9)

    def test_constant(self):
        x = np.linspace(0, 1, 30)
        np.testing.assert_allclose(explain.loess_smooth(x, np.full(30, 4.2)), 4.2, atol=1e-12)

    def test_sine_half_period(self):
        x = np.linspace(0, np.pi, 200)
        fit = explain.loess_smooth(x, np.sin(x), 0.3)
        assert np.max(np.abs(fit - np.sin(x))) <= 0.05

    def test_symmetric_window_is_tricube_mean(self):
        # between two grid points with 30 neighbours on each side the local slope term vanishes
        x = np.linspace(0, 2 * np.pi, 200)
        y = np.sin(x)
        for i in range(30, 169):
            x0 = 0.5 * (x[i] + x[i + 1])
            near = range(i - 29, i + 31)
            dmax = max(abs(x[k] - x0) for k in near)
            w = [(1 - (abs(x[k] - x0) / dmax) ** 3) ** 3 for k in near]
            expected = sum(wk * y[k] for wk, k in zip(w, near)) / sum(w)
            assert explain.loess_smooth(x, y, 0.3, [x0])[0] == pytest.approx(expected, abs=1e-12)

    def test_eval_points(self):
        x = np.linspace(0, 1, 20)
        out = explain.loess_smooth(x, 2 * x, 0.5, [0.25, 0.75])
        np.testing.assert_allclose(out, [0.5, 1.5], atol=1e-12)

    @pytest.mark.parametrize(
        "x,y,span",
        [
            (np.ones(10), np.arange(10.0), 0.5),
            (np.arange(4.0), np.arange(4.0), 0.5),
            (np.arange(10.0), np.arange(10.0), 0.0),
            (np.arange(10.0), np.arange(10.0), 0.1),
            (np.arange(10.0), np.arange(9.0), 0.5),
        ],
    )
    def test_errors(self, x, y, span):
        with pytest.raises(ValueError):
            explain.loess_smooth(x, y, span)
