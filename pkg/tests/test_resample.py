import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from injury_risk import resample as rs

import oracles


def standardized(points):
    n, d = len(points), len(points[0])
    out = [list(p) for p in points]
    for j in range(d):
        mu = sum(p[j] for p in points) / n
        sd = (sum((p[j] - mu) ** 2 for p in points) / n) ** 0.5 or 1.0
        for row in out:
            row[j] = (row[j] - mu) / sd
    return out


def on_some_segment(s, points, nn, tol=1e-9):
    """True when ``s`` lies between some point and one of its listed neighbours."""
    P = np.asarray(points)
    for i, js in enumerate(nn):
        for j in js:
            a, b = P[i], P[j]
            lo, hi = np.minimum(a, b), np.maximum(a, b)
            if np.any(s < lo - tol) or np.any(s > hi + tol):
                continue
            d = b - a
            if not d.any():
                if np.allclose(s, a, atol=tol):
                    return True
                continue
            u = np.dot(s - a, d) / np.dot(d, d)
            if np.max(np.abs(a + u * d - s)) <= tol:
                return True
    return False


class TestSmote:
    def test_twenty_points_on_knn_segments(self):
        rng = np.random.default_rng(0)
        pts = rng.normal(size=(20, 2)) * [1.0, 30.0]
        out = rs.smote(pts, rs.SmoteConfig(k_neighbors=5, n_synthetic=200, seed=1))
        assert out.shape == (200, 2)
        nn = oracles.knn(standardized(pts.tolist()), 5)
        assert all(on_some_segment(s, pts, nn) for s in out)

    def test_neighbours_match_brute_force(self):
        rng = np.random.default_rng(2)
        pts = rng.normal(size=(40, 3)) * [1.0, 5.0, 0.1]
        expected = oracles.knn(standardized(pts.tolist()), 4)
        np.testing.assert_array_equal(rs.minority_neighbors(pts, 4), expected)

    def test_neighbour_ties_use_lower_index(self):
        pts = np.array([[0.0], [1.0], [-1.0], [2.0]])
        assert list(rs.minority_neighbors(pts, 1)[0]) == [1]

    def test_provenance_consistent(self):
        rng = np.random.default_rng(3)
        pts = rng.normal(size=(15, 2))
        r = rs.smote_detailed(pts, rs.SmoteConfig(n_synthetic=50, seed=4))
        np.testing.assert_allclose(r.rows, pts[r.base_index] + r.gap[:, None] * (pts[r.neighbor_index] - pts[r.base_index]))
        assert np.all((r.gap >= 0) & (r.gap < 1))
        np.testing.assert_array_equal(r.base_index, np.arange(50) % 15)

    def test_identical_points(self):
        out = rs.smote(np.array([[1.5, -2.0], [1.5, -2.0]]), rs.SmoteConfig(n_synthetic=7, seed=0))
        assert np.all(out == [1.5, -2.0])

    def test_single_row_duplicates(self):
        out = rs.smote(np.array([[3.0, 4.0]]), rs.SmoteConfig(n_synthetic=4))
        assert out.shape == (4, 2) and np.all(out == [3.0, 4.0])

    def test_empty_request(self):
        assert rs.smote(np.ones((3, 2)), rs.SmoteConfig(n_synthetic=0)).shape == (0, 2)

    def test_k_reduced_to_count_minus_one(self):
        pts = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
        r = rs.smote_detailed(pts, rs.SmoteConfig(k_neighbors=10, n_synthetic=60, seed=5))
        assert np.all(r.neighbor_index != r.base_index)
        pairs = {(int(b), int(n)) for b, n in zip(r.base_index, r.neighbor_index)}
        assert len(pairs) == 6

    def test_deterministic(self):
        pts = np.random.default_rng(6).normal(size=(10, 3))
        c = rs.SmoteConfig(n_synthetic=25, seed=11)
        np.testing.assert_array_equal(rs.smote(pts, c), rs.smote(pts, c))
        assert not np.array_equal(rs.smote(pts, c), rs.smote(pts, rs.SmoteConfig(n_synthetic=25, seed=12)))

    def test_errors(self):
        with pytest.raises(ValueError):
            rs.smote(np.zeros((0, 2)), rs.SmoteConfig(n_synthetic=1))
        with pytest.raises(ValueError):
            rs.SmoteConfig(k_neighbors=0)
        with pytest.raises(ValueError):
            rs.SmoteConfig(n_synthetic=-1)

    @settings(max_examples=50)
    @given(st.integers(1, 30), st.integers(1, 4), st.integers(1, 8), st.integers(0, 2**32 - 1))
    def test_within_bounding_box(self, n, d, k, seed):
        rng = np.random.default_rng(seed)
        pts = rng.normal(size=(n, d)) * rng.random(d) * 10
        out = rs.smote(pts, rs.SmoteConfig(k_neighbors=k, n_synthetic=40, seed=seed))
        assert np.all(out >= pts.min(0) - 1e-12) and np.all(out <= pts.max(0) + 1e-12)


class TestRandomSampling:
    def test_undersample_edges(self):
        rows = np.arange(10)[:, None] * 1.0
        assert sorted(rs.random_undersample(rows, 10, 0)[:, 0]) == list(range(10))
        assert rs.random_undersample(rows, 0, 0).shape == (0, 1)
        with pytest.raises(ValueError):
            rs.random_undersample(rows, 11, 0)
        with pytest.raises(ValueError):
            rs.undersample_indices(10, -1, 0)

    def test_undersample_no_repeats(self):
        idx = rs.undersample_indices(50, 20, 3)
        assert len(set(idx.tolist())) == 20 and np.all(np.diff(idx) > 0)

    def test_undersample_uniform_over_seeds(self):
        counts = np.zeros(10)
        for seed in range(10000):
            counts[rs.undersample_indices(10, 3, seed)] += 1
        assert stats.chisquare(counts).pvalue > 0.001

    def test_oversample_edges(self):
        rows = np.arange(4)[:, None] * 1.0
        np.testing.assert_array_equal(rs.random_oversample(rows, 4, 0), rows)
        out = rs.random_oversample(rows, 9, 1)
        assert len(out) == 9 and set(out[:, 0]) <= set(rows[:, 0])
        with pytest.raises(ValueError):
            rs.random_oversample(rows, 3, 0)
        with pytest.raises(ValueError):
            rs.oversample_indices(0, 3, 0)

    def test_oversample_duplicates_uniform(self):
        counts = np.zeros(10)
        for seed in range(10000):
            extra = rs.oversample_indices(10, 11, seed)[10:]
            counts[extra] += 1
        assert stats.chisquare(counts).pvalue > 0.001

    @given(st.integers(1, 40), st.integers(0, 40), st.integers(0, 2**32 - 1))
    def test_deterministic(self, n, extra, seed):
        a = rs.oversample_indices(n, n + extra, seed)
        np.testing.assert_array_equal(a, rs.oversample_indices(n, n + extra, seed))
        k = min(extra, n)
        np.testing.assert_array_equal(rs.undersample_indices(n, k, seed), rs.undersample_indices(n, k, seed))
