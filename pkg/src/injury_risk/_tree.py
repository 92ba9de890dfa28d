"""Exact-greedy binary tree growth shared by the boosted model and the weak learners.

Both users reduce to the same split score. For Newton boosting the node
statistics are gradient/hessian sums ``(G, H)`` and a node scores
``G**2 / (H + lam)``. For a weighted Gini tree the statistics are the
positive mass and the total mass ``(P, W)`` with ``lam = 0``, and
``P**2 / W`` summed over children minus the parent equals half the weighted
Gini impurity reduction. Only the leaf value differs.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
from numba import njit

LEAF = -1


@dataclass(frozen=True)
class Tree:
    """Flat array representation of a binary tree.

    ``feature[i] == -1`` marks a leaf. ``cover`` is the hessian (or weight)
    sum of training samples reaching each node and ``node_value`` is the
    cover-weighted mean of the leaf values below each node.
    """

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray
    cover: np.ndarray
    node_value: np.ndarray

    @property
    def n_nodes(self) -> int:
        return len(self.feature)

    def apply(self, X: np.ndarray) -> np.ndarray:
        """Leaf index reached by every row of ``X``."""
        node = np.zeros(X.shape[0], dtype=np.int64)
        active = np.flatnonzero(self.feature[node] != LEAF)
        while active.size:
            cur = node[active]
            f = self.feature[cur]
            go_left = X[active, f] < self.threshold[cur]
            node[active] = np.where(go_left, self.left[cur], self.right[cur])
            active = active[self.feature[node[active]] != LEAF]
        return node

    def predict(self, X: np.ndarray) -> np.ndarray:
        return self.value[self.apply(X)]

    def decision_path(self, x: np.ndarray) -> list[int]:
        path = [0]
        node = 0
        while self.feature[node] != LEAF:
            f = self.feature[node]
            node = int(self.left[node] if x[f] < self.threshold[node] else self.right[node])
            path.append(node)
        return path

    @property
    def max_depth(self) -> int:
        depth = np.zeros(self.n_nodes, dtype=np.int64)
        for i in range(self.n_nodes):
            if self.feature[i] != LEAF:
                depth[self.left[i]] = depth[i] + 1
                depth[self.right[i]] = depth[i] + 1
        return int(depth.max())

    def to_json(self) -> dict:
        nodes = []
        for i in range(self.n_nodes):
            if self.feature[i] == LEAF:
                nodes.append({"leaf": float(self.value[i]), "cover": float(self.cover[i])})
            else:
                nodes.append(
                    {
                        "feature": int(self.feature[i]),
                        "threshold": float(self.threshold[i]),
                        "left": int(self.left[i]),
                        "right": int(self.right[i]),
                        "cover": float(self.cover[i]),
                    }
                )
        return {"nodes": nodes}

    @classmethod
    def from_json(cls, doc: dict) -> "Tree":
        nodes = doc["nodes"]
        n = len(nodes)
        feature = np.full(n, LEAF, dtype=np.int64)
        threshold = np.zeros(n)
        left = np.full(n, LEAF, dtype=np.int64)
        right = np.full(n, LEAF, dtype=np.int64)
        value = np.zeros(n)
        cover = np.zeros(n)
        for i, node in enumerate(nodes):
            cover[i] = node["cover"]
            if "leaf" in node:
                value[i] = node["leaf"]
            else:
                feature[i] = node["feature"]
                threshold[i] = node["threshold"]
                left[i] = node["left"]
                right[i] = node["right"]
        return _finalize(feature, threshold, left, right, value, cover)


def _finalize(feature, threshold, left, right, value, cover) -> Tree:
    node_value = value.astype(np.float64).copy()
    # children always have larger indices than their parent
    for i in range(len(feature) - 1, -1, -1):
        if feature[i] != LEAF:
            lc, rc = cover[left[i]], cover[right[i]]
            if lc + rc > 0:
                node_value[i] = (lc * node_value[left[i]] + rc * node_value[right[i]]) / (lc + rc)
            else:
                node_value[i] = 0.5 * (node_value[left[i]] + node_value[right[i]])
    arrays = [feature, threshold, left, right, value, cover, node_value]
    for a in arrays:
        a.setflags(write=False)
    return Tree(*arrays)


def presort(X: np.ndarray, rows: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Per-feature ascending order of ``rows`` plus the matching sorted values.

    Both arrays have shape ``(n_features, len(rows))``.
    """
    X = np.asarray(X, dtype=np.float64)
    order = np.argsort(X[rows], axis=0, kind="stable")
    S = np.ascontiguousarray(rows[order].T)
    XS = np.ascontiguousarray(np.take_along_axis(X[rows], order, axis=0).T)
    return S, XS


def grow_tree(
    X: np.ndarray,
    sorted_rows: tuple[np.ndarray, np.ndarray],
    g: np.ndarray,
    h: np.ndarray,
    *,
    max_depth: int,
    lam: float,
    min_child_weight: float,
    leaf_value: Callable[[float, float], float],
) -> Tree:
    """Grow one tree level by level with exact greedy split search.

    Candidate thresholds are midpoints between consecutive distinct values of
    the presorted rows. Ties in gain go to the lowest feature index, then the
    lowest threshold. Rows absent from ``sorted_rows`` never influence the tree.
    """
    S, XS = sorted_rows
    X = np.ascontiguousarray(X, dtype=np.float64)
    g = np.ascontiguousarray(g, dtype=np.float64)
    h = np.ascontiguousarray(h, dtype=np.float64)
    feature, threshold, left, right, G, H, n_nodes = _grow(
        X, S, XS, g, h, int(max_depth), float(lam), float(min_child_weight)
    )
    feature = feature[:n_nodes].copy()
    value = np.zeros(n_nodes)
    for i in np.flatnonzero(feature == LEAF):
        value[i] = leaf_value(float(G[i]), float(H[i]))
    return _finalize(
        feature,
        threshold[:n_nodes].copy(),
        left[:n_nodes].copy(),
        right[:n_nodes].copy(),
        value,
        H[:n_nodes].copy(),
    )


@njit(cache=True)
def _grow(X, S, XS, g, h, max_depth, lam, min_child_weight):
    n_features, m = S.shape
    max_nodes = 2 ** (max_depth + 1) - 1
    feature = np.full(max_nodes, -1, dtype=np.int64)
    threshold = np.zeros(max_nodes)
    left = np.full(max_nodes, -1, dtype=np.int64)
    right = np.full(max_nodes, -1, dtype=np.int64)
    G = np.zeros(max_nodes)
    H = np.zeros(max_nodes)

    # node_of holds the level-local index of each row's current node, -1 once settled
    node_of = np.full(X.shape[0], -1, dtype=np.int64)
    for i in range(m):
        r = S[0, i]
        node_of[r] = 0
        G[0] += g[r]
        H[0] += h[r]
    level = np.zeros(1, dtype=np.int64)
    n_nodes = 1
    if m == 0:
        return feature, threshold, left, right, G, H, n_nodes

    for depth in range(max_depth):
        k_count = level.shape[0]
        if k_count == 0:
            break
        best_gain = np.zeros(k_count)
        best_f = np.full(k_count, -1, dtype=np.int64)
        best_thr = np.zeros(k_count)
        best_gl = np.zeros(k_count)
        best_hl = np.zeros(k_count)
        GL = np.zeros(k_count)
        HL = np.zeros(k_count)
        last_x = np.zeros(k_count)
        seen = np.zeros(k_count, dtype=np.bool_)
        for f in range(n_features):
            GL[:] = 0.0
            HL[:] = 0.0
            seen[:] = False
            for i in range(m):
                r = S[f, i]
                k = node_of[r]
                if k < 0:
                    continue
                x = XS[f, i]
                if seen[k] and last_x[k] < x:
                    node = level[k]
                    hl = HL[k]
                    hr = H[node] - hl
                    if (
                        hl >= min_child_weight
                        and hr >= min_child_weight
                        and hl + lam > 0.0
                        and hr + lam > 0.0
                    ):
                        gl = GL[k]
                        gr = G[node] - gl
                        gain = 0.5 * (
                            gl * gl / (hl + lam)
                            + gr * gr / (hr + lam)
                            - G[node] * G[node] / (H[node] + lam)
                        )
                        if gain > best_gain[k]:
                            best_gain[k] = gain
                            best_f[k] = f
                            thr = 0.5 * (last_x[k] + x)
                            if not last_x[k] < thr:
                                thr = x
                            best_thr[k] = thr
                            best_gl[k] = gl
                            best_hl[k] = hl
                GL[k] += g[r]
                HL[k] += h[r]
                last_x[k] = x
                seen[k] = True

        n_split = 0
        for k in range(k_count):
            if best_f[k] >= 0:
                n_split += 1
        next_level = np.zeros(2 * n_split, dtype=np.int64)
        child_of = np.full(k_count, -1, dtype=np.int64)
        j = 0
        for k in range(k_count):
            if best_f[k] < 0:
                continue
            node = level[k]
            lc = n_nodes
            rc = n_nodes + 1
            n_nodes += 2
            feature[node] = best_f[k]
            threshold[node] = best_thr[k]
            left[node] = lc
            right[node] = rc
            G[lc] = best_gl[k]
            H[lc] = best_hl[k]
            G[rc] = G[node] - best_gl[k]
            H[rc] = H[node] - best_hl[k]
            next_level[2 * j] = lc
            next_level[2 * j + 1] = rc
            child_of[k] = 2 * j
            j += 1
        last = depth + 1 == max_depth
        for i in range(m):
            r = S[0, i]
            k = node_of[r]
            if k < 0:
                continue
            c = child_of[k]
            if c < 0 or last:
                node_of[r] = -1
            elif X[r, best_f[k]] < best_thr[k]:
                node_of[r] = c
            else:
                node_of[r] = c + 1
        level = next_level
    return feature, threshold, left, right, G, H, n_nodes
