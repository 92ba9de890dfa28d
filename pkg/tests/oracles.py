"""Slow, independent reference implementations used only by the tests.

Each oracle is written as a plain loop from the defining formula and shares no
code with the package.
"""

from __future__ import annotations

import itertools
import math


def confusion(scores, labels, weights, t):
    tp = fp = tn = fn = 0.0
    for s, y, w in zip(scores, labels, weights):
        if s >= t:
            if y == 1:
                tp += w
            else:
                fp += w
        else:
            if y == 1:
                fn += w
            else:
                tn += w
    return tp, fp, tn, fn


def macro_f1(tp, fp, tn, fn):
    def f1(a, b, c):
        den = 2 * a + b + c
        return 2 * a / den if den > 0 else 0.0

    return 0.5 * (f1(tp, fp, fn) + f1(tn, fn, fp))


def average_precision(scores, labels, weights):
    """Enumerate every distinct threshold, highest first, and sum recall steps times precision."""
    total_pos = sum(w for y, w in zip(labels, weights) if y == 1)
    ap, prev_recall = 0.0, 0.0
    for t in sorted(set(scores), reverse=True):
        tp, fp, _, _ = confusion(scores, labels, weights, t)
        prec = tp / (tp + fp) if tp + fp > 0 else 0.0
        rec = tp / total_pos
        ap += (rec - prev_recall) * prec
        prev_recall = rec
    return ap


def roc(scores, labels, weights):
    P = sum(w for y, w in zip(labels, weights) if y == 1)
    N = sum(w for y, w in zip(labels, weights) if y != 1)
    pts = [(0.0, 0.0)]
    for t in sorted(set(scores), reverse=True):
        tp, fp, _, _ = confusion(scores, labels, weights, t)
        pts.append((fp / N, tp / P))
    return pts


def envelope(roc_pts, pc_grid):
    out = []
    for pc in pc_grid:
        out.append(min((1 - tpr) * pc + fpr * (1 - pc) for fpr, tpr in roc_pts))
    return out


# ---------------------------------------------------------------------------
# binary AdaBoost.M2 state


def pseudo_loss(d, p, y):
    eps = 0.0
    for di, pi, yi in zip(d, p, y):
        h_true = pi if yi == 1 else 1 - pi
        h_false = 1 - h_true
        eps += di * (1 - h_true + h_false) / 2
    return eps


def update(d, p, y, beta):
    new = []
    for di, pi, yi in zip(d, p, y):
        h_true = pi if yi == 1 else 1 - pi
        h_false = 1 - h_true
        new.append(di * beta ** (0.5 * (1 + h_true - h_false)))
    s = sum(new)
    return [v / s for v in new]


def boosted_score(member_probs, betas):
    """``member_probs[t]`` is the member's positive confidence for one sample."""
    num = sum(math.log(1 / b) * p for p, b in zip(member_probs, betas))
    den = sum(math.log(1 / b) for b in betas)
    return num / den


# ---------------------------------------------------------------------------
# d-separation by explicit path enumeration


def _undirected_paths(edges, x, y):
    adj = {}
    for a, b in edges:
        adj.setdefault(a, set()).add(b)
        adj.setdefault(b, set()).add(a)

    def walk(path):
        v = path[-1]
        if v == y:
            yield list(path)
            return
        for w in sorted(adj.get(v, ())):
            if w not in path:
                path.append(w)
                yield from walk(path)
                path.pop()

    yield from walk([x])


def _descendants(edges, v):
    out, todo = set(), [v]
    while todo:
        u = todo.pop()
        for a, b in edges:
            if a == u and b not in out:
                out.add(b)
                todo.append(b)
    return out


def d_separated(edges, x, y, z):
    """True when every simple path between x and y is blocked by z."""
    z = set(z)
    if x in z or y in z:
        return True
    es = set(edges)
    for path in _undirected_paths(es, x, y):
        blocked = False
        for a, v, b in zip(path, path[1:], path[2:]):
            collider = (a, v) in es and (b, v) in es
            if collider:
                if v not in z and not (_descendants(es, v) & z):
                    blocked = True
                    break
            elif v in z:
                blocked = True
                break
        if not blocked:
            return False
    return True


def backdoor(edges, x, y, z):
    z = set(z)
    if z & _descendants(edges, x):
        return False
    cut = [(a, b) for a, b in edges if a != x]
    return d_separated(cut, x, y, z)


def all_subsets(items):
    items = sorted(items)
    for r in range(len(items) + 1):
        yield from itertools.combinations(items, r)


# ---------------------------------------------------------------------------
# k nearest neighbours by full distance matrix


def knn(points, k):
    """Indices of the k nearest other points of each point, ties broken by index."""
    out = []
    for i, p in enumerate(points):
        dist = []
        for j, q in enumerate(points):
            if i != j:
                dist.append((sum((a - b) ** 2 for a, b in zip(p, q)), j))
        dist.sort()
        out.append([j for _, j in dist[:k]])
    return out


def normal_logpdf_diag(x, mu, var):
    return sum(-0.5 * math.log(2 * math.pi * v) - (xi - m) ** 2 / (2 * v) for xi, m, v in zip(x, mu, var))


# ---------------------------------------------------------------------------
# exact-greedy Newton tree, grown recursively over explicit row lists


def newton_tree(X, g, h, rows, depth, max_depth, lam, min_child):
    """Nested dict tree. Scans features then thresholds in ascending order, keeping strict improvements."""
    G = sum(g[r] for r in rows)
    H = sum(h[r] for r in rows)
    leaf = {"value": -G / (H + lam), "cover": H}
    if depth == max_depth:
        return leaf
    best = None
    for f in range(len(X[0])):
        vals = sorted({X[r][f] for r in rows})
        for a, b in zip(vals, vals[1:]):
            t = (a + b) / 2
            left = [r for r in rows if X[r][f] < t]
            right = [r for r in rows if not X[r][f] < t]
            gl, hl = sum(g[r] for r in left), sum(h[r] for r in left)
            gr, hr = sum(g[r] for r in right), sum(h[r] for r in right)
            if hl < min_child or hr < min_child:
                continue
            gain = 0.5 * (gl * gl / (hl + lam) + gr * gr / (hr + lam) - G * G / (H + lam))
            if gain > 0 and (best is None or gain > best[0]):
                best = (gain, f, t, left, right)
    if best is None:
        return leaf
    _, f, t, left, right = best
    return {
        "feature": f,
        "threshold": t,
        "left": newton_tree(X, g, h, left, depth + 1, max_depth, lam, min_child),
        "right": newton_tree(X, g, h, right, depth + 1, max_depth, lam, min_child),
    }


def tree_value(node, x):
    while "feature" in node:
        node = node["left"] if x[node["feature"]] < node["threshold"] else node["right"]
    return node["value"]


def newton_boost(X, y, w, rounds, max_depth, lr, lam, min_child):
    """Margins of every row after ``rounds`` of logistic Newton boosting."""
    pos = sum(wi for yi, wi in zip(y, w) if yi == 1)
    neg = sum(wi for yi, wi in zip(y, w) if yi == 0)
    margin = [math.log(pos / neg)] * len(y)
    rows = [i for i in range(len(y)) if w[i] > 0]
    trees = []
    for _ in range(rounds):
        p = [1 / (1 + math.exp(-m)) for m in margin]
        g = [wi * (pi - yi) for wi, pi, yi in zip(w, p, y)]
        h = [wi * pi * (1 - pi) for wi, pi in zip(w, p)]
        tree = newton_tree(X, g, h, rows, 0, max_depth, lam, min_child)
        trees.append(tree)
        margin = [m + lr * tree_value(tree, x) for m, x in zip(margin, X)]
    return margin, trees


def gini_tree(X, y, w, max_depth):
    """Weighted Gini tree: Newton statistics g = -w*y, h = w with no regularization give leaf P/W."""
    g = [-wi * yi for wi, yi in zip(w, y)]
    rows = [i for i in range(len(y)) if w[i] > 0]
    return newton_tree(X, g, list(w), rows, 0, max_depth, 0.0, 0.0)


def boost_m2(X, y, rounds, training_set, max_depth):
    """Binary AdaBoost.M2 without failure handling; ``training_set(d, t)`` returns (X, y, w) for round t."""
    n = len(y)
    d = [1.0 / n] * n
    trees, betas, history = [], [], []
    for t in range(rounds):
        Xw, yw, ww = training_set(d, t)
        tree = gini_tree(Xw, yw, ww, max_depth)
        p = [tree_value(tree, x) for x in X]
        eps = pseudo_loss(d, p, y)
        assert eps < 0.5
        beta = max(eps / (1 - eps), 1e-10)
        d = update(d, p, y, beta)
        trees.append(tree)
        betas.append(beta)
        history.append(list(d))
    return trees, betas, history
