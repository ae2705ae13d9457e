"""Random forest: Gini-split decision trees over bootstrap samples.

Each tree votes its leaf majority (ties vote negative); the forest score
is the positive-vote fraction. Per-tree randomness (bootstrap rows,
feature subsets) is keyed on (seed, tree index), so the forest is
independent of construction order.
"""

from dataclasses import dataclass

import numpy as np

from ..rng import keyed_rng

_MAX_DEPTH = 64  # hard cap standing in for "unlimited"


@dataclass(frozen=True)
class _Node:
    feature: int = -1  # -1 marks a leaf
    threshold: float = 0.0
    left: "_Node" = None
    right: "_Node" = None
    vote: int = 0


def _gini(pos, n):
    if n == 0:
        return 0.0
    p = pos / n
    return 2.0 * p * (1.0 - p)


def _best_split(X, y, rows, features):
    """Lowest weighted-Gini split over the given rows and features.

    Candidate thresholds are midpoints between consecutive distinct
    values. Ties resolve to the first candidate in (feature order,
    ascending threshold) order.
    """
    n = rows.size
    total_pos = int(y[rows].sum())
    best = None  # (cost, feature, threshold)
    for f in features:
        values = X[rows, f]
        order = np.argsort(values, kind="mergesort")
        sv = values[order]
        sy = y[rows][order]
        distinct = np.nonzero(np.diff(sv))[0]  # split after these positions
        if distinct.size == 0:
            continue
        pos_prefix = np.cumsum(sy)
        n_left = distinct + 1
        pos_left = pos_prefix[distinct]
        n_right = n - n_left
        pos_right = total_pos - pos_left
        p_l = pos_left / n_left
        p_r = pos_right / n_right
        cost = (n_left * 2.0 * p_l * (1.0 - p_l) + n_right * 2.0 * p_r * (1.0 - p_r)) / n
        j = int(np.argmin(cost))
        thr = 0.5 * (sv[distinct[j]] + sv[distinct[j] + 1])
        if best is None or cost[j] < best[0] - 1e-15:
            best = (float(cost[j]), int(f), float(thr))
    return best


def _grow(X, y, rows, depth, max_depth, min_leaf, max_features, rng):
    n = rows.size
    pos = int(y[rows].sum())
    if depth >= max_depth or pos == 0 or pos == n or n < 2 * min_leaf:
        return _Node(vote=int(pos * 2 > n))
    d = X.shape[1]
    if max_features < d:
        features = np.sort(rng.choice(d, size=max_features, replace=False))
    else:
        features = np.arange(d)
    best = _best_split(X, y, rows, features)
    if best is None:
        return _Node(vote=int(pos * 2 > n))
    _, f, thr = best
    go_left = X[rows, f] <= thr
    left_rows = rows[go_left]
    right_rows = rows[~go_left]
    if left_rows.size < min_leaf or right_rows.size < min_leaf:
        return _Node(vote=int(pos * 2 > n))
    return _Node(
        feature=f,
        threshold=thr,
        left=_grow(X, y, left_rows, depth + 1, max_depth, min_leaf, max_features, rng),
        right=_grow(X, y, right_rows, depth + 1, max_depth, min_leaf, max_features, rng),
    )


def _tree_votes(node, X):
    if node.feature < 0:
        return np.full(X.shape[0], node.vote, dtype=float)
    out = np.empty(X.shape[0])
    go_left = X[:, node.feature] <= node.threshold
    out[go_left] = _tree_votes(node.left, X[go_left])
    out[~go_left] = _tree_votes(node.right, X[~go_left])
    return out


@dataclass(frozen=True)
class RandomForestModel:
    trees: tuple
    max_depth: int
    n_features: int

    def score(self, X):
        X = np.atleast_2d(np.asarray(X, dtype=float))
        votes = np.zeros(X.shape[0])
        for tree in self.trees:
            votes += _tree_votes(tree, X)
        return votes / len(self.trees)

    def tree_votes(self, X):
        """(n_rows, n_trees) matrix of individual tree votes."""
        X = np.atleast_2d(np.asarray(X, dtype=float))
        return np.column_stack([_tree_votes(t, X) for t in self.trees])

    def describe(self):
        return {
            "n_trees": len(self.trees),
            "max_depth": None if self.max_depth >= _MAX_DEPTH else self.max_depth,
        }


def fit_random_forest(X, y, n_trees=100, max_depth=None, min_leaf=1, max_features="sqrt", seed=0):
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    n, d = X.shape
    depth_cap = _MAX_DEPTH if max_depth is None else int(max_depth)
    if max_features == "sqrt":
        m = max(1, int(np.sqrt(d)))
    elif max_features is None:
        m = d
    else:
        m = max(1, min(d, int(max_features)))
    trees = []
    for t in range(n_trees):
        rng = keyed_rng("sepsisaudit.learn.forest", seed, t)
        boot = rng.integers(0, n, n)
        trees.append(_grow(X, y, boot, 0, depth_cap, min_leaf, m, rng))
    return RandomForestModel(trees=tuple(trees), max_depth=depth_cap, n_features=d)
