import logging
import math
from dataclasses import dataclass

import numpy as np

logger = logging.getLogger(__name__)

LEAF = -1

# Sample roles inside one tree.
OUT_OF_BAG = 0
GROW = 1
ESTIMATE = 2


@dataclass(frozen=True, eq=False)
class HonestTree:
    """Flat binary tree. Leaf tables come from the estimation half only."""

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    depth: np.ndarray
    values: np.ndarray
    counts: np.ndarray

    @property
    def n_nodes(self):
        return len(self.feature)

    @property
    def is_leaf(self):
        return self.feature == LEAF

    def apply(self, X):
        """Leaf index reached by every row of X (x <= threshold goes left)."""
        node = np.zeros(X.shape[0], dtype=np.int64)
        active = ~self.is_leaf[node]
        while active.any():
            rows = np.flatnonzero(active)
            current = node[rows]
            goes_left = X[rows, self.feature[current]] <= self.threshold[current]
            node[rows] = np.where(goes_left, self.left[current], self.right[current])
            active[rows] = ~self.is_leaf[node[rows]]
        return node

    def to_dict(self):
        return {
            "feature": self.feature.tolist(),
            "threshold": self.threshold.tolist(),
            "left": self.left.tolist(),
            "right": self.right.tolist(),
            "depth": self.depth.tolist(),
        }

    @classmethod
    def from_arrays(cls, structure, values, counts):
        return cls(
            feature=np.asarray(structure["feature"], dtype=np.int64),
            threshold=np.asarray(structure["threshold"], dtype=np.float64),
            left=np.asarray(structure["left"], dtype=np.int64),
            right=np.asarray(structure["right"], dtype=np.int64),
            depth=np.asarray(structure["depth"], dtype=np.int64),
            values=np.asarray(values, dtype=np.float64),
            counts=np.asarray(counts, dtype=np.int64),
        )


class RegressionSplitter:
    """Variance-reduction splits of a single target."""

    n_values = 1

    def __init__(self, target, min_node_size):
        self.target = np.asarray(target, dtype=np.float64)
        self.min_node_size = min_node_size

    def leaf_values(self, rows):
        return np.array([self.target[rows].mean()])

    def _estimate_ok(self, x_est, thresholds):
        m = self.min_node_size
        n_left = np.searchsorted(np.sort(x_est), thresholds, side="right")
        return (n_left >= m) & (len(x_est) - n_left >= m)

    def criterion(self, x_grow, grow_rows, x_est, est_rows):
        """(thresholds, criterion values) for every admissible cut of one feature."""
        order = np.argsort(x_grow, kind="stable")
        xs = x_grow[order]
        ys = self.target[grow_rows][order]
        n = len(xs)
        thresholds, n_left, valid = _candidate_cuts(xs, self.min_node_size)
        valid &= self._estimate_ok(x_est, thresholds)
        left_sum = np.cumsum(ys)[:-1]
        right_sum = ys.sum() - left_sum
        n_right = n - n_left
        with np.errstate(divide="ignore", invalid="ignore"):
            gap = left_sum / n_left - right_sum / n_right
            crit = n_left * n_right / n * gap ** 2
        return thresholds[valid], crit[valid]


class CausalSplitter:
    """Splits maximising the heterogeneity of residual-on-residual effects.

    Each child must hold `min_node_size` subjects of each arm in both halves.
    """

    n_values = 2

    def __init__(self, y_res, w_res, w, min_node_size):
        self.y_res = np.asarray(y_res, dtype=np.float64)
        self.w_res = np.asarray(w_res, dtype=np.float64)
        self.w = np.asarray(w, dtype=np.int64)
        self.cross = self.y_res * self.w_res
        self.square = self.w_res ** 2
        self.min_node_size = min_node_size

    def leaf_values(self, rows):
        return np.array([self.cross[rows].mean(), self.square[rows].mean()])

    def _estimate_ok(self, x_est, est_rows, thresholds):
        m = self.min_node_size
        ok = np.ones(len(thresholds), dtype=bool)
        for arm in (0, 1):
            x_arm = np.sort(x_est[self.w[est_rows] == arm])
            n_left = np.searchsorted(x_arm, thresholds, side="right")
            ok &= (n_left >= m) & (len(x_arm) - n_left >= m)
        return ok

    def criterion(self, x_grow, grow_rows, x_est, est_rows):
        order = np.argsort(x_grow, kind="stable")
        xs = x_grow[order]
        rows = grow_rows[order]
        n = len(xs)
        m = self.min_node_size
        thresholds, n_left, valid = _candidate_cuts(xs, 1)

        treated_left = np.cumsum(self.w[rows])[:-1]
        control_left = n_left - treated_left
        treated_right = self.w[rows].sum() - treated_left
        control_right = (n - n_left) - treated_right
        valid &= (treated_left >= m) & (control_left >= m) & (treated_right >= m) & (control_right >= m)
        valid &= self._estimate_ok(x_est, est_rows, thresholds)

        num_left = np.cumsum(self.cross[rows])[:-1]
        den_left = np.cumsum(self.square[rows])[:-1]
        num_right = self.cross[rows].sum() - num_left
        den_right = self.square[rows].sum() - den_left
        n_right = n - n_left
        with np.errstate(divide="ignore", invalid="ignore"):
            gap = num_left / den_left - num_right / den_right
            crit = n_left * n_right / n * gap ** 2
        valid &= np.isfinite(crit)
        return thresholds[valid], crit[valid]


def _candidate_cuts(xs, min_size):
    """Midpoints between distinct sorted values, with left sizes and a size filter."""
    n = len(xs)
    thresholds = (xs[:-1] + xs[1:]) / 2
    n_left = np.arange(1, n)
    valid = (xs[:-1] < xs[1:]) & (thresholds >= xs[:-1]) & (thresholds < xs[1:])
    valid &= (n_left >= min_size) & (n - n_left >= min_size)
    return thresholds, n_left, valid


def best_split(X, grow_rows, est_rows, features, splitter):
    """Best (feature, threshold) over the candidate features, or None.

    Ties go to the lowest feature index, then the lowest threshold.
    """
    best = None
    for j in np.sort(features):
        thresholds, crit = splitter.criterion(X[grow_rows, j], grow_rows, X[est_rows, j], est_rows)
        if crit.size == 0:
            continue
        k = int(np.argmax(crit))
        if crit[k] <= 0:
            continue
        if best is None or crit[k] > best[2]:
            best = (int(j), float(thresholds[k]), float(crit[k]))
    return best


def split_sample(rows, subsample_ratio, honesty_ratio, rng):
    """Draw a subsample without replacement and halve it into grow and estimate parts."""
    n = len(rows)
    size = min(n, max(2, math.ceil(subsample_ratio * n)))
    drawn = rng.choice(rows, size=size, replace=False)
    n_grow = min(size - 1, max(1, int(round(honesty_ratio * size))))
    return np.sort(drawn[:n_grow]), np.sort(drawn[n_grow:])


def grow_tree(X, grow_rows, est_rows, splitter, mtry, max_depth, rng):
    """Grow one honest tree: splits chosen on grow_rows, leaf tables filled from est_rows."""
    d = X.shape[1]
    feature, threshold, left, right, depth, values, counts = [], [], [], [], [], [], []

    def new_node(level, est):
        feature.append(LEAF)
        threshold.append(np.nan)
        left.append(LEAF)
        right.append(LEAF)
        depth.append(level)
        values.append(splitter.leaf_values(est))
        counts.append(len(est))
        return len(feature) - 1

    stack = [(new_node(0, est_rows), grow_rows, est_rows)]
    while stack:
        node, grow, est = stack.pop()
        if max_depth is not None and depth[node] >= max_depth:
            continue
        candidates = rng.choice(d, size=mtry, replace=False)
        split = best_split(X, grow, est, candidates, splitter)
        if split is None:
            continue
        j, thr, _ = split
        grow_left = X[grow, j] <= thr
        est_left = X[est, j] <= thr
        feature[node] = j
        threshold[node] = thr
        left[node] = new_node(depth[node] + 1, est[est_left])
        right[node] = new_node(depth[node] + 1, est[~est_left])
        stack.append((right[node], grow[~grow_left], est[~est_left]))
        stack.append((left[node], grow[grow_left], est[est_left]))

    return HonestTree(
        feature=np.asarray(feature, dtype=np.int64),
        threshold=np.asarray(threshold, dtype=np.float64),
        left=np.asarray(left, dtype=np.int64),
        right=np.asarray(right, dtype=np.int64),
        depth=np.asarray(depth, dtype=np.int64),
        values=np.vstack(values),
        counts=np.asarray(counts, dtype=np.int64),
    )
