import logging
from dataclasses import dataclass

import numpy as np
from joblib import Parallel, delayed

from causal.exceptions import ModelFormatError, NonFiniteScoreError, ParameterError

logger = logging.getLogger(__name__)

# Upper bound on cells of one accumulation block (second-split features x root bins x child bins x arms).
BLOCK_CELLS = 4_000_000
# Objective gains below this share of the total absolute reward count as ties.
RELATIVE_TOL = 1e-9


@dataclass(frozen=True)
class PolicyNode:
    action: int | None = None
    feature: int | None = None
    threshold: float | None = None
    left: "PolicyNode | None" = None
    right: "PolicyNode | None" = None

    @property
    def is_leaf(self):
        return self.feature is None

    @property
    def depth(self):
        return 0 if self.is_leaf else 1 + max(self.left.depth, self.right.depth)

    def predict(self, X):
        if self.is_leaf:
            return np.full(X.shape[0], self.action, dtype=np.int64)
        goes_left = X[:, self.feature] <= self.threshold
        out = np.empty(X.shape[0], dtype=np.int64)
        out[goes_left] = self.left.predict(X[goes_left])
        out[~goes_left] = self.right.predict(X[~goes_left])
        return out

    def to_dict(self, names):
        if self.is_leaf:
            return {"action": int(self.action)}
        return {
            "split_feature": names[self.feature],
            "split_index": int(self.feature),
            "threshold": float(self.threshold),
            "left": self.left.to_dict(names),
            "right": self.right.to_dict(names),
        }

    @classmethod
    def from_dict(cls, payload, names):
        if "action" in payload:
            return cls(action=int(payload["action"]))
        try:
            feature = int(payload.get("split_index", names.index(payload["split_feature"])))
            return cls(
                feature=feature,
                threshold=float(payload["threshold"]),
                left=cls.from_dict(payload["left"], names),
                right=cls.from_dict(payload["right"], names),
            )
        except (KeyError, ValueError) as exc:
            raise ModelFormatError(f"Malformed policy node: {exc}", field="policy") from exc


@dataclass(frozen=True, eq=False)
class PolicyTreeModel:
    root: PolicyNode
    feature_names: tuple
    objective: float
    split_step: int = 1

    kind = "policy_tree"

    @property
    def depth(self):
        return self.root.depth

    def predict(self, X):
        return self.root.predict(np.asarray(X, dtype=np.float64))

    def to_dict(self):
        return {
            "kind": self.kind,
            "feature_names": list(self.feature_names),
            "objective": self.objective,
            "split_step": self.split_step,
            "tree": self.root.to_dict(self.feature_names),
        }

    @classmethod
    def from_dict(cls, payload):
        names = list(payload["feature_names"])
        return cls(
            root=PolicyNode.from_dict(payload["tree"], names),
            feature_names=tuple(names),
            objective=float(payload.get("objective", float("nan"))),
            split_step=int(payload.get("split_step", 1)),
        )


def candidate_thresholds(values, split_step=1):
    """Midpoints of adjacent distinct values, thinned to every `split_step`-th one."""
    unique = np.unique(values)
    return ((unique[:-1] + unique[1:]) / 2)[::split_step]


def _leaf_value(sums):
    return sums.max(axis=-1)


def _tolerance(rewards):
    return RELATIVE_TOL * max(1.0, float(np.abs(rewards).sum()))


def _second_splits(rewards, bins, j, ks, n_cuts):
    """Best child split of each root cut of feature j over features ks.

    Returns (left value, left feature slot, left cut, right value, right feature slot, right cut), one entry per root cut.
    """
    n = rewards.shape[0]
    m = len(ks)
    root_cuts = n_cuts[j]
    width = int(n_cuts[ks].max()) + 1
    cells = np.zeros((m, root_cuts + 1, width, 2))
    slot = np.repeat(np.arange(m), n)
    root_bin = np.tile(bins[:, j], m)
    child_bin = bins[:, ks].T.ravel()
    for arm in (0, 1):
        np.add.at(cells[..., arm], (slot, root_bin, child_bin), np.tile(rewards[:, arm], m))

    cum = cells.cumsum(axis=1).cumsum(axis=2)
    upto = cum[:, :root_cuts]
    left_total = upto[:, :, -1:, :]
    by_child = cum[:, -1:, :, :]
    total = cum[:, -1:, -1:, :]

    left_value = _leaf_value(upto) + _leaf_value(left_total - upto)
    right_left = by_child - upto
    right_value = _leaf_value(right_left) + _leaf_value((total - left_total) - right_left)

    valid = (np.arange(width)[None, :] < n_cuts[ks][:, None])[:, None, :]
    results = []
    for value in (left_value, right_value):
        value = np.where(valid, value, -np.inf)
        cut = value.argmax(axis=2)
        best = np.take_along_axis(value, cut[..., None], axis=2)[..., 0]
        feature_slot = best.argmax(axis=0)
        columns = np.arange(root_cuts)
        results.extend([best[feature_slot, columns], ks[feature_slot], cut[feature_slot, columns]])
    return results


def _root_candidates(rewards, bins, j, n_cuts, depth, tol=0.0):
    """Best depth-1 and depth-2 trees whose root splits on feature j."""
    root_cuts = n_cuts[j]
    order = bins[:, j]
    per_bin = np.zeros((root_cuts + 1, 2))
    np.add.at(per_bin, order, rewards)
    left_total = per_bin.cumsum(axis=0)[:root_cuts]
    right_total = rewards.sum(axis=0) - left_total
    leaf_left = _leaf_value(left_total)
    leaf_right = _leaf_value(right_total)
    one = leaf_left + leaf_right
    q1 = int(one.argmax())
    result = {"feature": j, "depth1": (float(one[q1]), q1), "depth2": None}
    if depth < 2:
        return result

    splittable = np.flatnonzero(n_cuts > 0)
    per_feature = (root_cuts + 1) * (int(n_cuts.max()) + 1) * 2
    chunk = max(1, BLOCK_CELLS // per_feature)
    best_left = np.full(root_cuts, -np.inf)
    best_right = np.full(root_cuts, -np.inf)
    left_choice = np.zeros((root_cuts, 2), dtype=np.int64)
    right_choice = np.zeros((root_cuts, 2), dtype=np.int64)
    for start in range(0, len(splittable), chunk):
        ks = splittable[start:start + chunk]
        lv, lk, lr, rv, rk, rr = _second_splits(rewards, bins, j, ks, n_cuts)
        better = lv > best_left
        best_left[better] = lv[better]
        left_choice[better] = np.column_stack([lk, lr])[better]
        better = rv > best_right
        best_right[better] = rv[better]
        right_choice[better] = np.column_stack([rk, rr])[better]
    # A child split only wins when it beats leaving the child a leaf by more than the tolerance.
    split_left = best_left > leaf_left + tol
    split_right = best_right > leaf_right + tol
    two = np.where(split_left, best_left, leaf_left) + np.where(split_right, best_right, leaf_right)
    q2 = int(two.argmax())
    result["depth2"] = (
        float(two[q2]),
        q2,
        tuple(left_choice[q2]) if split_left[q2] else None,
        tuple(right_choice[q2]) if split_right[q2] else None,
    )
    return result


def _leaf(rewards, rows):
    sums = rewards[rows].sum(axis=0)
    return PolicyNode(action=int(sums.argmax()))


def _split(rewards, X, rows, feature, threshold, left=None, right=None, cuts=None):
    goes_left = rows[X[rows, feature] <= threshold]
    goes_right = rows[X[rows, feature] > threshold]

    def child(sub, choice):
        if choice is None:
            return _leaf(rewards, sub)
        k, r = choice
        return _split(rewards, X, sub, int(k), float(cuts[k][r]))

    return PolicyNode(feature=feature, threshold=threshold,
                      left=child(goes_left, left), right=child(goes_right, right))


def search_policy_tree(X, gamma_0, gamma_1, depth=2, split_step=1, feature_names=None, n_jobs=1):
    """Tree of depth at most `depth` (1 or 2) maximising Σᵢ Γ̂ᵢ(π(Xᵢ)) over axis-aligned splits.

    The search is exhaustive over the candidate thresholds. Among trees whose objectives agree within a
    relative tolerance the shallower one wins, then the lowest feature index, then the lowest threshold.
    """
    X = np.asarray(X, dtype=np.float64)
    rewards = np.column_stack([np.asarray(gamma_0, dtype=np.float64), np.asarray(gamma_1, dtype=np.float64)])
    if X.ndim != 2 or X.shape[0] != rewards.shape[0]:
        raise ParameterError("X must be an n x d matrix matching the scores.", field="X")
    n, d = X.shape
    if n < 4 or d < 1:
        raise ParameterError("Policy search needs at least 4 subjects and 1 feature.", field="X")
    if depth not in (1, 2):
        raise ParameterError("Policy trees have depth 1 or 2.", field="depth")
    if split_step < 1:
        raise ParameterError("split_step must be positive.", field="split_step")
    if not (np.isfinite(rewards).all() and np.isfinite(X).all()):
        raise NonFiniteScoreError("Scores or covariates contain non-finite values.", field="gamma")
    names = tuple(feature_names) if feature_names is not None else tuple(f"x{j}" for j in range(d))

    cuts = [candidate_thresholds(X[:, j], split_step) for j in range(d)]
    n_cuts = np.array([len(c) for c in cuts], dtype=np.int64)
    bins = np.column_stack([np.searchsorted(cuts[j], X[:, j], side="left") for j in range(d)])

    tol = _tolerance(rewards)
    roots = [j for j in range(d) if n_cuts[j] > 0]
    candidates = Parallel(n_jobs=n_jobs, prefer="threads")(
        delayed(_root_candidates)(rewards, bins, j, n_cuts, depth, tol) for j in roots
    )

    all_rows = np.arange(n)
    totals = rewards.sum(axis=0)
    best_value, best_tree = float(totals.max()), _leaf(rewards, all_rows)

    one = max(candidates, key=lambda c: c["depth1"][0], default=None)
    if one is not None and one["depth1"][0] > best_value + tol:
        j, q = one["feature"], one["depth1"][1]
        best_value, best_tree = one["depth1"][0], _split(rewards, X, all_rows, j, float(cuts[j][q]))

    if depth == 2:
        two = max(candidates, key=lambda c: c["depth2"][0], default=None)
        if two is not None and two["depth2"][0] > best_value + tol:
            j = two["feature"]
            value, q, left, right = two["depth2"]
            best_value = value
            best_tree = _split(rewards, X, all_rows, j, float(cuts[j][q]), left=left, right=right, cuts=cuts)

    actions = best_tree.predict(X)
    objective = float(rewards[all_rows, actions].sum())
    logger.info("Policy tree of depth %d, objective %.6g over %d subjects", best_tree.depth, objective, n)
    return PolicyTreeModel(root=best_tree, feature_names=names, objective=objective, split_step=split_step)
