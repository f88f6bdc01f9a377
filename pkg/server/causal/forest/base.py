import logging

import numpy as np
from joblib import Parallel, delayed

from causal.exceptions import InBagEverywhereError, ParameterError
from causal.forest.tree import ESTIMATE, GROW, OUT_OF_BAG, grow_tree, split_sample

logger = logging.getLogger(__name__)


def check_covariates(X, n_features=None):
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1 and n_features is not None:
        X = X.reshape(1, -1)
    if X.ndim != 2:
        raise ParameterError("Covariates must be an n x d matrix.", field="X")
    if n_features is not None and X.shape[1] != n_features:
        raise ParameterError(f"Expected {n_features} covariates, got {X.shape[1]}.", field="X")
    if not np.isfinite(X).all():
        raise ParameterError("Covariates contain non-finite values.", field="X")
    return X


def _one_tree(X, splitter, params, seed):
    rng = np.random.default_rng(seed)
    grow, est = split_sample(np.arange(X.shape[0]), params.subsample_ratio, params.honesty_ratio, rng)
    tree = grow_tree(X, grow, est, splitter, params.resolved_mtry(X.shape[1]), params.max_depth, rng)
    roles = np.full(X.shape[0], OUT_OF_BAG, dtype=np.int8)
    roles[grow] = GROW
    roles[est] = ESTIMATE
    return tree, roles


def grow_trees(X, splitter, params, n_trees, seed, n_jobs=1):
    """Grow `n_trees` honest trees; per-tree seeds are spawned so results do not depend on n_jobs."""
    seeds = np.random.SeedSequence(seed).spawn(n_trees)
    grown = Parallel(n_jobs=n_jobs, prefer="threads")(
        delayed(_one_tree)(X, splitter, params, s) for s in seeds
    )
    trees = tuple(tree for tree, _ in grown)
    roles = np.vstack([r for _, r in grown])
    return trees, roles


def leaf_tables(trees, X, column):
    """(trees, rows) matrix of one leaf-table column for every row of X."""
    return np.vstack([tree.values[tree.apply(X), column] for tree in trees])


def out_of_bag_mask(roles, rows=None):
    """Trees whose subsample excludes each requested training row."""
    rows = np.arange(roles.shape[1]) if rows is None else np.asarray(rows)
    mask = roles[:, rows] == OUT_OF_BAG
    uncovered = rows[~mask.any(axis=0)]
    if uncovered.size:
        raise InBagEverywhereError(
            f"Training subject(s) {uncovered.tolist()} are in-bag in every tree; "
            "no out-of-bag prediction exists.",
            field="index",
        )
    return mask
