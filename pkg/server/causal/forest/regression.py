import logging
from dataclasses import dataclass

import numpy as np

from causal.exceptions import ParameterError
from causal.forest.base import check_covariates, grow_trees, leaf_tables, out_of_bag_mask
from causal.forest.params import ForestParams
from causal.forest.tree import RegressionSplitter

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class RegressionForest:
    trees: tuple
    roles: np.ndarray
    params: ForestParams
    X: np.ndarray

    @property
    def n_features(self):
        return self.X.shape[1]

    def predict(self, X):
        X = check_covariates(X, self.n_features)
        return leaf_tables(self.trees, X, 0).mean(axis=0)

    def predict_oob(self, rows=None):
        """Prediction for training rows from the trees whose subsample excludes them."""
        rows = np.arange(self.X.shape[0]) if rows is None else np.asarray(rows)
        mask = out_of_bag_mask(self.roles, rows)
        table = leaf_tables(self.trees, self.X[rows], 0)
        return (table * mask).sum(axis=0) / mask.sum(axis=0)


def fit_regression_forest(X, target, params=None, n_jobs=1):
    """Honest regression forest of `target` on X."""
    params = params or ForestParams()
    X = check_covariates(X)
    target = np.asarray(target, dtype=np.float64)
    if target.shape != (X.shape[0],):
        raise ParameterError("Target must have one value per row of X.", field="target")
    if X.shape[0] < 2 * params.min_node_size:
        raise ParameterError(
            f"{X.shape[0]} subjects are too few for min_node_size {params.min_node_size}.",
            field="min_node_size",
        )
    splitter = RegressionSplitter(target, params.min_node_size)
    trees, roles = grow_trees(X, splitter, params, params.num_trees, params.seed, n_jobs=n_jobs)
    logger.debug("Regression forest: %d trees on %d x %d", len(trees), *X.shape)
    return RegressionForest(trees=trees, roles=roles, params=params, X=X)
