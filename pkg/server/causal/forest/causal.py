import logging
from dataclasses import dataclass
from functools import cached_property

import numpy as np
from sklearn.model_selection import KFold

from causal.exceptions import ArmMissingError, ParameterError
from causal.forest.base import check_covariates, grow_trees, leaf_tables, out_of_bag_mask
from causal.forest.params import ForestParams
from causal.forest.regression import fit_regression_forest
from causal.forest.tree import ESTIMATE, CausalSplitter
from utils.utils import derive_seed

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class Nuisances:
    """Out-of-fold outcome and propensity estimates with their fold bookkeeping."""

    m_hat: np.ndarray
    e_hat: np.ndarray
    folds: np.ndarray
    n_clipped: int = 0
    propensity: float | None = None


@dataclass(frozen=True, eq=False)
class CausalForestModel:
    trees: tuple
    roles: np.ndarray
    params: ForestParams
    X: np.ndarray
    W: np.ndarray
    Y: np.ndarray
    nuisances: Nuisances
    column_names: tuple = ()

    @property
    def n(self):
        return self.X.shape[0]

    @property
    def n_features(self):
        return self.X.shape[1]

    @property
    def m_hat(self):
        return self.nuisances.m_hat

    @property
    def e_hat(self):
        return self.nuisances.e_hat

    @property
    def y_residual(self):
        return self.Y - self.m_hat

    @property
    def w_residual(self):
        return self.W - self.e_hat

    def _ratio(self, X, mask=None):
        num = leaf_tables(self.trees, X, 0)
        den = leaf_tables(self.trees, X, 1)
        if mask is not None:
            num, den = num * mask, den * mask
        return num.sum(axis=0) / den.sum(axis=0)

    def predict(self, X):
        """τ̂(x) for fresh covariate rows."""
        return self._ratio(check_covariates(X, self.n_features))

    def predict_oob(self, rows=None):
        """τ̂⁻ⁱ(Xᵢ) for training rows, using only trees whose subsample excludes i."""
        rows = np.arange(self.n) if rows is None else np.atleast_1d(np.asarray(rows))
        mask = out_of_bag_mask(self.roles, rows)
        return self._ratio(self.X[rows], mask)

    @cached_property
    def _training_leaves(self):
        return np.vstack([tree.apply(self.X) for tree in self.trees])

    def weights(self, x):
        """Adaptive weights αᵢ(x) over training subjects; non-negative and summing to one."""
        x = check_covariates(x, self.n_features)
        if x.shape[0] != 1:
            raise ParameterError("weights() takes a single query point.", field="x")
        alpha = np.zeros(self.n)
        for b, tree in enumerate(self.trees):
            leaf = tree.apply(x)[0]
            members = np.flatnonzero((self.roles[b] == ESTIMATE) & (self._training_leaves[b] == leaf))
            alpha[members] += 1.0 / len(members)
        return alpha / len(self.trees)


def _check_arms(W):
    W = np.asarray(W)
    if not np.isin(W, (0, 1)).all():
        raise ParameterError("Treatment must be coded 0/1.", field="W")
    for arm in (0, 1):
        if not (W == arm).any():
            raise ArmMissingError(f"No subjects in arm W={arm}.", field="W")
    return W.astype(np.int64)


def fit_nuisances(X, W, Y, params=None, propensity=None, n_jobs=1):
    """Cross-fitted m̂⁻ⁱ and ê⁻ⁱ; a known propensity replaces the propensity forest."""
    params = params or ForestParams()
    X = check_covariates(X)
    W = _check_arms(W)
    Y = np.asarray(Y, dtype=np.float64)
    n = X.shape[0]
    n_folds = min(params.cross_fit_folds, n)
    kfold = KFold(n_splits=n_folds, shuffle=True, random_state=derive_seed(params.seed, "cross_fit"))

    folds = np.empty(n, dtype=np.int64)
    m_hat = np.empty(n)
    e_hat = np.empty(n)
    for k, (train, held_out) in enumerate(kfold.split(X)):
        folds[held_out] = k
        outcome_params = params.replace(num_trees=params.nuisance_trees, seed=derive_seed(params.seed, "outcome", k))
        m_hat[held_out] = fit_regression_forest(X[train], Y[train], outcome_params, n_jobs=n_jobs).predict(X[held_out])
        if propensity is None:
            treat_params = outcome_params.replace(seed=derive_seed(params.seed, "propensity", k))
            e_hat[held_out] = fit_regression_forest(X[train], W[train], treat_params, n_jobs=n_jobs).predict(X[held_out])

    n_clipped = 0
    if propensity is not None:
        propensity = float(propensity)
        if not 0 < propensity < 1:
            raise ParameterError("Known propensity must lie in (0, 1).", field="propensity")
        e_hat[:] = propensity
    else:
        clip = params.propensity_clip
        outside = (e_hat < clip) | (e_hat > 1 - clip)
        n_clipped = int(outside.sum())
        if n_clipped:
            logger.warning("Clipped %d propensity estimates to [%.2f, %.2f]", n_clipped, clip, 1 - clip)
        e_hat = np.clip(e_hat, clip, 1 - clip)

    logger.info("Cross-fitted nuisances over %d folds for %d subjects", n_folds, n)
    return Nuisances(m_hat=m_hat, e_hat=e_hat, folds=folds, n_clipped=n_clipped, propensity=propensity)


def fit_causal_forest(X, W, Y, params=None, propensity=None, column_names=None, nuisances=None, n_jobs=1):
    """Honest causal forest on residualized data.

    Pass `nuisances` to reuse cross-fitted estimates (as tuning does); otherwise they are fitted here.
    """
    params = params or ForestParams()
    X = check_covariates(X)
    W = _check_arms(W)
    Y = np.asarray(Y, dtype=np.float64)
    if Y.shape != W.shape or Y.shape[0] != X.shape[0]:
        raise ParameterError("X, W and Y must describe the same subjects.", field="Y")
    if not np.isfinite(Y).all():
        raise ParameterError("Outcome contains non-finite values.", field="Y")

    if nuisances is None:
        nuisances = fit_nuisances(X, W, Y, params, propensity=propensity, n_jobs=n_jobs)
    splitter = CausalSplitter(Y - nuisances.m_hat, W - nuisances.e_hat, W, params.min_node_size)
    trees, roles = grow_trees(X, splitter, params, params.num_trees, params.seed, n_jobs=n_jobs)
    n_splits = sum(int((~tree.is_leaf).sum()) for tree in trees)
    logger.info("Causal forest: %d trees, %d splits, %d subjects", len(trees), n_splits, X.shape[0])
    names = tuple(column_names) if column_names is not None else tuple(f"x{j}" for j in range(X.shape[1]))
    return CausalForestModel(
        trees=trees, roles=roles, params=params, X=X, W=W, Y=Y, nuisances=nuisances, column_names=names,
    )


def predict_cate(model, x=None, index=None):
    """τ̂(x) for covariate rows, or the out-of-bag τ̂⁻ⁱ for training indices."""
    if (x is None) == (index is None):
        raise ParameterError("Pass exactly one of x or index.", field="x")
    if index is not None:
        return model.predict_oob(index)
    return model.predict(x)


def fit_causal_forest_from_matrix(fm, params=None, propensity=None, n_jobs=1):
    return fit_causal_forest(fm.X, fm.W, fm.Y, params, propensity=propensity,
                             column_names=fm.column_names, n_jobs=n_jobs)
