import dataclasses
import logging
from dataclasses import dataclass

import numpy as np
import pandas as pd
from django.conf import settings
from sklearn.model_selection import StratifiedKFold

from causal.effects.scores import scores_from_model
from causal.exceptions import ModelFormatError, ParameterError
from causal.forest.causal import fit_causal_forest
from causal.forest.params import ForestParams
from causal.policy.olearn import OPolicy, o_learning_fit
from causal.policy.qlearn import QPolicy, q_learning_fit
from causal.policy.tree import PolicyTreeModel, search_policy_tree
from causal.policy.value import ConstantPolicy, estimate_value
from utils.utils import derive_seed

logger = logging.getLogger(__name__)

METHODS = ("policy_tree", "q_learning", "o_learning")
VALUE_ESTIMATOR = "doubly_robust"

SETTINGS_KEYS = {
    "depth": "DEPTH",
    "split_step": "SPLIT_STEP",
    "q_folds": "Q_FOLDS",
    "q_n_lambdas": "Q_N_LAMBDAS",
    "q_lambda_ratio": "Q_LAMBDA_RATIO",
    "q_one_se_rule": "Q_ONE_SE_RULE",
    "o_residualizer": "O_RESIDUALIZER",
    "o_ridge_per_subject": "O_RIDGE_PER_SUBJECT",
    "cv_folds": "CV_FOLDS",
}


@dataclass(frozen=True)
class PolicyParams:
    depth: int = 2
    split_step: int = 1
    q_folds: int = 10
    q_n_lambdas: int = 50
    q_lambda_ratio: float = 1e-4
    q_one_se_rule: bool = False
    o_residualizer: str = "linear"
    o_ridge_per_subject: float = 1e-4
    cv_folds: int = 3

    def replace(self, **changes):
        return dataclasses.replace(self, **changes)

    @classmethod
    def from_settings(cls, overrides=None):
        values = {field: settings.POLICY[key] for field, key in SETTINGS_KEYS.items() if key in settings.POLICY}
        values.update({k: v for k, v in (overrides or {}).items() if k in SETTINGS_KEYS})
        return cls(**values)


POLICY_KINDS = {
    PolicyTreeModel.kind: PolicyTreeModel,
    QPolicy.kind: QPolicy,
    OPolicy.kind: OPolicy,
    ConstantPolicy.kind: ConstantPolicy,
}


def load_policy(payload):
    kind = payload.get("kind")
    if kind not in POLICY_KINDS:
        raise ModelFormatError(f"Unknown policy kind {kind!r}.", field="kind")
    return POLICY_KINDS[kind].from_dict(payload)


def fit_policy(method, X, W, Y, forest_params=None, policy_params=None, seed=0, propensity=None,
               feature_names=None, scores=None, n_jobs=1):
    """Fit one policy learner on (X, W, Y).

    The policy tree searches over doubly robust scores; pass `scores` to reuse them, otherwise a
    causal forest is fitted here.
    """
    policy_params = policy_params or PolicyParams()
    if method == "policy_tree":
        if scores is None:
            params = (forest_params or ForestParams()).replace(seed=derive_seed(seed, "policy_forest"))
            model = fit_causal_forest(X, W, Y, params, propensity=propensity, n_jobs=n_jobs)
            scores = scores_from_model(model)
        return search_policy_tree(X, scores.gamma_0, scores.gamma_1, depth=policy_params.depth,
                                  split_step=policy_params.split_step, feature_names=feature_names, n_jobs=n_jobs)
    if method == "q_learning":
        return q_learning_fit(X, W, Y, folds=policy_params.q_folds, seed=derive_seed(seed, "q_learning"),
                              n_lambdas=policy_params.q_n_lambdas, lambda_ratio=policy_params.q_lambda_ratio,
                              one_se_rule=policy_params.q_one_se_rule, feature_names=feature_names)
    if method == "o_learning":
        W = np.asarray(W)
        p = float(W.mean()) if propensity is None else propensity
        return o_learning_fit(X, 2 * W - 1, Y, p, residualizer=policy_params.o_residualizer,
                              ridge_per_subject=policy_params.o_ridge_per_subject, feature_names=feature_names)
    raise ParameterError(f"Unknown policy method {method!r}; choose from {METHODS}.", field="method")


@dataclass(frozen=True, eq=False)
class CrossValidationReport:
    table: pd.DataFrame
    fold_values: pd.DataFrame
    metadata: dict

    def to_dict(self):
        return {
            "metadata": self.metadata,
            "table": {name: row.to_dict() for name, row in self.table.iterrows()},
            "folds": self.fold_values.to_dict(orient="records"),
        }


def cross_validate_policies(X, W, Y, methods=METHODS, folds=3, seed=0, forest_params=None, policy_params=None,
                            propensity=None, n_jobs=1):
    """K-fold policy comparison; each held-out fold is scored by its own causal forest."""
    X = np.asarray(X, dtype=np.float64)
    W = np.asarray(W, dtype=np.int64)
    Y = np.asarray(Y, dtype=np.float64)
    forest_params = forest_params or ForestParams()
    splitter = StratifiedKFold(n_splits=folds, shuffle=True, random_state=derive_seed(seed, "policy_cv"))
    records = []
    for k, (train, held_out) in enumerate(splitter.split(X, W)):
        eval_params = forest_params.replace(seed=derive_seed(seed, "policy_cv_eval", k))
        eval_model = fit_causal_forest(X[held_out], W[held_out], Y[held_out], eval_params,
                                       propensity=propensity, n_jobs=n_jobs)
        eval_scores = scores_from_model(eval_model)
        for method in methods:
            policy = fit_policy(method, X[train], W[train], Y[train], forest_params, policy_params,
                                seed=derive_seed(seed, method, k), propensity=propensity, n_jobs=n_jobs)
            value = estimate_value(policy, X[held_out], scores=eval_scores)
            records.append({"fold": k, "method": method, "value": value})
            logger.info("Fold %d %s: value %.4f", k, method, value)

    fold_values = pd.DataFrame(records)
    grouped = fold_values.groupby("method", sort=False)["value"]
    table = pd.DataFrame({
        "Mean value": grouped.mean(),
        "Standard Error": grouped.std(ddof=1) / np.sqrt(folds),
    })
    metadata = {"value_estimator": VALUE_ESTIMATOR, "folds": folds, "seed": seed}
    return CrossValidationReport(table=table, fold_values=fold_values, metadata=metadata)
