import logging

import numpy as np
import pandas as pd

from causal.exceptions import ParameterError
from causal.forest.causal import fit_causal_forest

logger = logging.getLogger(__name__)


def transformed_outcome(Y, W, p, literal=False):
    """Y* = Y(W − p)/(p(1 − p)); `literal` gives (Y − W)/(p(1 − p)) instead."""
    if not 0 < p < 1:
        raise ParameterError("Assignment probability must lie in (0, 1).", field="p")
    Y = np.asarray(Y, dtype=np.float64)
    W = np.asarray(W, dtype=np.float64)
    if literal:
        return (Y - W) / (p * (1 - p))
    return Y * (W - p) / (p * (1 - p))


def transformed_outcome_errors(Y, W, p, tau_hat, literal=False):
    return (transformed_outcome(Y, W, p, literal=literal) - np.asarray(tau_hat, dtype=np.float64)) ** 2


def transformed_outcome_mse(Y, W, p, tau_hat, literal=False):
    return float(transformed_outcome_errors(Y, W, p, tau_hat, literal=literal).mean())


def compare_feature_sets(feature_sets, train, test, params=None, p=None, literal=False, n_jobs=1):
    """Transformed-outcome error of a causal forest per named FeatureMatrix on one shared split.

    Returns a frame indexed by set name with "Mean value" and "Standard Error" columns.
    """
    train, test = np.asarray(train), np.asarray(test)
    if np.intersect1d(train, test).size:
        raise ParameterError("Train and test rows overlap.", field="split")
    rows = {}
    for name, fm in feature_sets.items():
        model = fit_causal_forest(fm.X[train], fm.W[train], fm.Y[train], params,
                                  column_names=fm.column_names, n_jobs=n_jobs)
        prob = float(fm.W[train].mean()) if p is None else p
        errors = transformed_outcome_errors(fm.Y[test], fm.W[test], prob, model.predict(fm.X[test]), literal=literal)
        se = float(errors.std(ddof=1) / np.sqrt(len(errors))) if len(errors) > 1 else float("nan")
        rows[name] = {"Mean value": float(errors.mean()), "Standard Error": se}
        logger.info("Feature set %s: transformed-outcome MSE %.4f", name, rows[name]["Mean value"])
    return pd.DataFrame.from_dict(rows, orient="index")
