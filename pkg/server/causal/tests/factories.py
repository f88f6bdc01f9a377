import numpy as np
import pandas as pd

from causal.forest.params import ForestParams

SMALL_FOREST = ForestParams(num_trees=100, nuisance_trees=30, cross_fit_folds=5, min_node_size=5, seed=11)


def make_effect_data(n=400, d=4, seed=0, tau=None, baseline=None, noise=0.5, propensity=0.5):
    """Uniform covariates on [0, 1], Bernoulli(propensity) treatment and Y = baseline + τ(X)·W + noise."""
    rng = np.random.default_rng(seed)
    X = rng.uniform(size=(n, d))
    W = rng.binomial(1, propensity, size=n)
    effect = tau(X) if tau is not None else np.zeros(n)
    base = baseline(X) if baseline is not None else X[:, 0]
    Y = base + effect * W + noise * rng.standard_normal(n)
    return X, W, Y, effect


def step_effect(X):
    return np.where(X[:, 0] > 0.5, 1.0, -1.0)


def write_feature_csv(path, X, W, Y, names=None):
    names = names or [f"f{j}" for j in range(X.shape[1])]
    frame = pd.DataFrame(X, columns=names)
    frame.insert(0, "Y", Y)
    frame.insert(0, "W", W)
    frame.insert(0, "subject_id", [f"s{i:03d}" for i in range(len(Y))])
    path.parent.mkdir(parents=True, exist_ok=True)
    frame.to_csv(path, index=False, float_format="%.17g")
    return path
