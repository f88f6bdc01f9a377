import logging
from dataclasses import dataclass

import numpy as np
import pandas as pd

from causal.exceptions import ParameterError, SplitlessForestError

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class ImportanceReport:
    importances: pd.Series
    max_depth: int
    coverage: float

    @property
    def ranking(self):
        return list(self.importances.sort_values(ascending=False, kind="stable").index)

    def top(self, k=10):
        return self.importances.loc[self.ranking[:k]]

    def to_frame(self):
        ranked = self.importances.loc[self.ranking]
        return pd.DataFrame({
            "rank": np.arange(1, len(ranked) + 1),
            "feature": ranked.index,
            "importance": ranked.to_numpy(),
        })


def split_counts(trees, n_features, max_depth):
    """(layers, features) count of splits per layer; layer 1 is the root."""
    counts = np.zeros((max_depth, n_features), dtype=np.int64)
    for tree in trees:
        splits = np.flatnonzero(np.asarray(tree.feature) >= 0)
        layers = np.asarray(tree.depth)[splits] + 1
        keep = layers <= max_depth
        np.add.at(counts, (layers[keep] - 1, np.asarray(tree.feature)[splits][keep]), 1)
    return counts


def importance_from_trees(trees, n_features, max_depth=4, names=None):
    """Layer-weighted split frequency: Σ_l share_l(j)·l⁻² / Σ_l l⁻² over layers 1..max_depth."""
    if max_depth < 1:
        raise ParameterError("max_depth must be at least 1.", field="max_depth")
    counts = split_counts(trees, n_features, max_depth)
    if counts.sum() == 0:
        raise SplitlessForestError("The forest contains no splits.", field="trees")

    layer_weights = np.arange(1, max_depth + 1, dtype=np.float64) ** -2
    totals = counts.sum(axis=1, keepdims=True)
    shares = np.divide(counts, totals, out=np.zeros(counts.shape), where=totals > 0)
    importance = layer_weights @ shares / layer_weights.sum()
    coverage = float(layer_weights[totals[:, 0] > 0].sum() / layer_weights.sum())
    if coverage < 1:
        logger.warning("Layers without any split: importances sum to %.4f", coverage)
    names = list(names) if names is not None else [f"x{j}" for j in range(n_features)]
    return ImportanceReport(importances=pd.Series(importance, index=names), max_depth=max_depth, coverage=coverage)


def variable_importance(model, max_depth=4):
    return importance_from_trees(model.trees, model.n_features, max_depth, names=model.column_names)
