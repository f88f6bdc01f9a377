import itertools
import logging

import numpy as np
import pandas as pd
from django.conf import settings

from causal.exceptions import EmptyGridError
from causal.forest.causal import fit_causal_forest, fit_nuisances
from causal.forest.params import ForestParams

logger = logging.getLogger(__name__)

TUNABLE = ("mtry", "min_node_size", "subsample_ratio")


def expand_grid(grid):
    """Cartesian product of {"mtry": [...], "min_node_size": [...], ...} as a list of dicts."""
    unknown = set(grid) - set(TUNABLE)
    if unknown:
        raise EmptyGridError(f"Cannot tune {sorted(unknown)}; tunable: {TUNABLE}.", field="grid")
    keys = [k for k in TUNABLE if k in grid]
    if not keys or any(len(grid[k]) == 0 for k in keys):
        raise EmptyGridError("Tuning grid is empty.", field="grid")
    return [dict(zip(keys, values)) for values in itertools.product(*(grid[k] for k in keys))]


def grid_from_settings(overrides=None):
    """CAUSAL_FOREST["TUNE_GRID"] with the keys of `overrides` replaced."""
    return {**settings.CAUSAL_FOREST["TUNE_GRID"], **(overrides or {})}


def r_loss(model):
    """Mean over training subjects of ((Y - m̂⁻ⁱ) - τ̂⁻ⁱ (W - ê⁻ⁱ))²."""
    tau = model.predict_oob()
    return float(np.mean((model.y_residual - tau * model.w_residual) ** 2))


def r_loss_grid(X, W, Y, grid, base=None, propensity=None, n_jobs=1):
    """R-loss of every grid point; nuisances are cross-fitted once and shared."""
    base = base or ForestParams()
    points = expand_grid(grid)
    nuisances = fit_nuisances(X, W, Y, base, propensity=propensity, n_jobs=n_jobs)
    rows = []
    for point in points:
        model = fit_causal_forest(X, W, Y, base.replace(**point), nuisances=nuisances, n_jobs=n_jobs)
        loss = r_loss(model)
        logger.info("R-loss %.6g at %s", loss, point)
        rows.append({**{k: point.get(k, getattr(base, k)) for k in TUNABLE}, "r_loss": loss})
    return pd.DataFrame(rows)


def tune_r_loss(X, W, Y, grid, base=None, propensity=None, n_jobs=1):
    """ForestParams at the smallest R-loss; exact ties go to the larger min_node_size, then grid order."""
    base = base or ForestParams()
    table = r_loss_grid(X, W, Y, grid, base=base, propensity=propensity, n_jobs=n_jobs)
    best = table["r_loss"].min()
    tied = table[table["r_loss"] == best]
    chosen = tied.loc[tied["min_node_size"].idxmax()]
    params = base.replace(
        mtry=None if pd.isna(chosen["mtry"]) else int(chosen["mtry"]),
        min_node_size=int(chosen["min_node_size"]),
        subsample_ratio=float(chosen["subsample_ratio"]),
    )
    logger.info("Selected mtry=%s min_node_size=%d subsample_ratio=%.3f",
                params.mtry, params.min_node_size, params.subsample_ratio)
    return params
