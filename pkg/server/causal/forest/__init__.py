from causal.forest.causal import CausalForestModel, fit_causal_forest, fit_nuisances, predict_cate
from causal.forest.importance import ImportanceReport, importance_from_trees, variable_importance
from causal.forest.params import ForestParams
from causal.forest.regression import RegressionForest, fit_regression_forest
from causal.forest.serialization import load_model, save_model
from causal.forest.tuning import grid_from_settings, tune_r_loss

__all__ = [
    "CausalForestModel", "ForestParams", "ImportanceReport", "RegressionForest",
    "fit_causal_forest", "fit_nuisances", "fit_regression_forest", "importance_from_trees",
    "grid_from_settings", "load_model", "predict_cate", "save_model", "tune_r_loss", "variable_importance",
]
