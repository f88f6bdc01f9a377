import logging
import shutil
from dataclasses import dataclass
from functools import cached_property
from typing import Callable

import numpy as np
import pandas as pd

from causal.effects.ate import ate
from causal.effects.blp import blp_from_model
from causal.effects.scores import scores_from_model
from causal.exceptions import DegenerateRegressorError, SplitlessForestError
from causal.forest import (
    ForestParams, fit_causal_forest, grid_from_settings, load_model, save_model, tune_r_loss, variable_importance,
)
from causal.policy.methods import VALUE_ESTIMATOR, PolicyParams, fit_policy
from causal.policy.value import estimate_value
from causal.serializers import load_scores
from eeg.io.features import load_feature_table, schema_path_for
from eeg.io.montage import common_channels
from eeg.preprocess.pipeline import PreprocessParams, preprocess_directory
from eeg.preprocess.serializers import SiteConfigSerializer
from eeg.spectral.features import SpectralParams, features_from_directory, merge_clinical
from pipeline.sampling import is_binary, split_train_test, upsample_rows
from sim.benchmark import simulate
from sim.serializers import load_spec
from utils.utils import derive_seed, dump_json, load_json

logger = logging.getLogger(__name__)


class RunContext:
    """Paths of one run directory plus lazily loaded shared inputs."""

    def __init__(self, cfg):
        self.cfg = cfg
        out = cfg.out_dir
        self.epochs = out / "epochs"
        self.features = out / "features.csv" if "features" in cfg.stages else cfg.features
        self.split = out / "split.json"
        self.model = out / "model.npz"
        self.importance = out / "importance.csv"
        self.scores = out / "scores.json"
        self.ate = out / "ate.json"
        self.blp = out / "blp.json"
        self.cate = out / "cate.csv"
        self.policy = out / "policy.json"
        self.value = out / "value.json"
        self.simulation = out / "simulation"

    def seed(self, stage):
        return derive_seed(self.cfg.seed, stage)

    @cached_property
    def feature_matrix(self):
        return load_feature_table(self.features)

    def fit_rows(self):
        return np.asarray(load_json(self.split)["fit_rows"], dtype=np.int64)

    def test_rows(self):
        return np.asarray(load_json(self.split)["test_rows"], dtype=np.int64)


@dataclass(frozen=True)
class Stage:
    name: str
    inputs: Callable
    outputs: Callable
    params: Callable
    run: Callable


def _preprocess(ctx):
    serializer = SiteConfigSerializer(data=ctx.cfg.site)
    serializer.is_valid(raise_exception=True)
    params = PreprocessParams.from_settings(serializer.to_settings(), seed=ctx.seed("preprocess"))
    shutil.rmtree(ctx.epochs, ignore_errors=True)
    preprocess_directory(ctx.cfg.raw_dir, ctx.epochs, params=params, common=common_channels(),
                         n_jobs=ctx.cfg.threads)


def _clinical_schema(ctx):
    return schema_path_for(ctx.cfg.clinical)


def _features(ctx):
    frame = features_from_directory(ctx.epochs, common_channels(), params=SpectralParams.from_settings(),
                                    n_jobs=ctx.cfg.threads)
    clinical = pd.read_csv(ctx.cfg.clinical, dtype={"subject_id": str})
    frame = merge_clinical(frame, clinical)
    ctx.features.parent.mkdir(parents=True, exist_ok=True)
    frame.to_csv(ctx.features, index=False, float_format="%.17g")
    if _clinical_schema(ctx).exists():
        shutil.copyfile(_clinical_schema(ctx), schema_path_for(ctx.features))


def _forest_params(ctx):
    return ForestParams.from_settings(ctx.cfg.forest, seed=ctx.seed("fit_forest"))


def _tune_grid(ctx):
    return grid_from_settings(ctx.cfg.tune_grid) if ctx.cfg.tune else None


def _fit_forest(ctx):
    fm = ctx.feature_matrix
    train, test = split_train_test(fm, ctx.cfg.train_fraction, seed=ctx.seed("split"))
    fit_rows = train
    if ctx.cfg.upsample_minority:
        if is_binary(fm.Y[train]):
            fit_rows = train[upsample_rows(fm.Y[train], seed=ctx.seed("upsample"))]
        else:
            logger.warning("Outcome is not binary; minority upsampling skipped")
    dump_json({
        "train_ids": [fm.subject_ids[i] for i in train],
        "test_ids": [fm.subject_ids[i] for i in test],
        "fit_rows": fit_rows.tolist(),
        "test_rows": test.tolist(),
    }, ctx.split)

    fitted = fm.subset(fit_rows)
    params = _forest_params(ctx)
    if ctx.cfg.tune:
        params = tune_r_loss(fitted.X, fitted.W, fitted.Y, _tune_grid(ctx), base=params,
                             propensity=ctx.cfg.propensity, n_jobs=ctx.cfg.threads)
    model = fit_causal_forest(fitted.X, fitted.W, fitted.Y, params, propensity=ctx.cfg.propensity,
                              column_names=fm.column_names, n_jobs=ctx.cfg.threads)
    save_model(model, ctx.model)
    try:
        report = variable_importance(model)
    except SplitlessForestError:
        logger.warning("The forest never split; no importance table written")
        ctx.importance.unlink(missing_ok=True)
        return
    report.to_frame().to_csv(ctx.importance, index=False, float_format="%.17g")


def _scores(ctx):
    fm = ctx.feature_matrix
    model = load_model(ctx.model)
    scores = scores_from_model(model, subject_ids=[fm.subject_ids[i] for i in ctx.fit_rows()])
    dump_json(scores.to_dict(), ctx.scores)
    result = ate(scores)
    dump_json(result.to_dict(), ctx.ate)
    logger.info("ATE %.4f (95%% CI %.4f to %.4f)", result.tau_hat, *result.ci_95)
    try:
        dump_json(blp_from_model(model).to_dict(), ctx.blp)
    except DegenerateRegressorError as exc:
        logger.warning("Calibration test skipped: %s", exc)
        ctx.blp.unlink(missing_ok=True)


def _predict(ctx):
    fm = ctx.feature_matrix
    model = load_model(ctx.model)
    fit_rows, test_rows = ctx.fit_rows(), ctx.test_rows()
    frame = pd.concat([
        pd.DataFrame({"subject_id": [fm.subject_ids[i] for i in fit_rows], "split": "train",
                      "tau_hat": model.predict_oob()}),
        pd.DataFrame({"subject_id": [fm.subject_ids[i] for i in test_rows], "split": "test",
                      "tau_hat": model.predict(fm.X[test_rows]) if len(test_rows) else []}),
    ], ignore_index=True)
    ctx.cate.parent.mkdir(parents=True, exist_ok=True)
    frame.to_csv(ctx.cate, index=False, float_format="%.17g")


def _held_out_value(ctx, policy, test):
    params = _forest_params(ctx).replace(seed=ctx.seed("value_forest"))
    eval_model = fit_causal_forest(test.X, test.W, test.Y, params, propensity=ctx.cfg.propensity,
                                   n_jobs=ctx.cfg.threads)
    train_ids = load_json(ctx.split)["train_ids"]
    return estimate_value(policy, test.X, scores=scores_from_model(eval_model), eval_ids=test.subject_ids,
                          train_ids=train_ids)


def _policy(ctx):
    fm = ctx.feature_matrix
    method = ctx.cfg.policy_method
    fitted = fm.subset(ctx.fit_rows())
    scores = load_scores(ctx.scores) if method == "policy_tree" else None
    policy = fit_policy(method, fitted.X, fitted.W, fitted.Y, forest_params=_forest_params(ctx),
                        policy_params=PolicyParams.from_settings(ctx.cfg.policy), seed=ctx.seed("policy"),
                        propensity=ctx.cfg.propensity, feature_names=fm.column_names, scores=scores,
                        n_jobs=ctx.cfg.threads)
    dump_json(policy.to_dict(), ctx.policy)

    payload = {"method": method, "value_estimator": VALUE_ESTIMATOR, "n": 0, "value": None}
    test_rows = ctx.test_rows()
    try:
        test = fm.subset(test_rows)
        payload.update(n=test.n, value=_held_out_value(ctx, policy, test))
    except Exception as exc:
        logger.warning("Held-out policy value unavailable: %s", exc)
        payload.update(n=len(test_rows), error=str(exc))
    dump_json(payload, ctx.value)


def _simulate(ctx):
    options = dict(ctx.cfg.simulation)
    shutil.rmtree(ctx.simulation, ignore_errors=True)
    simulate(
        ctx.simulation,
        spec=load_spec(ctx.cfg.sim_spec) if ctx.cfg.sim_spec else None,
        effect=options.get("effect"),
        train_sizes=options.get("train_sizes"),
        n_test=options.get("n_test"),
        replicates=options.get("replicates"),
        methods=options.get("methods"),
        forest=options.get("forest"),
        policy_split_step=options.get("policy_split_step"),
        seed=ctx.seed("simulate"),
        n_jobs=ctx.cfg.threads,
        long_format=True,
    )


def _existing(*paths):
    return [path for path in paths if path is not None and path.exists()]


STAGES = {
    "preprocess": Stage(
        "preprocess",
        inputs=lambda ctx: [ctx.cfg.raw_dir],
        outputs=lambda ctx: [ctx.epochs],
        params=lambda ctx: {"site": ctx.cfg.site, "seed": ctx.seed("preprocess")},
        run=_preprocess,
    ),
    "features": Stage(
        "features",
        inputs=lambda ctx: _existing(ctx.epochs, ctx.cfg.clinical, _clinical_schema(ctx)),
        outputs=lambda ctx: _existing(ctx.features, schema_path_for(ctx.features)),
        params=lambda ctx: {"spectral": SpectralParams.from_settings().__dict__},
        run=_features,
    ),
    "fit_forest": Stage(
        "fit_forest",
        inputs=lambda ctx: _existing(ctx.features, schema_path_for(ctx.features)),
        outputs=lambda ctx: _existing(ctx.split, ctx.model, ctx.importance),
        params=lambda ctx: {
            "forest": _forest_params(ctx).to_dict(),
            "tune_grid": _tune_grid(ctx),
            "train_fraction": ctx.cfg.train_fraction,
            "upsample_minority": ctx.cfg.upsample_minority,
            "propensity": ctx.cfg.propensity,
            "seed": ctx.cfg.seed,
        },
        run=_fit_forest,
    ),
    "scores": Stage(
        "scores",
        inputs=lambda ctx: [ctx.model, ctx.split],
        outputs=lambda ctx: _existing(ctx.scores, ctx.ate, ctx.blp),
        params=lambda ctx: {},
        run=_scores,
    ),
    "predict": Stage(
        "predict",
        inputs=lambda ctx: [ctx.model, ctx.features, ctx.split],
        outputs=lambda ctx: [ctx.cate],
        params=lambda ctx: {},
        run=_predict,
    ),
    "policy": Stage(
        "policy",
        inputs=lambda ctx: _existing(ctx.features, ctx.split, ctx.scores),
        outputs=lambda ctx: [ctx.policy, ctx.value],
        params=lambda ctx: {
            "method": ctx.cfg.policy_method,
            "policy": PolicyParams.from_settings(ctx.cfg.policy).__dict__,
            "forest": _forest_params(ctx).to_dict(),
            "seed": ctx.cfg.seed,
        },
        run=_policy,
    ),
    "simulate": Stage(
        "simulate",
        inputs=lambda ctx: _existing(ctx.cfg.sim_spec) if ctx.cfg.sim_spec else [],
        outputs=lambda ctx: [ctx.simulation],
        params=lambda ctx: {"simulation": ctx.cfg.simulation, "seed": ctx.seed("simulate")},
        run=_simulate,
    ),
}
