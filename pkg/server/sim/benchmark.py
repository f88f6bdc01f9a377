import logging
from dataclasses import dataclass

import numpy as np
import pandas as pd
from django.conf import settings
from joblib import Parallel, delayed

from causal.forest.params import ForestParams
from causal.policy.methods import METHODS, PolicyParams, fit_policy
from causal.policy.value import estimate_value, policy_accuracy
from sim.exceptions import EffectVariantError, SpecError
from sim.generator import default_spec, generate_dataset, weaken_effects
from utils.utils import derive_seed, dump_csv, dump_json

logger = logging.getLogger(__name__)

VALUE_ESTIMATOR = "potential_outcome_means"
REPLICATE_COLUMNS = [
    "train_size", "replicate", "method", "value", "accuracy", "oracle_value", "best_arm_value", "status", "error",
]


@dataclass(frozen=True, eq=False)
class BenchmarkReport:
    replicates: pd.DataFrame
    metadata: dict

    def summary(self):
        ok = self.replicates[self.replicates["status"] == "ok"]
        rows = {}
        for (train_size, method), group in self.replicates.groupby(["train_size", "method"], sort=False):
            fitted = ok[(ok["train_size"] == train_size) & (ok["method"] == method)]
            rows.setdefault(str(train_size), {})[method] = {
                "mean_value": fitted["value"].mean(),
                "sd_value": fitted["value"].std(ddof=1),
                "mean_accuracy": fitted["accuracy"].mean(),
                "sd_accuracy": fitted["accuracy"].std(ddof=1),
                "n_ok": len(fitted),
                "n_failed": len(group) - len(fitted),
            }
        baselines = self.replicates.drop_duplicates(["train_size", "replicate"])
        for train_size, group in baselines.groupby("train_size", sort=False):
            rows[str(train_size)]["oracle"] = {"mean_value": group["oracle_value"].mean()}
            rows[str(train_size)]["best_arm"] = {"mean_value": group["best_arm_value"].mean()}
        return {"metadata": self.metadata, "train_sizes": rows}

    def long_format(self):
        """One row per (train_size, replicate, method, metric); the shape boxplots want."""
        ok = self.replicates[self.replicates["status"] == "ok"]
        return ok.melt(id_vars=["train_size", "replicate", "method"], value_vars=["value", "accuracy"],
                       var_name="metric", value_name="score")

    def mean_values(self, train_size):
        ok = self.replicates[(self.replicates["status"] == "ok") & (self.replicates["train_size"] == train_size)]
        return ok.groupby("method", sort=False)["value"].mean()


def forest_params_from_settings(overrides=None, seed=0):
    return ForestParams.from_settings(overrides, seed=seed, base=settings.SIMULATION["FOREST"])


def _run_replicate(spec, train_size, replicate, n_test, methods, seed, forest_params, policy_params):
    train = generate_dataset(spec, train_size, seed=derive_seed(seed, "train"))
    test = generate_dataset(spec, n_test, seed=derive_seed(seed, "test"))
    base = {
        "train_size": train_size,
        "replicate": replicate,
        "oracle_value": test.oracle_value,
        "best_arm_value": test.best_arm_value,
    }
    fm = train.features
    rows = []
    for method in methods:
        try:
            policy = fit_policy(method, fm.X, fm.W, fm.Y, forest_params=forest_params, policy_params=policy_params,
                                seed=derive_seed(seed, method), propensity=0.5, feature_names=fm.column_names)
            value = estimate_value(policy, test.features.X, potential=(test.mu_0, test.mu_1))
            accuracy = policy_accuracy(policy, test.features.X, test.optimal)
        except Exception as exc:
            logger.warning("Replicate %d (n=%d): %s failed: %s", replicate, train_size, method, exc)
            rows.append({**base, "method": method, "value": np.nan, "accuracy": np.nan,
                         "status": "failed", "error": str(exc)})
            continue
        rows.append({**base, "method": method, "value": value, "accuracy": accuracy, "status": "ok", "error": ""})
        logger.debug("Replicate %d (n=%d): %s value %.4f accuracy %.4f",
                     replicate, train_size, method, value, accuracy)
    return rows


def run_benchmark(spec, train_sizes=(200, 500), n_test=10_000, n_replicates=20, methods=METHODS, seed=0,
                  forest_params=None, policy_params=None, n_jobs=1):
    """Fit every method on fresh training sets and score it on fresh test sets.

    Values are means of the true arm means E[Y(π(X))|X] over the test set. A method failing on a
    replicate is recorded with status "failed".
    """
    unknown = set(methods) - set(METHODS)
    if unknown:
        raise SpecError(f"Unknown methods {sorted(unknown)}; choose from {METHODS}.", field="methods")
    if n_replicates < 1 or n_test < 1:
        raise SpecError("n_replicates and n_test must be positive.", field="n_replicates")
    forest_params = forest_params or forest_params_from_settings(seed=seed)
    policy_params = policy_params or PolicyParams(split_step=settings.SIMULATION["POLICY_SPLIT_STEP"])

    jobs = [(size, r) for size in train_sizes for r in range(n_replicates)]
    logger.info("Benchmark: %d replicates x %d training sizes, %s effects, methods %s",
                n_replicates, len(train_sizes), spec.effect, ", ".join(methods))
    results = Parallel(n_jobs=n_jobs, prefer="threads")(
        delayed(_run_replicate)(spec, size, r, n_test, methods, derive_seed(seed, "replicate", size, r),
                                forest_params, policy_params)
        for size, r in jobs
    )
    replicates = pd.DataFrame([row for rows in results for row in rows], columns=REPLICATE_COLUMNS)
    n_failed = int((replicates["status"] == "failed").sum())
    if n_failed:
        logger.warning("%d of %d method fits failed", n_failed, len(replicates))
    metadata = {
        "effect": spec.effect,
        "seed": seed,
        "n_test": n_test,
        "n_replicates": n_replicates,
        "train_sizes": list(train_sizes),
        "methods": list(methods),
        "value_estimator": VALUE_ESTIMATOR,
        "forest": forest_params.to_dict(),
        "split_step": policy_params.split_step,
    }
    return BenchmarkReport(replicates=replicates, metadata=metadata)


def write_report(report, out_dir, long_format=False):
    """replicates.csv, summary.json and, on request, long.csv under out_dir."""
    written = {
        "replicates": dump_csv(report.replicates, out_dir / "replicates.csv", columns=REPLICATE_COLUMNS),
        "summary": dump_json(report.summary(), out_dir / "summary.json"),
    }
    if long_format:
        written["long"] = dump_csv(report.long_format(), out_dir / "long.csv")
    return written


def resolve_spec(spec=None, effect=None, seed=0):
    """Bundled spec unless one is given; a strong spec is weakened when effect="weak"."""
    if spec is None:
        return default_spec(effect=effect or settings.SIMULATION["EFFECT"], seed=seed)
    if effect is None or effect == spec.effect:
        return spec
    if effect == "weak":
        return weaken_effects(spec)
    raise EffectVariantError("A weak-effect spec cannot be strengthened.", field="effect")


def simulate(out_dir, spec=None, effect=None, train_sizes=None, n_test=None, replicates=None, methods=None,
             full_scale=False, forest=None, policy_split_step=None, seed=0, n_jobs=1, long_format=False):
    """Benchmark with settings.SIMULATION defaults under any given arguments; writes the report files."""
    cfg = dict(settings.SIMULATION)
    if full_scale:
        cfg.update(cfg["FULL_SCALE"])
    spec = resolve_spec(spec, effect, seed)
    report = run_benchmark(
        spec,
        train_sizes=tuple(train_sizes or cfg["TRAIN_SIZES"]),
        n_test=n_test or cfg["N_TEST"],
        n_replicates=replicates or cfg["REPLICATES"],
        methods=tuple(methods or cfg["METHODS"]),
        seed=seed,
        forest_params=forest_params_from_settings(forest, seed=seed),
        policy_params=PolicyParams(split_step=policy_split_step or cfg["POLICY_SPLIT_STEP"]),
        n_jobs=n_jobs,
    )
    dump_json(spec.to_dict(), out_dir / "spec.json")
    return report, write_report(report, out_dir, long_format=long_format)
