import json
from io import StringIO
from unittest import mock

import numpy as np
import pandas as pd
from django.core.management import CommandError, call_command
from django.test import SimpleTestCase, tag

from causal.forest.params import ForestParams
from causal.policy.methods import METHODS, PolicyParams
from sim.benchmark import REPLICATE_COLUMNS, resolve_spec, run_benchmark, write_report
from sim.exceptions import EffectVariantError, SpecError
from sim.generator import default_spec, generate_dataset, weaken_effects
from sim.tests.factories import small_spec
from utils.testing import TmpDirMixin
from utils.utils import derive_seed, dump_json

TINY_FOREST = ForestParams(num_trees=40, nuisance_trees=10, cross_fit_folds=3, min_node_size=5)
TINY_POLICY = PolicyParams(q_folds=3, split_step=2)


def tiny_benchmark(**changes):
    options = dict(train_sizes=(80,), n_test=400, n_replicates=2, seed=4,
                   forest_params=TINY_FOREST, policy_params=TINY_POLICY)
    options.update(changes)
    return run_benchmark(small_spec(), **options)


class RunBenchmarkTests(TmpDirMixin, SimpleTestCase):

    @classmethod
    def setUpClass(cls):
        super().setUpClass()
        cls.report = tiny_benchmark()

    def test_one_row_per_method_and_replicate(self):
        table = self.report.replicates
        self.assertEqual(list(table.columns), REPLICATE_COLUMNS)
        self.assertEqual(len(table), 2 * len(METHODS))
        self.assertEqual(list(table["method"][:3]), list(METHODS))
        self.assertTrue((table["status"] == "ok").all())

    def test_values_bounded_by_oracle(self):
        table = self.report.replicates
        self.assertTrue((table["value"] <= table["oracle_value"] + 1e-12).all())
        self.assertTrue(table["accuracy"].between(0, 1).all())

    def test_oracle_matches_regenerated_test_set(self):
        seed = derive_seed(derive_seed(4, "replicate", 80, 1), "test")
        test = generate_dataset(small_spec(), 400, seed=seed)
        oracle = self.report.replicates.query("replicate == 1")["oracle_value"].iloc[0]
        self.assertEqual(oracle, np.maximum(test.mu_0, test.mu_1).mean())

    def test_threads_do_not_change_results(self):
        pd.testing.assert_frame_equal(tiny_benchmark(n_jobs=2).replicates, self.report.replicates)

    def test_summary_and_files(self):
        written = write_report(self.report, self.tmp / "report", long_format=True)
        summary = json.loads(written["summary"].read_text(encoding="utf-8"))
        self.assertEqual(summary["metadata"]["value_estimator"], "potential_outcome_means")
        self.assertEqual(set(summary["train_sizes"]["80"]), set(METHODS) | {"oracle", "best_arm"})
        self.assertEqual(summary["train_sizes"]["80"]["q_learning"]["n_ok"], 2)
        long = pd.read_csv(written["long"])
        self.assertEqual(set(long["metric"]), {"value", "accuracy"})
        self.assertEqual(len(long), 2 * len(self.report.replicates))
        self.assertEqual(pd.read_csv(written["replicates"]).shape, self.report.replicates.shape)
        raw = written["replicates"].read_bytes()
        self.assertNotIn(b"\r\n", raw)
        self.assertEqual(raw.split(b"\n", 1)[0].decode("utf-8").split(","), REPLICATE_COLUMNS)

    def test_failed_method_is_recorded(self):
        with mock.patch("sim.benchmark.fit_policy", side_effect=RuntimeError("no convergence")):
            with self.assertLogs("sim.benchmark", level="WARNING"):
                report = tiny_benchmark(n_replicates=1, methods=("q_learning",))
        row = report.replicates.iloc[0]
        self.assertEqual(row["status"], "failed")
        self.assertEqual(row["error"], "no convergence")
        self.assertTrue(np.isnan(row["value"]))
        self.assertEqual(report.summary()["train_sizes"]["80"]["q_learning"]["n_failed"], 1)

    def test_unknown_method(self):
        with self.assertRaises(SpecError):
            tiny_benchmark(methods=("bandit",))


class ResolveSpecTests(SimpleTestCase):

    def test_bundled_variants(self):
        self.assertEqual(resolve_spec(effect="weak").effect, "weak")
        self.assertEqual(resolve_spec().effect, "strong")

    def test_weak_spec_cannot_become_strong(self):
        with self.assertRaises(EffectVariantError):
            resolve_spec(weaken_effects(small_spec()), effect="strong")
        self.assertEqual(resolve_spec(small_spec(), effect="weak").effect, "weak")


class SimulateCommandTests(TmpDirMixin, SimpleTestCase):

    def setUp(self):
        super().setUp()
        self.spec = dump_json(small_spec().to_dict(), self.tmp / "spec.json")
        self.config = dump_json({
            "n_test": 300,
            "replicates": 2,
            "methods": ["q_learning", "o_learning"],
            "forest": {"num_trees": 20, "nuisance_trees": 10, "cross_fit_folds": 3},
        }, self.tmp / "sim.json")

    def simulate(self, out, *extra):
        call_command("simulate", "--spec", str(self.spec), "--train-n", "60", "--config", str(self.config),
                     "--seed", "7", "--out", str(out), *extra, stdout=StringIO())

    def test_writes_report(self):
        out = self.tmp / "report"
        self.simulate(out, "--long", "--effect", "weak")
        self.assertTrue((out / "long.csv").exists())
        summary = json.loads((out / "summary.json").read_text(encoding="utf-8"))
        self.assertEqual(summary["metadata"]["effect"], "weak")
        self.assertEqual(summary["metadata"]["train_sizes"], [60])
        self.assertEqual(json.loads((out / "spec.json").read_text(encoding="utf-8"))["effect"], "weak")

    def test_byte_identical_across_threads(self):
        self.simulate(self.tmp / "one", "--threads", "1")
        self.simulate(self.tmp / "two", "--threads", "2")
        self.assertEqual((self.tmp / "one" / "replicates.csv").read_bytes(),
                         (self.tmp / "two" / "replicates.csv").read_bytes())

    def test_unknown_method_is_input_error(self):
        with self.assertRaises(CommandError) as raised:
            self.simulate(self.tmp / "bad", "--methods", "bandit")
        self.assertEqual(raised.exception.returncode, 1)


@tag("slow")
class DeskScaleBenchmarkTests(SimpleTestCase):

    def test_policy_tree_learns_the_effect_tree(self):
        forest = ForestParams(num_trees=300, nuisance_trees=100, cross_fit_folds=5, min_node_size=5)
        strong = run_benchmark(default_spec(), train_sizes=(500,), n_test=5_000, n_replicates=5,
                               methods=("policy_tree",), seed=1, forest_params=forest,
                               policy_params=PolicyParams(split_step=10), n_jobs=2)
        table = strong.replicates
        self.assertTrue((table["status"] == "ok").all())
        self.assertTrue((table["value"] <= table["oracle_value"]).all())
        self.assertGreater(table["accuracy"].mean(), 0.55)

    def test_method_comparison_under_strong_effects(self):
        forest = ForestParams(num_trees=300, nuisance_trees=100, cross_fit_folds=5, min_node_size=5)
        report = run_benchmark(default_spec(effect="strong"), train_sizes=(200, 500), n_test=5_000, n_replicates=5,
                               methods=("policy_tree", "q_learning", "o_learning"), seed=2, forest_params=forest,
                               policy_params=PolicyParams(split_step=10), n_jobs=2)
        table = report.replicates
        self.assertTrue((table["status"] == "ok").all())
        means = table.groupby(["train_size", "method"])[["value", "accuracy"]].mean()
        for n in (200, 500):
            for metric in ("value", "accuracy"):
                tree = means.loc[(n, "policy_tree"), metric]
                self.assertGreaterEqual(tree, means.loc[(n, "q_learning"), metric])
                self.assertGreaterEqual(tree, means.loc[(n, "o_learning"), metric])
        self.assertGreater(means.loc[(500, "policy_tree"), "accuracy"], means.loc[(200, "policy_tree"), "accuracy"])
        by_size = table.groupby("train_size")["accuracy"].mean()
        self.assertGreater(by_size[500], by_size[200])
