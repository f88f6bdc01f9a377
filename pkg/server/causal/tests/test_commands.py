import json
from io import StringIO

import numpy as np
import pandas as pd
from django.conf import settings
from django.core.management import CommandError, call_command
from django.test import SimpleTestCase

from causal.forest import load_model
from causal.tests.factories import make_effect_data, step_effect, write_feature_csv
from utils.testing import TmpDirMixin
from utils.utils import dump_json, load_json


class CausalCommandTests(TmpDirMixin, SimpleTestCase):

    def setUp(self):
        super().setUp()
        X, W, Y, _ = make_effect_data(n=150, d=3, seed=3, tau=step_effect)
        self.features = write_feature_csv(self.tmp / "features.csv", X, W, Y)
        self.config = dump_json({"num_trees": 40, "nuisance_trees": 10, "cross_fit_folds": 3},
                                self.tmp / "forest.json")
        self.model = self.tmp / "model.npz"

    def call(self, *args):
        out = StringIO()
        call_command(*args, stdout=out)
        return out.getvalue()

    def fit(self):
        self.call("fit_forest", "--features", str(self.features), "--out", str(self.model),
                  "--config", str(self.config), "--seed", "5")

    def test_fit_with_settings_grid(self):
        grid = {"mtry": [None], "min_node_size": [4, 9], "subsample_ratio": [0.5]}
        with self.settings(CAUSAL_FOREST={**settings.CAUSAL_FOREST, "TUNE_GRID": grid}):
            self.call("fit_forest", "--features", str(self.features), "--out", str(self.model),
                      "--config", str(self.config), "--tune")
        self.assertIn(load_model(self.model).params.min_node_size, (4, 9))

    def test_grid_file_replaces_settings_keys(self):
        grid = dump_json({"min_node_size": [6]}, self.tmp / "grid.json")
        self.call("fit_forest", "--features", str(self.features), "--out", str(self.model),
                  "--config", str(self.config), "--tune", str(grid))
        params = load_model(self.model).params
        self.assertEqual(params.min_node_size, 6)
        self.assertEqual(params.subsample_ratio, settings.CAUSAL_FOREST["TUNE_GRID"]["subsample_ratio"][0])

    def test_forest_chain(self):
        self.fit()
        model = load_model(self.model)
        self.assertEqual(model.params.num_trees, 40)
        self.assertEqual(model.params.seed, 5)
        self.assertEqual(model.column_names, ("f0", "f1", "f2"))

        scores = self.tmp / "scores.json"
        payload = json.loads(self.call("ate", "--model", str(self.model), "--features", str(self.features),
                                       "--scores-out", str(scores)))
        self.assertEqual(set(payload), {"tau_hat", "se", "ci", "p", "score_variance", "n"})
        self.assertEqual(payload["n"], 150)
        self.assertLessEqual(payload["ci"][0], payload["tau_hat"])
        self.assertEqual(load_json(scores)["subject_ids"][0], "s000")

        table = self.tmp / "blp.csv"
        self.call("blp_test", "--model", str(self.model), "--out", str(table))
        self.assertEqual(list(pd.read_csv(table)["term"])[-1], "differential.forest.prediction")

        ranking = self.tmp / "importance.csv"
        printed = self.call("importance", "--model", str(self.model), "--top", "2", "--out", str(ranking))
        self.assertEqual(len(pd.read_csv(ranking)), 3)
        self.assertEqual(printed.splitlines()[0].split("\t")[0], "f0")

        policy = self.tmp / "policy.json"
        policy_config = dump_json({"depth": 1}, self.tmp / "policy_config.json")
        self.call("policy", "--features", str(self.features), "--scores", str(scores), "--method", "tree",
                  "--out", str(policy), "--config", str(policy_config))
        stored = load_json(policy)
        self.assertEqual(stored["kind"], "policy_tree")
        self.assertNotIn("left", stored["tree"].get("left", {}))

        train_ids = self.tmp / "train.txt"
        train_ids.write_text("s000\ns001\n", encoding="utf-8")
        with self.assertLogs("causal.policy.value", level="WARNING"):
            value = json.loads(self.call("value", "--policy", str(policy), "--scores", str(scores),
                                         "--features", str(self.features), "--train-ids", str(train_ids)))
        self.assertEqual(value["value_estimator"], "doubly_robust")
        self.assertTrue(np.isfinite(value["value"]))

    def test_q_learning_needs_no_scores(self):
        out = self.tmp / "q.json"
        self.call("policy", "--features", str(self.features), "--method", "qlearn", "--out", str(out))
        self.assertEqual(load_json(out)["kind"], "q_learning")

    def test_tree_without_scores_is_invalid(self):
        with self.assertRaises(CommandError) as raised:
            self.call("policy", "--features", str(self.features), "--method", "tree",
                      "--out", str(self.tmp / "p.json"))
        self.assertEqual(raised.exception.returncode, 1)

    def test_invalid_override_is_input_error(self):
        bad = dump_json({"honesty_ratio": 1.0}, self.tmp / "bad.json")
        with self.assertRaises(CommandError) as raised:
            self.call("fit_forest", "--features", str(self.features), "--out", str(self.model),
                      "--config", str(bad))
        self.assertEqual(raised.exception.returncode, 1)
        self.assertFalse(self.model.exists())

    def test_missing_model_is_input_error(self):
        with self.assertRaises(CommandError) as raised:
            self.call("ate", "--model", str(self.tmp / "absent.npz"))
        self.assertEqual(raised.exception.returncode, 1)
