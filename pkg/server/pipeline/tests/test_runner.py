import json
from io import StringIO

import numpy as np
import pandas as pd
from django.core.management import CommandError, call_command
from django.test import SimpleTestCase, tag

from causal.forest import load_model
from causal.tests.factories import make_effect_data, step_effect, write_feature_csv
from eeg.io.recording import save_recording
from eeg.tests.factories import make_subject_blocks
from pipeline.config import PipelineConfig
from pipeline.exceptions import StageError
from pipeline.runner import run_pipeline
from sim.tests.factories import small_spec
from utils.testing import TmpDirMixin
from utils.utils import dump_json, load_json

TINY_SIMULATION = {
    "train_sizes": [60],
    "n_test": 200,
    "replicates": 1,
    "methods": ["policy_tree", "q_learning"],
    "policy_split_step": 3,
    "forest": {"num_trees": 20, "nuisance_trees": 10, "cross_fit_folds": 2},
}
TINY_FOREST = {"num_trees": 30, "nuisance_trees": 10, "cross_fit_folds": 2}


class SimulateOnlyRunTests(TmpDirMixin, SimpleTestCase):

    def setUp(self):
        super().setUp()
        self.spec = dump_json(small_spec().to_dict(), self.tmp / "spec.json")

    def config(self, out="run", **changes):
        payload = {"out_dir": str(self.tmp / out), "stages": ["simulate"], "sim_spec": str(self.spec),
                   "simulation": TINY_SIMULATION, "seed": 4}
        payload.update(changes)
        return PipelineConfig.from_payload(payload)

    def test_one_stage_and_sim_outputs_only(self):
        manifest = run_pipeline(self.config())
        self.assertEqual([record["name"] for record in manifest["stages"]], ["simulate"])
        self.assertEqual(manifest["stages"][0]["status"], "ran")
        self.assertEqual(sorted(p.name for p in (self.tmp / "run").iterdir()), ["manifest.json", "simulation"])
        self.assertTrue((self.tmp / "run" / "simulation" / "summary.json").exists())
        self.assertTrue((self.tmp / "run" / "simulation" / "long.csv").exists())
        self.assertEqual(set(manifest), {"version", "config_hash", "seeds", "stages", "package_versions"})
        self.assertEqual(manifest["seeds"]["master"], 4)
        self.assertIn("simulate", manifest["seeds"])

    def test_rerun_hits_cache(self):
        first = run_pipeline(self.config())
        second = run_pipeline(self.config())
        self.assertEqual([record["status"] for record in second["stages"]], ["cached"])
        self.assertEqual(second["stages"][0]["outputs"], first["stages"][0]["outputs"])
        self.assertEqual(load_json(self.tmp / "run" / "manifest.json")["stages"][0]["status"], "cached")

    def test_changed_params_rerun(self):
        run_pipeline(self.config())
        changed = run_pipeline(self.config(seed=5))
        self.assertEqual(changed["stages"][0]["status"], "ran")

    def test_tampered_output_rerun(self):
        run_pipeline(self.config())
        (self.tmp / "run" / "simulation" / "summary.json").write_text("{}", encoding="utf-8")
        self.assertEqual(run_pipeline(self.config())["stages"][0]["status"], "ran")

    def test_identical_config_identical_hashes(self):
        first = run_pipeline(self.config("a"))
        second = run_pipeline(self.config("b", threads=2))
        self.assertEqual(first["config_hash"], second["config_hash"])
        self.assertEqual(list(first["stages"][0]["outputs"].values()),
                         list(second["stages"][0]["outputs"].values()))


class FailureTests(TmpDirMixin, SimpleTestCase):

    def setUp(self):
        super().setUp()
        X, W, Y, _ = make_effect_data(n=30, d=2, seed=1)
        self.features = write_feature_csv(self.tmp / "features.csv", X, np.ones_like(W), Y)

    def payload(self):
        return {"out_dir": str(self.tmp / "run"), "stages": ["fit_forest", "scores"],
                "features": str(self.features), "forest": TINY_FOREST, "upsample_minority": False}

    def test_stage_failure_persists_partial_manifest(self):
        with self.assertRaises(StageError) as raised:
            run_pipeline(PipelineConfig.from_payload(self.payload()))
        self.assertEqual(raised.exception.stage, "fit_forest")
        manifest = load_json(self.tmp / "run" / "manifest.json")
        self.assertEqual([record["name"] for record in manifest["stages"]], ["fit_forest"])
        self.assertEqual(manifest["stages"][0]["status"], "failed")
        self.assertIn("W=0", manifest["stages"][0]["error"])

    def test_command_exit_codes(self):
        config = dump_json(self.payload(), self.tmp / "run.json")
        with self.assertRaises(CommandError) as raised:
            call_command("run", "--config", str(config), stdout=StringIO())
        self.assertEqual(raised.exception.returncode, 2)
        self.assertIn("fit_forest", str(raised.exception))

        with self.assertRaises(CommandError) as raised:
            call_command("run", "--config", str(config), "--features", str(self.tmp / "missing.csv"),
                         stdout=StringIO())
        self.assertEqual(raised.exception.returncode, 1)


class TableRunTests(TmpDirMixin, SimpleTestCase):
    """Forest, scores, prediction and policy stages on an existing features table."""

    def setUp(self):
        super().setUp()
        X, W, Y, _ = make_effect_data(n=120, d=3, seed=6, tau=step_effect)
        self.features = write_feature_csv(self.tmp / "features.csv", X, W, Y)

    def run_command(self, *extra):
        out = StringIO()
        call_command("run", "--features", str(self.features), "--out", str(self.tmp / "run"),
                     "--stages", "fit_forest,scores,predict,policy", "--seed", "3",
                     "--config", str(dump_json({"forest": TINY_FOREST, "upsample_minority": False,
                                                "policy": {"split_step": 2}}, self.tmp / "run.json")),
                     *extra, stdout=out)
        return out.getvalue()

    def test_artifacts(self):
        printed = self.run_command()
        self.assertIn("4 ran", printed)
        run = self.tmp / "run"

        split = load_json(run / "split.json")
        self.assertFalse(set(split["train_ids"]) & set(split["test_ids"]))
        self.assertEqual(len(split["train_ids"]) + len(split["test_ids"]), 120)
        self.assertEqual(len(split["train_ids"]), 84)

        scores = load_json(run / "scores.json")
        self.assertEqual(scores["subject_ids"], split["train_ids"])
        self.assertEqual(set(load_json(run / "ate.json")), {"tau_hat", "score_variance", "standard_error",
                                                             "ci_low", "ci_high", "p_value", "n", "ci_95"})

        cate = pd.read_csv(run / "cate.csv", dtype={"subject_id": str})
        self.assertEqual(list(cate.columns), ["subject_id", "split", "tau_hat"])
        self.assertEqual(sorted(cate["subject_id"]), sorted(split["train_ids"] + split["test_ids"]))

        policy = load_json(run / "policy.json")
        self.assertEqual(policy["kind"], "policy_tree")
        value = load_json(run / "value.json")
        self.assertEqual(value["n"], 36)
        self.assertEqual(value["value_estimator"], "doubly_robust")

        manifest = load_json(run / "manifest.json")
        self.assertEqual([r["name"] for r in manifest["stages"]], ["fit_forest", "scores", "predict", "policy"])
        self.assertIn(str(run / "model.npz"), manifest["stages"][0]["outputs"])

    def test_second_run_fully_cached(self):
        self.run_command()
        printed = self.run_command()
        self.assertIn("4 cached", printed)

    def test_q_learning_policy_without_scores_stage(self):
        self.run_command()
        self.run_command("--stages", "policy", "--policy-method", "q_learning")
        self.assertEqual(load_json(self.tmp / "run" / "policy.json")["kind"], "q_learning")

    def test_tuned_forest_stage(self):
        config = dump_json({"forest": TINY_FOREST, "upsample_minority": False, "tune": True,
                            "tune_grid": {"min_node_size": [3, 7]}}, self.tmp / "tuned.json")
        call_command("run", "--features", str(self.features), "--out", str(self.tmp / "tuned"),
                     "--stages", "fit_forest", "--config", str(config), stdout=StringIO())
        self.assertIn(load_model(self.tmp / "tuned" / "model.npz").params.min_node_size, (3, 7))

        untuned = PipelineConfig.from_payload({"out_dir": str(self.tmp / "tuned"), "features": str(self.features),
                                               "stages": ["fit_forest"], "forest": TINY_FOREST,
                                               "upsample_minority": False})
        self.assertEqual(run_pipeline(untuned)["stages"][0]["status"], "ran")


@tag("slow")
class EndToEndTests(TmpDirMixin, SimpleTestCase):
    """Six synthetic subjects from raw recordings to a depth-2 policy."""

    def test_raw_to_policy(self):
        raw = self.tmp / "raw"
        subjects = [f"s{i:02d}" for i in range(1, 7)]
        for i, subject in enumerate(subjects):
            for block in make_subject_blocks(subject_seed=i, duration_s=30.0):
                save_recording(block, raw / subject / f"block{block.block_index}.json")
        clinical = self.tmp / "clinical.csv"
        pd.DataFrame({"subject_id": subjects, "W": [0, 1, 0, 1, 0, 1], "Y": [0, 1, 1, 0, 1, 0]}).to_csv(
            clinical, index=False)
        config = dump_json({
            "out_dir": str(self.tmp / "run"),
            "raw_dir": str(raw),
            "clinical": str(clinical),
            "stages": ["preprocess", "features", "fit_forest", "scores", "predict", "policy"],
            "propensity": 0.5,
            "upsample_minority": False,
            "forest": {**TINY_FOREST, "min_node_size": 1},
            "seed": 2,
        }, self.tmp / "run.json")

        call_command("run", "--config", str(config), stdout=StringIO())
        run = self.tmp / "run"

        frame = pd.read_csv(run / "features.csv")
        eeg_columns = [c for c in frame.columns if c.endswith((".theta", ".alpha"))]
        self.assertEqual(len(eeg_columns), 216)
        self.assertEqual(len(frame), 6)
        self.assertTrue((run / "model.npz").exists())
        self.assertTrue((run / "scores.json").exists())

        policy = load_json(run / "policy.json")
        self.assertEqual(policy["kind"], "policy_tree")
        self.assertLessEqual(_depth(policy["tree"]), 2)

        manifest = load_json(run / "manifest.json")
        self.assertEqual([r["status"] for r in manifest["stages"]], ["ran"] * 6)
        value = json.loads((run / "value.json").read_text(encoding="utf-8"))
        self.assertEqual(value["method"], "policy_tree")


def _depth(node):
    if "left" not in node:
        return 0
    return 1 + max(_depth(node["left"]), _depth(node["right"]))
