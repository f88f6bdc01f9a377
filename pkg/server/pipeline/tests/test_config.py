from django.test import SimpleTestCase, override_settings
from rest_framework.exceptions import ValidationError

from pipeline.config import PipelineConfig, load_config
from utils.testing import TmpDirMixin
from utils.utils import dump_json


class PipelineConfigTests(TmpDirMixin, SimpleTestCase):

    def setUp(self):
        super().setUp()
        self.features = self.tmp / "features.csv"
        self.features.write_text("subject_id,W,Y,x\ns1,0,1,0.5\n", encoding="utf-8")

    def test_defaults_from_settings(self):
        cfg = PipelineConfig.from_payload({"out_dir": str(self.tmp), "stages": ["simulate"]})
        self.assertEqual(cfg.stages, ("simulate",))
        self.assertEqual(cfg.train_fraction, 0.7)
        self.assertTrue(cfg.upsample_minority)
        self.assertEqual(cfg.policy_method, "policy_tree")

    def test_flags_win(self):
        path = dump_json({"out_dir": str(self.tmp), "stages": ["simulate"], "seed": 3, "threads": 2},
                         self.tmp / "run.json")
        cfg = load_config(path, seed=9, threads=None)
        self.assertEqual(cfg.seed, 9)
        self.assertEqual(cfg.threads, 2)

    def test_stages_in_pipeline_order(self):
        cfg = PipelineConfig.from_payload({"out_dir": str(self.tmp), "features": str(self.features),
                                           "stages": ["policy", "fit_forest", "scores"]})
        self.assertEqual(cfg.stages, ("fit_forest", "scores", "policy"))

    def test_split_fraction_range(self):
        for fraction in (0, 1, 1.2):
            with self.assertRaises(ValidationError):
                PipelineConfig.from_payload({"stages": ["simulate"], "train_fraction": fraction})

    def test_missing_paths_rejected(self):
        with self.assertRaises(ValidationError) as raised:
            PipelineConfig.from_payload({"stages": ["preprocess", "features"], "raw_dir": str(self.tmp / "nope")})
        self.assertIn("raw_dir", raised.exception.detail)
        self.assertIn("clinical", raised.exception.detail)

    def test_forest_stages_need_a_table(self):
        with self.assertRaises(ValidationError) as raised:
            PipelineConfig.from_payload({"stages": ["fit_forest"]})
        self.assertIn("features", raised.exception.detail)

    def test_nested_overrides_validated(self):
        with self.assertRaises(ValidationError):
            PipelineConfig.from_payload({"stages": ["simulate"], "forest": {"honesty_ratio": 1.0}})
        with self.assertRaises(ValidationError):
            PipelineConfig.from_payload({"stages": ["simulate"], "policy": {"depth": 3}})

    def test_hash_ignores_threads_and_out_dir(self):
        base = PipelineConfig.from_payload({"out_dir": str(self.tmp / "a"), "stages": ["simulate"]})
        moved = base.replace(out_dir=self.tmp / "b", threads=8)
        self.assertEqual(base.config_hash, moved.config_hash)
        self.assertNotEqual(base.config_hash, base.replace(seed=base.seed + 1).config_hash)

    @override_settings(PIPELINE_OUTPUT_DIR="/tmp/eeg-policy-default")
    def test_output_dir_default(self):
        cfg = PipelineConfig.from_payload({"stages": ["simulate"]})
        self.assertEqual(str(cfg.out_dir), "/tmp/eeg-policy-default")

    def test_tuning_off_by_default(self):
        cfg = PipelineConfig.from_payload({"stages": ["simulate"]})
        self.assertFalse(cfg.tune)
        self.assertEqual(cfg.tune_grid, {})
        tuned = PipelineConfig.from_payload({"stages": ["simulate"], "tune": True,
                                             "tune_grid": {"min_node_size": [2, 4]}})
        self.assertEqual(tuned.tune_grid, {"min_node_size": [2, 4]})
        self.assertNotEqual(cfg.config_hash, tuned.config_hash)

    def test_tuning_grid_validated(self):
        for grid in ({"subsample_ratio": [1.5]}, {"num_trees": [10]}, {}):
            with self.assertRaises(ValidationError):
                PipelineConfig.from_payload({"stages": ["simulate"], "tune_grid": grid})
