from pathlib import Path

from causal.forest import ForestParams, fit_causal_forest, grid_from_settings, save_model, tune_r_loss
from causal.serializers import ForestOverridesSerializer, TuneGridSerializer
from eeg.io.features import load_feature_table
from utils.commands import PipelineCommand
from utils.utils import load_json


class Command(PipelineCommand):
    help = "Fit an honest causal forest on a feature table and write the model archive."
    config_serializer_class = ForestOverridesSerializer

    def add_arguments(self, parser):
        parser.add_argument("--features", type=Path, required=True, help="Feature CSV with subject_id, W, Y.")
        parser.add_argument("--out", type=Path, required=True, help="Model archive to write.")
        parser.add_argument("--tune", type=Path, nargs="?", const=True, default=None,
                            help="R-loss tuning over mtry, min_node_size and subsample_ratio. A JSON grid file "
                                 "replaces keys of CAUSAL_FOREST['TUNE_GRID']; without a file that grid is used.")
        parser.add_argument("--propensity", type=float, default=None,
                            help="Known randomization probability; replaces the propensity forest.")

    def run(self, features, out, tune=None, propensity=None, seed=0, threads=1, overrides=None, **options):
        fm = load_feature_table(features)
        params = ForestParams.from_settings(overrides, seed=seed)
        if tune is not None:
            grid = TuneGridSerializer(data=grid_from_settings(None if tune is True else load_json(tune)))
            grid.is_valid(raise_exception=True)
            params = tune_r_loss(fm.X, fm.W, fm.Y, grid.validated_data, base=params,
                                 propensity=propensity, n_jobs=threads)
        model = fit_causal_forest(fm.X, fm.W, fm.Y, params, propensity=propensity,
                                  column_names=fm.column_names, n_jobs=threads)
        save_model(model, out)
        self.success(f"Wrote a {params.num_trees}-tree causal forest on {fm.n} subjects to {out}")
