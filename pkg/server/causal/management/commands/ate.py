import json
from pathlib import Path

from causal.effects.ate import ate
from causal.effects.scores import scores_from_model
from causal.forest import load_model
from eeg.io.features import load_feature_table
from utils.commands import PipelineCommand
from utils.utils import ArtifactJSONEncoder, dump_json


class Command(PipelineCommand):
    help = "Average treatment effect from doubly robust scores of a fitted forest."

    def add_arguments(self, parser):
        parser.add_argument("--model", type=Path, required=True)
        parser.add_argument("--features", type=Path, default=None,
                            help="Feature CSV the model was fitted on; supplies subject ids.")
        parser.add_argument("--out", type=Path, default=None, help="Write the ATE JSON here as well.")
        parser.add_argument("--scores-out", type=Path, default=None, help="Write the per-subject scores JSON.")

    def run(self, model, features=None, out=None, scores_out=None, **options):
        forest = load_model(model)
        ids = ()
        if features is not None:
            fm = load_feature_table(features)
            if fm.n != forest.n:
                raise ValueError(f"{features} has {fm.n} subjects but the model was fitted on {forest.n}.")
            ids = fm.subject_ids
        scores = scores_from_model(forest, subject_ids=ids)
        result = ate(scores)
        payload = {
            "tau_hat": result.tau_hat,
            "se": result.standard_error,
            "ci": list(result.ci_95),
            "p": result.p_value,
            "score_variance": result.score_variance,
            "n": result.n,
        }
        if out is not None:
            dump_json(payload, out)
        if scores_out is not None:
            dump_json(scores.to_dict(), scores_out)
        self.stdout.write(json.dumps(payload, cls=ArtifactJSONEncoder, indent=2))
