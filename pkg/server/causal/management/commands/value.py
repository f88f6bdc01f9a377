import json
from pathlib import Path

from causal.policy.methods import VALUE_ESTIMATOR, load_policy
from causal.policy.value import estimate_value
from causal.serializers import load_scores
from eeg.io.features import load_feature_table
from utils.commands import PipelineCommand
from utils.utils import dump_json, load_json


class Command(PipelineCommand):
    help = "Doubly robust value of a stored policy on scored evaluation subjects."

    def add_arguments(self, parser):
        parser.add_argument("--policy", type=Path, required=True)
        parser.add_argument("--scores", type=Path, required=True)
        parser.add_argument("--features", type=Path, required=True)
        parser.add_argument("--train-ids", type=Path, default=None,
                            help="Text file of training subject ids; overlap is reported.")
        parser.add_argument("--out", type=Path, default=None)

    def run(self, policy, scores, features, train_ids=None, out=None, **options):
        fm = load_feature_table(features)
        dr_scores = load_scores(scores)
        if dr_scores.n != fm.n:
            raise ValueError(f"{scores} has {dr_scores.n} subjects, {features} has {fm.n}.")
        train = train_ids.read_text(encoding="utf-8").split() if train_ids else None
        learned = load_policy(load_json(policy))
        value = estimate_value(learned, fm.X, scores=dr_scores, eval_ids=fm.subject_ids, train_ids=train)
        payload = {"value": value, "n": fm.n, "value_estimator": VALUE_ESTIMATOR}
        if out is not None:
            dump_json(payload, out)
        self.stdout.write(json.dumps(payload))
