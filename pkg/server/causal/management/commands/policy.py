from pathlib import Path

from causal.policy.methods import PolicyParams, fit_policy
from causal.serializers import PolicyOverridesSerializer, load_scores
from eeg.io.features import load_feature_table
from utils.commands import PipelineCommand
from utils.utils import dump_json

METHOD_ALIASES = {"tree": "policy_tree", "qlearn": "q_learning", "olearn": "o_learning"}


class Command(PipelineCommand):
    help = "Learn a treatment policy: depth-2 tree on doubly robust scores, Q-learning or O-learning."
    config_serializer_class = PolicyOverridesSerializer

    def add_arguments(self, parser):
        parser.add_argument("--features", type=Path, required=True)
        parser.add_argument("--scores", type=Path, default=None, help="Scores JSON (required for --method tree).")
        parser.add_argument("--method", choices=sorted(METHOD_ALIASES), default="tree")
        parser.add_argument("--out", type=Path, required=True)

    def run(self, features, out, scores=None, method="tree", seed=0, threads=1, overrides=None, **options):
        fm = load_feature_table(features)
        method = METHOD_ALIASES[method]
        dr_scores = None
        if method == "policy_tree":
            if scores is None:
                raise ValueError("--scores is required for the policy tree.")
            dr_scores = load_scores(scores)
            if dr_scores.n != fm.n:
                raise ValueError(f"{scores} has {dr_scores.n} subjects, {features} has {fm.n}.")
            if dr_scores.subject_ids and tuple(dr_scores.subject_ids) != fm.subject_ids:
                raise ValueError("Scores and features list different subjects.")
        policy = fit_policy(method, fm.X, fm.W, fm.Y, policy_params=PolicyParams.from_settings(overrides),
                            seed=seed, feature_names=fm.column_names, scores=dr_scores, n_jobs=threads)
        dump_json(policy.to_dict(), out)
        self.success(f"Wrote {method} policy to {out}")
