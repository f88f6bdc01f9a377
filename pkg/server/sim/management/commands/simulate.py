from pathlib import Path

from sim.benchmark import simulate
from sim.serializers import SimulationOverridesSerializer, load_spec
from utils.commands import PipelineCommand


def _int_list(text):
    return [int(part) for part in text.split(",") if part.strip()]


def _name_list(text):
    return [part.strip() for part in text.split(",") if part.strip()]


class Command(PipelineCommand):
    help = "Synthetic benchmark of the policy tree against Q-learning and O-learning."
    config_serializer_class = SimulationOverridesSerializer

    def add_arguments(self, parser):
        parser.add_argument("--spec", type=Path, default=None, help="Generator spec JSON; bundled spec if omitted.")
        parser.add_argument("--train-n", type=_int_list, default=None, help="Comma-separated training sizes.")
        parser.add_argument("--effect", choices=["strong", "weak"], default=None)
        parser.add_argument("--replicates", type=int, default=None)
        parser.add_argument("--n-test", type=int, default=None)
        parser.add_argument("--methods", type=_name_list, default=None,
                            help="Comma-separated subset of policy_tree, q_learning, o_learning.")
        parser.add_argument("--full-scale", action="store_true", help="100 replicates of 50,000 test subjects.")
        parser.add_argument("--long", action="store_true", help="Also write the long-format CSV.")
        parser.add_argument("--out", type=Path, required=True, help="Report directory.")

    def run(self, out, spec=None, train_n=None, effect=None, replicates=None, n_test=None, methods=None,
            full_scale=False, long=False, seed=0, threads=1, overrides=None, **options):
        overrides = overrides or {}
        report, written = simulate(
            out,
            spec=load_spec(spec) if spec is not None else None,
            effect=effect or overrides.get("effect"),
            train_sizes=train_n or overrides.get("train_sizes"),
            n_test=n_test or overrides.get("n_test"),
            replicates=replicates or overrides.get("replicates"),
            methods=methods or overrides.get("methods"),
            full_scale=full_scale,
            forest=overrides.get("forest"),
            policy_split_step=overrides.get("policy_split_step"),
            seed=seed,
            n_jobs=threads,
            long_format=long,
        )
        n_failed = int((report.replicates["status"] == "failed").sum())
        self.success(f"Wrote {len(report.replicates)} method runs ({n_failed} failed) to {written['replicates']}")
