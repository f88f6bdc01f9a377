from pathlib import Path

from pipeline.config import PipelineConfig
from pipeline.exceptions import StageError
from pipeline.runner import run_pipeline
from pipeline.serializers import ALL_STAGES
from utils.commands import PipelineCommand, StageFailed


def _stage_list(text):
    return [part.strip() for part in text.split(",") if part.strip()]


class Command(PipelineCommand):
    help = "Run the full pipeline (or a subset of its stages) from one JSON config."

    def add_arguments(self, parser):
        parser.add_argument("--out", default=None, help="Run directory; PIPELINE_OUTPUT_DIR if omitted.")
        parser.add_argument("--stages", type=_stage_list, default=None,
                            help=f"Comma-separated subset of {', '.join(ALL_STAGES)}.")
        parser.add_argument("--raw", type=Path, default=None, help="Directory of raw recordings.")
        parser.add_argument("--clinical", type=Path, default=None, help="Clinical CSV with subject_id, W, Y.")
        parser.add_argument("--features", type=Path, default=None, help="Existing features table.")
        parser.add_argument("--sim-spec", type=Path, default=None, help="Generator spec for the simulate stage.")
        parser.add_argument("--policy-method", default=None)
        parser.add_argument("--propensity", type=float, default=None, help="Known randomization probability.")
        parser.add_argument("--tune", action="store_const", const=True, default=None,
                            help="Pick mtry, min_node_size and subsample_ratio by R-loss before the final fit.")

    def handle(self, *args, **options):
        # Только явно переданные --seed/--threads перекрывают значения из конфига.
        self._explicit = {"seed": options.get("seed"), "threads": options.get("threads")}
        return super().handle(*args, **options)

    def run(self, out=None, stages=None, raw=None, clinical=None, features=None, sim_spec=None,
            policy_method=None, propensity=None, tune=None, overrides=None, **options):
        flags = {
            "out_dir": out,
            "stages": stages,
            "raw_dir": raw,
            "clinical": clinical,
            "features": features,
            "sim_spec": sim_spec,
            "policy_method": policy_method,
            "propensity": propensity,
            "tune": tune,
            **self._explicit,
        }
        cfg = PipelineConfig.from_payload(overrides, **{k: str(v) if isinstance(v, Path) else v
                                                        for k, v in flags.items()})
        try:
            manifest = run_pipeline(cfg)
        except StageError as exc:
            raise StageFailed(str(exc)) from exc
        counts = {}
        for record in manifest["stages"]:
            counts[record["status"]] = counts.get(record["status"], 0) + 1
        summary = ", ".join(f"{n} {status}" for status, n in sorted(counts.items()))
        self.success(f"Pipeline finished in {cfg.out_dir} ({summary})")
