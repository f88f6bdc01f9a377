from pathlib import Path

from django.conf import settings

from causal.forest import load_model, variable_importance
from utils.commands import PipelineCommand


class Command(PipelineCommand):
    help = "Depth-weighted split-frequency importance of a fitted forest."

    def add_arguments(self, parser):
        parser.add_argument("--model", type=Path, required=True)
        parser.add_argument("--max-depth", type=int, default=None)
        parser.add_argument("--top", type=int, default=10)
        parser.add_argument("--out", type=Path, default=None, help="CSV of all ranked features.")

    def run(self, model, max_depth=None, top=10, out=None, **options):
        max_depth = max_depth or settings.CAUSAL_FOREST["IMPORTANCE_MAX_DEPTH"]
        report = variable_importance(load_model(model), max_depth=max_depth)
        if out is not None:
            out.parent.mkdir(parents=True, exist_ok=True)
            report.to_frame().to_csv(out, index=False, float_format="%.17g")
        for name, value in report.top(top).items():
            self.stdout.write(f"{name}\t{value:.6f}")
        if report.coverage < 1:
            self.stdout.write(f"coverage\t{report.coverage:.6f}")
