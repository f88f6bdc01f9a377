from pathlib import Path

import pandas as pd

from eeg.io.features import schema_path_for
from eeg.io.montage import common_channels
from eeg.spectral.features import SpectralParams, features_from_directory, merge_clinical
from utils.commands import PipelineCommand


class Command(PipelineCommand):
    help = "Multitaper relative theta/alpha band power for every preprocessed subject."

    def add_arguments(self, parser):
        parser.add_argument("--in", dest="in_dir", type=Path, required=True, help="Preprocessed directory.")
        parser.add_argument("--out", type=Path, required=True, help="Output feature CSV.")
        parser.add_argument("--clinical", type=Path, default=None,
                            help="CSV with subject_id, W, Y and clinical covariates to join.")
        parser.add_argument("--average", choices=["psd", "ratio"], default=None,
                            help="Average PSDs before the ratio (default) or ratios per epoch.")

    def run(self, in_dir, out, clinical=None, average=None, threads=1, overrides=None, **options):
        spectral = {key.upper(): value for key, value in (overrides or {}).items()}
        if average:
            spectral["AVERAGE"] = average
        params = SpectralParams.from_settings(spectral)
        frame = features_from_directory(in_dir, common_channels(), params=params, n_jobs=threads)

        if clinical is not None:
            table = pd.read_csv(clinical, dtype={"subject_id": str})
            frame = merge_clinical(frame, table)
            schema = schema_path_for(clinical)
            if schema.exists():
                schema_path_for(out).parent.mkdir(parents=True, exist_ok=True)
                schema_path_for(out).write_text(schema.read_text(encoding="utf-8"), encoding="utf-8")

        out.parent.mkdir(parents=True, exist_ok=True)
        frame.to_csv(out, index=False, float_format="%.17g")
        self.success(f"Wrote {len(frame)} subjects x {frame.shape[1] - 1} columns to {out}")
