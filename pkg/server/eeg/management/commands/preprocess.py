from pathlib import Path

from eeg.io.montage import common_channels
from eeg.preprocess.pipeline import PreprocessParams, preprocess_directory
from eeg.preprocess.serializers import SiteConfigSerializer
from utils.commands import PipelineCommand
from utils.utils import load_json


class Command(PipelineCommand):
    help = "Resample, filter, repair, epoch, reject and re-reference raw EEG recordings."

    def add_arguments(self, parser):
        parser.add_argument("--in", dest="in_dir", type=Path, required=True, help="Directory of raw recordings.")
        parser.add_argument("--out", dest="out_dir", type=Path, required=True, help="Directory for epoch archives.")
        parser.add_argument("--site-config", type=Path, default=None, help="Per-site overrides (JSON).")
        parser.add_argument("--all-channels", action="store_true", help="Skip the common-channel selection.")

    def run(self, in_dir, out_dir, site_config=None, all_channels=False, seed=None, threads=1, overrides=None,
            **options):
        site = dict(overrides or {})
        if site_config is not None:
            site.update(load_json(site_config))
        serializer = SiteConfigSerializer(data=site)
        serializer.is_valid(raise_exception=True)

        params = PreprocessParams.from_settings(serializer.to_settings(), seed=seed)
        common = None if all_channels else common_channels()
        outputs = preprocess_directory(in_dir, out_dir, params=params, common=common, n_jobs=threads)
        self.success(f"Preprocessed {len(outputs)} recordings into {out_dir}")
