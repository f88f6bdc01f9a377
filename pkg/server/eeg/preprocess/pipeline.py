import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from django.conf import settings
from joblib import Parallel, delayed

from eeg.exceptions import EpochingError
from eeg.io.epochs import save_epochs
from eeg.io.recording import discover_recordings, load_recording
from eeg.preprocess.channels import (
    CriteriaThresholds, detect_bad_channels, interpolate_bad_channels, select_common_channels,
)
from eeg.preprocess.epochs import reject_epochs, rereference_common_average, segment_epochs
from eeg.preprocess.filters import apply_filters, resample
from utils.utils import dump_json

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class PreprocessParams:
    target_rate: float = 250.0
    notch: float | None = 60.0
    notch_width: float = 2.0
    high_pass: float = 1.0
    low_pass: float = 50.0
    transition: float = 1.0
    epoch_length_s: float = 2.0
    folds: int = 5
    threshold_grid: tuple = (20.0, 40.0, 60.0, 80.0, 100.0, 125.0, 150.0, 200.0, 250.0, 300.0, 400.0, 500.0)
    channel_fraction: float = 0.1
    criteria: CriteriaThresholds = CriteriaThresholds()
    seed: int = 0

    @classmethod
    def from_settings(cls, overrides=None, seed=0):
        cfg = {**settings.EEG_PREPROCESS, **(overrides or {})}
        return cls(
            target_rate=cfg["TARGET_RATE_HZ"],
            notch=cfg["NOTCH_HZ"],
            notch_width=cfg["NOTCH_WIDTH_HZ"],
            high_pass=cfg["HIGH_PASS_HZ"],
            low_pass=cfg["LOW_PASS_HZ"],
            transition=cfg["TRANSITION_HZ"],
            epoch_length_s=cfg["EPOCH_LENGTH_S"],
            folds=cfg["REJECTION_FOLDS"],
            threshold_grid=tuple(cfg["REJECTION_GRID_UV"]),
            channel_fraction=cfg["REJECTION_CHANNEL_FRACTION"],
            criteria=CriteriaThresholds.from_settings(overrides, seed=seed),
            seed=seed,
        )


@dataclass(frozen=True, eq=False)
class QcReport:
    """What preprocessing did to one recording block."""

    condition: str
    block_index: int
    bad_channels: dict
    thresholds: dict
    n_epochs: int
    n_rejected: int
    channel_fraction: float
    rms_before: dict
    rms_after: dict
    evoked_rms_before: dict
    evoked_rms_after: dict

    def to_dict(self):
        return {
            "condition": self.condition,
            "block_index": self.block_index,
            "bad_channels": self.bad_channels,
            "thresholds_uv": self.thresholds,
            "n_epochs": self.n_epochs,
            "n_rejected": self.n_rejected,
            "rejection_channel_fraction": self.channel_fraction,
            "rms_before": self.rms_before,
            "rms_after": self.rms_after,
            "epoch_average_rms_before": self.evoked_rms_before,
            "epoch_average_rms_after": self.evoked_rms_after,
        }


def _rms(rows):
    return np.sqrt(np.mean(np.square(rows), axis=-1))


def _by_name(names, values):
    return {name: float(v) for name, v in zip(names, values)}


def preprocess_recording(rec, params=None, common=None, n_jobs=1):
    """Resample, filter, repair channels, epoch, reject, re-reference and keep the common channels.

    Returns the EpochSet and its QcReport.
    """
    params = params or PreprocessParams()
    raw = rec

    rec = resample(rec, params.target_rate)
    rec = apply_filters(rec, params.notch, params.high_pass, params.low_pass,
                        transition=params.transition, notch_width=params.notch_width)
    report = detect_bad_channels(rec, params.criteria)
    rec = interpolate_bad_channels(rec, report)

    es = segment_epochs(rec, params.epoch_length_s)
    es = reject_epochs(es, params.folds, params.threshold_grid, seed=params.seed,
                       channel_fraction=params.channel_fraction, n_jobs=n_jobs)
    es = rereference_common_average(es)
    if common is not None:
        es = select_common_channels(es, common)
        raw = select_common_channels(raw, common)

    try:
        raw_epochs = segment_epochs(raw, params.epoch_length_s)
    except EpochingError:
        raw_epochs = None
    kept = es.kept()
    qc = QcReport(
        condition=es.condition,
        block_index=es.block_index,
        bad_channels=report.to_dict(),
        thresholds=_by_name(es.channel_names, es.per_channel_thresholds),
        n_epochs=es.n_epochs,
        n_rejected=es.n_rejected,
        channel_fraction=params.channel_fraction,
        rms_before=_by_name(raw.channel_names, _rms(raw.data)),
        rms_after=(
            _by_name(es.channel_names, _rms(kept.transpose(1, 0, 2).reshape(es.n_channels, -1)))
            if len(kept) else {}
        ),
        evoked_rms_before=(
            _by_name(raw.channel_names, _rms(raw_epochs.epochs.mean(axis=0))) if raw_epochs is not None else {}
        ),
        evoked_rms_after=_by_name(es.channel_names, _rms(kept.mean(axis=0))) if len(kept) else {},
    )
    logger.info(
        "Preprocessed %s block %d: %d bad channels, %d/%d epochs rejected",
        es.condition, es.block_index, len(report.flagged), es.n_rejected, es.n_epochs,
    )
    return es, qc


def _output_stem(es):
    return f"{es.condition}_block{es.block_index}"


def _preprocess_file(subject, path, out_dir, params, common):
    rec = load_recording(path)
    es, qc = preprocess_recording(rec, params=params, common=common)
    es = es.replace(subject_id=subject)
    target = Path(out_dir) / subject
    save_epochs(es, target / f"{_output_stem(es)}.npz")
    dump_json({"subject_id": subject, "source": str(path), **qc.to_dict()}, target / f"{_output_stem(es)}.qc.json")
    return target / f"{_output_stem(es)}.npz"


def preprocess_directory(in_dir, out_dir, params=None, common=None, n_jobs=1):
    """Preprocess every recording under in_dir; writes <out>/<subject>/<condition>_block<k>.npz plus QC JSON."""
    params = params or PreprocessParams()
    subjects = discover_recordings(in_dir)
    jobs = [(subject, path) for subject, paths in subjects.items() for path in paths]
    outputs = Parallel(n_jobs=n_jobs, prefer="threads")(
        delayed(_preprocess_file)(subject, path, out_dir, params, common) for subject, path in jobs
    )
    logger.info("Preprocessed %d recordings of %d subjects", len(outputs), len(subjects))
    return outputs
