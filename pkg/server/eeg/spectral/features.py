import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import pandas as pd
from django.conf import settings
from joblib import Parallel, delayed

from eeg.exceptions import SpectralError
from eeg.io.epochs import load_epochs
from eeg.io.types import FeatureMatrix
from eeg.spectral.psd import multitaper_psd_array, relative_band_array
from eeg.spectral.tapers import dpss_tapers

logger = logging.getLogger(__name__)

CONDITION_TAGS = {"eyes_open": "open", "eyes_closed": "close"}
AVERAGING = ("psd", "ratio")


@dataclass(frozen=True)
class SpectralParams:
    time_bandwidth: float = 4.0
    n_tapers: int = 7
    bands: tuple = (("theta", 4.0, 7.0), ("alpha", 8.0, 12.0))
    total: tuple = (1.0, 50.0)
    average: str = "psd"
    open_blocks: tuple = (1, 4)
    closed_blocks: tuple = (2, 3)

    def __post_init__(self):
        if self.average not in AVERAGING:
            raise SpectralError(f"average must be one of {AVERAGING}.", field="average")
        if set(self.open_blocks) & set(self.closed_blocks):
            raise SpectralError("A block cannot be both eyes-open and eyes-closed.", field="open_blocks")

    def block_condition(self, block_index):
        """Condition the protocol assigns to a block, or None for blocks outside it."""
        if block_index in self.open_blocks:
            return "eyes_open"
        if block_index in self.closed_blocks:
            return "eyes_closed"
        return None

    @classmethod
    def from_settings(cls, overrides=None):
        cfg = {**settings.EEG_SPECTRAL, **(overrides or {})}
        return cls(
            time_bandwidth=cfg["TIME_BANDWIDTH"],
            n_tapers=cfg["N_TAPERS"],
            bands=tuple((name, float(lo), float(hi)) for name, (lo, hi) in cfg["BANDS"].items()),
            total=tuple(cfg["TOTAL_BAND"]),
            average=cfg["AVERAGE"],
            open_blocks=tuple(cfg["OPEN_BLOCKS"]),
            closed_blocks=tuple(cfg["CLOSED_BLOCKS"]),
        )


@dataclass(frozen=True, eq=False)
class BandFeatureRow:
    subject_id: str
    values: pd.Series

    def __len__(self):
        return len(self.values)


def feature_name(channel, condition, band):
    return f"{channel.lower()}.{CONDITION_TAGS[condition]}.{band}"


def feature_names(channels, bands=("theta", "alpha")):
    """Channel-major, then eyes-open before eyes-closed, then bands in the given order."""
    return [feature_name(ch, cond, band) for ch in channels for cond in CONDITION_TAGS for band in bands]


def _check_block_conditions(epoch_sets, params, subject_id):
    for es in epoch_sets:
        expected = params.block_condition(es.block_index)
        if expected is not None and es.condition != expected:
            raise SpectralError(
                f"Subject {subject_id or '?'} block {es.block_index} is labelled {es.condition}, "
                f"but the protocol records {expected} in that block.",
                field="condition",
            )


def _pooled_epochs(epoch_sets, condition, channels):
    blocks = [es.pick(channels) for es in epoch_sets if es.condition == condition]
    if not blocks:
        raise SpectralError(f"No {condition} recordings were supplied.", field="condition")
    rates = {es.sample_rate for es in blocks}
    lengths = {es.n_samples for es in blocks}
    if len(rates) > 1 or len(lengths) > 1:
        raise SpectralError(f"{condition} blocks differ in sample rate or epoch length.", field="epoch_sets")
    kept = [es.kept() for es in blocks]
    pooled = np.concatenate(kept, axis=0)
    if pooled.shape[0] == 0:
        raise SpectralError(f"No {condition} epochs survived rejection.", field="keep_mask")
    return pooled, rates.pop()


def _relative_powers(pooled, sample_rate, params):
    """(channels, bands) relative power for one condition."""
    tapers = dpss_tapers(pooled.shape[-1], params.time_bandwidth, params.n_tapers)
    spectra = [multitaper_psd_array(epoch, tapers, sample_rate) for epoch in pooled]
    freqs = spectra[0][0]
    psd = np.stack([p for _, p in spectra])
    if params.average == "psd":
        psd = psd.mean(axis=0)
    values = np.stack(
        [relative_band_array(freqs, psd, (lo, hi), params.total) for _, lo, hi in params.bands], axis=-1
    )
    if params.average == "ratio":
        values = values.mean(axis=0)
    return values


def extract_features(epoch_sets, channels, params=None, subject_id=""):
    """Relative theta and alpha power per channel and condition, eyes-open and eyes-closed blocks pooled."""
    params = params or SpectralParams()
    channels = list(channels)
    _check_block_conditions(epoch_sets, params, subject_id)
    per_condition = {}
    for condition in CONDITION_TAGS:
        pooled, rate = _pooled_epochs(epoch_sets, condition, channels)
        per_condition[condition] = _relative_powers(pooled, rate, params)
        logger.debug("Subject %s %s: %d epochs pooled", subject_id, condition, pooled.shape[0])

    band_names = [name for name, _, _ in params.bands]
    names = feature_names(channels, band_names)
    values = np.stack([per_condition[cond] for cond in CONDITION_TAGS], axis=1).reshape(-1)
    return BandFeatureRow(subject_id=str(subject_id), values=pd.Series(values, index=names))


def feature_frame(rows):
    """One row per subject: subject_id followed by the band-power columns."""
    frame = pd.DataFrame([row.values for row in rows]).reset_index(drop=True)
    frame.insert(0, "subject_id", [row.subject_id for row in rows])
    return frame


def feature_correlation(features):
    """Pearson correlation between covariate columns of a FeatureMatrix or a feature frame."""
    if isinstance(features, FeatureMatrix):
        frame = pd.DataFrame(features.X, columns=list(features.column_names))
    else:
        frame = features.drop(columns=[c for c in ("subject_id", "W", "Y") if c in features.columns])
    return frame.astype(np.float64).corr()


def features_from_directory(in_dir, channels, params=None, n_jobs=1):
    """Band-power frame for every subject directory of preprocessed epoch archives."""
    in_dir = Path(in_dir)
    subjects = {p.name: sorted(p.glob("*.npz")) for p in sorted(in_dir.iterdir()) if p.is_dir()}
    subjects = {name: files for name, files in subjects.items() if files}
    if not subjects:
        raise SpectralError(f"No epoch archives found under {in_dir}.", field="in")

    def one(subject, files):
        return extract_features([load_epochs(f) for f in files], channels, params=params, subject_id=subject)

    rows = Parallel(n_jobs=n_jobs, prefer="threads")(delayed(one)(s, f) for s, f in subjects.items())
    logger.info("Extracted %d band-power features for %d subjects", len(rows[0]), len(rows))
    return feature_frame(rows)


def merge_clinical(frame, clinical):
    """Inner-join band-power features with a clinical table holding subject_id, W, Y and covariates."""
    clinical = clinical.copy()
    clinical["subject_id"] = clinical["subject_id"].astype(str)
    merged = clinical.merge(frame, on="subject_id", how="inner", validate="one_to_one")
    missing = sorted(set(frame["subject_id"]) - set(merged["subject_id"]))
    if missing:
        logger.warning("%d subjects have EEG features but no clinical row: %s", len(missing), ", ".join(missing))
    return merged
