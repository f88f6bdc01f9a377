import dataclasses
import logging
import math
from dataclasses import dataclass

import mne
import numpy as np
import pandas as pd
from django.conf import settings
from mne.channels.interpolation import _make_interpolation_matrix
from scipy import signal

from eeg.exceptions import EegError, MissingPositionError, UnknownChannelError

logger = logging.getLogger(__name__)

MAD_SCALE = 1.4826
CRITERIA = ("deviation", "correlation", "predictability", "noisiness")
# Unit-sphere positions are scaled to a typical head before handing them to MNE.
HEAD_RADIUS_M = 0.095


@dataclass(frozen=True)
class CriteriaThresholds:
    deviation_z: float = 5.0
    min_correlation: float = 0.4
    predictability_correlation: float = 0.75
    noisiness_z: float = 5.0
    correlation_window_s: float = 1.0
    noise_split_hz: float = 40.0
    ransac_trials: int = 50
    ransac_fraction: float = 0.25
    seed: int = 0

    @classmethod
    def from_settings(cls, overrides=None, seed=0):
        cfg = {**settings.EEG_PREPROCESS, **(overrides or {})}
        return cls(
            deviation_z=cfg["DEVIATION_Z"],
            min_correlation=cfg["MIN_CORRELATION"],
            predictability_correlation=cfg["PREDICTABILITY_CORRELATION"],
            noisiness_z=cfg["NOISINESS_Z"],
            correlation_window_s=cfg["CORRELATION_WINDOW_S"],
            noise_split_hz=cfg["NOISE_SPLIT_HZ"],
            ransac_trials=cfg["RANSAC_TRIALS"],
            ransac_fraction=cfg["RANSAC_FRACTION"],
            seed=seed,
        )


@dataclass(frozen=True, eq=False)
class BadChannelReport:
    """Per-channel criterion scores, keyed and sorted by channel name."""

    scores: pd.DataFrame
    flagged: frozenset
    reasons: dict
    thresholds: CriteriaThresholds

    def to_dict(self):
        scores = self.scores.astype(object).where(self.scores.notna(), None)
        return {
            "flagged": sorted(self.flagged),
            "reasons": {name: list(self.reasons[name]) for name in sorted(self.reasons)},
            "scores": scores.to_dict(orient="index"),
            "thresholds": dataclasses.asdict(self.thresholds),
        }


def robust_z(values):
    values = np.asarray(values, dtype=np.float64)
    center = np.median(values)
    scale = MAD_SCALE * np.median(np.abs(values - center))
    if scale == 0:
        scale = np.std(values)
    if scale == 0:
        return np.zeros_like(values)
    return (values - center) / scale


def _robust_amplitude(data):
    center = np.median(data, axis=1, keepdims=True)
    return MAD_SCALE * np.median(np.abs(data - center), axis=1)


def _windowed_max_correlation(data, window):
    n_channels, n_samples = data.shape
    n_windows = max(n_samples // window, 1)
    window = n_samples if n_samples < window else window
    segments = data[:, : n_windows * window].reshape(n_channels, n_windows, window).transpose(1, 0, 2)
    centered = segments - segments.mean(axis=2, keepdims=True)
    norms = np.linalg.norm(centered, axis=2, keepdims=True)
    with np.errstate(invalid="ignore", divide="ignore"):
        unit = np.where(norms > 0, centered / norms, 0.0)
    corr = np.abs(np.einsum("wcs,wds->wcd", unit, unit))
    idx = np.arange(n_channels)
    corr[:, idx, idx] = 0.0
    return corr.max(axis=2).min(axis=0)


def _noise_ratio(data, sample_rate, split_hz):
    nperseg = int(min(data.shape[1], 2 * sample_rate))
    freqs, power = signal.welch(data, fs=sample_rate, nperseg=nperseg, axis=1)
    high = power[:, freqs > split_hz].sum(axis=1)
    low = power[:, (freqs > 0) & (freqs <= split_hz)].sum(axis=1)
    with np.errstate(invalid="ignore", divide="ignore"):
        ratio = np.where(low > 0, high / low, 0.0)
    return ratio


def _correlation(a, b):
    a = a - a.mean(axis=-1, keepdims=True)
    b = b - b.mean(axis=-1, keepdims=True)
    denom = np.linalg.norm(a, axis=-1) * np.linalg.norm(b, axis=-1)
    with np.errstate(invalid="ignore", divide="ignore"):
        return np.where(denom > 0, (a * b).sum(axis=-1) / denom, 0.0)


def _predictability(rec, pool, cfg):
    """Median correlation between each channel and its spline prediction from random channel subsets."""
    names = sorted(rec.channel_names)
    if not rec.has_positions():
        logger.warning("Predictability criterion skipped: channel positions are missing.")
        return {name: np.nan for name in names}

    data = {name: row for name, row in zip(rec.channel_names, rec.data)}
    pool = sorted(pool)
    subset_size = max(3, int(math.ceil(cfg.ransac_fraction * len(names))))
    if subset_size >= len(pool):
        logger.warning("Predictability criterion skipped: only %d usable channels.", len(pool))
        return {name: np.nan for name in names}

    rng = np.random.default_rng(cfg.seed)
    all_pos = rec.positions(names)
    all_data = np.array([data[name] for name in names])
    trials = np.full((cfg.ransac_trials, len(names)), np.nan)
    for trial in range(cfg.ransac_trials):
        subset = sorted(rng.choice(pool, size=subset_size, replace=False))
        weights = _make_interpolation_matrix(rec.positions(subset), all_pos)
        predicted = weights @ np.array([data[name] for name in subset])
        corr = _correlation(all_data, predicted)
        outside = np.array([name not in subset for name in names])
        trials[trial, outside] = corr[outside]
    with np.errstate(all="ignore"):
        medians = np.nanmedian(trials, axis=0)
    return dict(zip(names, medians))


def detect_bad_channels(rec, cfg=None):
    """Deviation, correlation, predictability and noisiness criteria; report is keyed by channel name."""
    cfg = cfg or CriteriaThresholds()
    if rec.n_channels < 4:
        raise EegError("Bad-channel detection needs at least 4 channels.", field="channels")

    data = rec.data
    flat = np.ptp(data, axis=1) == 0
    deviation = robust_z(_robust_amplitude(data))
    window = max(int(round(cfg.correlation_window_s * rec.sample_rate)), 2)
    min_corr = _windowed_max_correlation(data, window)
    noisiness = robust_z(_noise_ratio(data, rec.sample_rate, cfg.noise_split_hz))

    fired = {}
    for i, name in enumerate(rec.channel_names):
        hits = []
        if flat[i] or abs(deviation[i]) > cfg.deviation_z:
            hits.append("deviation")
        if min_corr[i] < cfg.min_correlation:
            hits.append("correlation")
        if noisiness[i] > cfg.noisiness_z:
            hits.append("noisiness")
        fired[name] = hits

    pool = [name for name, hits in fired.items() if not hits]
    predictability = _predictability(rec, pool, cfg)
    for name in rec.channel_names:
        score = predictability[name]
        if not np.isnan(score) and score < cfg.predictability_correlation:
            fired[name].append("predictability")

    scores = pd.DataFrame(
        {
            "deviation_z": deviation,
            "min_correlation": min_corr,
            "predictability": [predictability[name] for name in rec.channel_names],
            "noisiness_z": noisiness,
        },
        index=pd.Index(rec.channel_names, name="channel"),
    ).sort_index()
    reasons = {name: tuple(hits) for name, hits in fired.items() if hits}
    if reasons:
        logger.info("Flagged %d bad channels: %s", len(reasons), ", ".join(sorted(reasons)))
    return BadChannelReport(scores=scores, flagged=frozenset(reasons), reasons=reasons, thresholds=cfg)


def interpolate_bad_channels(rec, report):
    """Replace flagged channels by MNE spherical-spline interpolation from the good ones."""
    bad = [name for name in rec.channel_names if name in report.flagged]
    if not bad:
        return rec
    good = [name for name in rec.channel_names if name not in report.flagged]
    if not good:
        raise EegError("Every channel is flagged; nothing to interpolate from.", field="flagged")
    missing = [ch.name for ch in rec.channels if ch.position is None]
    if missing:
        raise MissingPositionError(f"No positions for channels: {', '.join(missing)}.", field="position")

    names = list(rec.channel_names)
    raw = mne.io.RawArray(np.array(rec.data, dtype=np.float64),
                          mne.create_info(names, rec.sample_rate, "eeg"), verbose=False)
    positions = HEAD_RADIUS_M * rec.positions(names)
    montage = mne.channels.make_dig_montage(ch_pos=dict(zip(names, positions)), coord_frame="head")
    raw.set_montage(montage, verbose=False)
    raw.info["bads"] = bad
    # позиции на сфере с центром в нуле
    raw.interpolate_bads(reset_bads=True, origin=(0.0, 0.0, 0.0), verbose=False)
    data = raw.get_data()
    logger.info("Interpolated %d channels from %d good channels", len(bad), len(good))
    return rec.replace(data=data)


def select_common_channels(obj, wanted):
    """Keep exactly `wanted`, in that order. Works on a Recording or an EpochSet."""
    wanted = list(wanted)
    available = set(obj.channel_names)
    missing = [name for name in wanted if name not in available]
    if missing:
        raise UnknownChannelError(f"Channels not in recording: {', '.join(missing)}.", field="wanted")
    return obj.pick(wanted)
