import dataclasses
import logging
from dataclasses import dataclass, field

import numpy as np
from joblib import Parallel, delayed

from eeg.exceptions import EegError, EpochingError, RejectionError
from eeg.io.types import CONDITIONS

logger = logging.getLogger(__name__)

TIE_RTOL = 1e-9
TIE_ATOL = 1e-12


@dataclass(frozen=True, eq=False)
class EpochSet:
    """Fixed-length epochs (epochs x channels x samples) cut from one recording block."""

    epochs: np.ndarray
    channel_names: tuple
    sample_rate: float
    length_s: float
    condition: str = "eyes_open"
    block_index: int = 0
    keep_mask: np.ndarray = None
    per_channel_thresholds: np.ndarray = None
    rejection: dict = field(default_factory=dict)
    subject_id: str = ""

    def __post_init__(self):
        epochs = np.array(self.epochs, dtype=np.float64)
        if epochs.ndim != 3:
            raise EegError("Epochs must be an epochs x channels x samples array.", field="epochs")
        epochs.setflags(write=False)
        object.__setattr__(self, "epochs", epochs)
        object.__setattr__(self, "channel_names", tuple(self.channel_names))
        if epochs.shape[1] != len(self.channel_names):
            raise EegError("Channel names do not match the epoch channel axis.", field="channel_names")
        if self.condition not in CONDITIONS:
            raise EegError(f"Unknown condition {self.condition!r}.", field="condition")

        keep = np.ones(epochs.shape[0], dtype=bool) if self.keep_mask is None else np.array(self.keep_mask, dtype=bool)
        if keep.shape != (epochs.shape[0],):
            raise EegError("keep_mask length must equal the epoch count.", field="keep_mask")
        keep.setflags(write=False)
        object.__setattr__(self, "keep_mask", keep)

        if self.per_channel_thresholds is None:
            thresholds = np.full(epochs.shape[1], np.nan)
        else:
            thresholds = np.array(self.per_channel_thresholds, dtype=np.float64)
        if thresholds.shape != (epochs.shape[1],):
            raise EegError("One threshold per channel is required.", field="per_channel_thresholds")
        thresholds.setflags(write=False)
        object.__setattr__(self, "per_channel_thresholds", thresholds)

    @property
    def n_epochs(self):
        return self.epochs.shape[0]

    @property
    def n_channels(self):
        return self.epochs.shape[1]

    @property
    def n_samples(self):
        return self.epochs.shape[2]

    @property
    def n_rejected(self):
        return int((~self.keep_mask).sum())

    def kept(self):
        return self.epochs[self.keep_mask]

    def replace(self, **changes):
        return dataclasses.replace(self, **changes)

    def pick(self, names):
        index = {name: i for i, name in enumerate(self.channel_names)}
        rows = [index[name] for name in names]
        return self.replace(
            epochs=self.epochs[:, rows, :],
            channel_names=tuple(names),
            per_channel_thresholds=self.per_channel_thresholds[rows],
        )


def segment_epochs(rec, length_s):
    """Cut consecutive non-overlapping epochs; the trailing partial window is dropped."""
    exact = length_s * rec.sample_rate
    samples = int(round(exact))
    if samples <= 0 or not np.isclose(exact, samples, rtol=0, atol=1e-9):
        raise EpochingError(
            f"Epoch length {length_s} s is not a whole number of samples at {rec.sample_rate} Hz.",
            field="length_s",
        )
    n_epochs = rec.n_samples // samples
    if n_epochs == 0:
        raise EpochingError(
            f"Recording of {rec.duration:.3f} s is shorter than one {length_s} s epoch.", field="length_s"
        )
    data = rec.data[:, : n_epochs * samples]
    epochs = data.reshape(rec.n_channels, n_epochs, samples).transpose(1, 0, 2)
    return EpochSet(
        epochs=epochs,
        channel_names=rec.channel_names,
        sample_rate=rec.sample_rate,
        length_s=length_s,
        condition=rec.condition,
        block_index=rec.block_index,
    )


def fold_blocks(n, folds, seed):
    """Seeded shuffle, then contiguous blocks of the shuffled order."""
    order = np.random.default_rng(seed).permutation(n)
    return [np.sort(block) for block in np.array_split(order, folds)]


def _channel_cv_errors(signals, ptp, blocks, grid):
    """Mean CV error per grid point for one channel; NaN where some training fold keeps nothing."""
    errors = np.zeros((len(blocks), len(grid)))
    valid = np.ones(len(grid), dtype=bool)
    everything = np.arange(len(ptp))
    for k, val in enumerate(blocks):
        train = np.setdiff1d(everything, val, assume_unique=True)
        order = train[np.argsort(ptp[train], kind="stable")]
        sorted_ptp = ptp[order]
        running = np.cumsum(signals[order], axis=0)
        target = np.median(signals[val], axis=0)
        counts = np.searchsorted(sorted_ptp, grid, side="right")
        for g, count in enumerate(counts):
            if count == 0:
                valid[g] = False
                continue
            mean = running[count - 1] / count
            errors[k, g] = np.sqrt(np.mean((mean - target) ** 2))
    result = errors.mean(axis=0)
    result[~valid] = np.nan
    return result


def _pick_threshold(errors, grid):
    best = np.nanmin(errors)
    tied = np.isclose(errors, best, rtol=TIE_RTOL, atol=TIE_ATOL) & ~np.isnan(errors)
    # Ties go to the largest threshold so that the least data is rejected.
    return float(grid[np.flatnonzero(tied)[-1]])


def reject_epochs(es, folds, threshold_grid, seed=0, channel_fraction=0.1, n_jobs=1):
    """Learn a peak-to-peak threshold per channel by K-fold CV and mask bad epochs.

    An epoch is masked when more than ``channel_fraction`` of the channels exceed
    their learned threshold.
    """
    grid = np.asarray(threshold_grid, dtype=np.float64)
    if grid.size == 0:
        raise RejectionError("Threshold grid is empty.", field="threshold_grid")
    if np.any(np.diff(grid) <= 0):
        raise RejectionError("Threshold grid must be sorted ascending without repeats.", field="threshold_grid")
    if folds < 2 or es.n_epochs < 2 * folds:
        raise RejectionError(
            f"{es.n_epochs} epochs are too few for {folds}-fold threshold learning.", field="folds"
        )

    blocks = fold_blocks(es.n_epochs, folds, seed)
    ptp = np.ptp(es.epochs, axis=2)
    errors = Parallel(n_jobs=n_jobs, prefer="threads")(
        delayed(_channel_cv_errors)(es.epochs[:, c, :], ptp[:, c], blocks, grid)
        for c in range(es.n_channels)
    )

    thresholds = np.empty(es.n_channels)
    skipped = {}
    for c, channel_errors in enumerate(errors):
        name = es.channel_names[c]
        degenerate = grid[np.isnan(channel_errors)]
        if degenerate.size == len(grid):
            raise RejectionError(
                f"No threshold keeps epochs on every training fold for channel {name}.", field="threshold_grid"
            )
        if degenerate.size:
            skipped[name] = degenerate.tolist()
            logger.warning("Channel %s: skipped %d grid points with empty training folds", name, degenerate.size)
        thresholds[c] = _pick_threshold(channel_errors, grid)
        logger.debug("Channel %s: threshold %.3f uV", name, thresholds[c])

    exceed = ptp > thresholds[np.newaxis, :]
    keep = exceed.mean(axis=1) <= channel_fraction
    logger.info("Rejected %d of %d epochs (block %d)", int((~keep).sum()), es.n_epochs, es.block_index)
    rejection = {
        "folds": folds,
        "seed": seed,
        "fold_assignment": "seeded shuffle, contiguous blocks",
        "channel_fraction": channel_fraction,
        "threshold_grid": grid.tolist(),
        "skipped_grid_points": skipped,
    }
    return es.replace(keep_mask=keep & es.keep_mask, per_channel_thresholds=thresholds, rejection=rejection)


def rereference_common_average(es):
    if es.n_channels < 2:
        raise EegError("Common-average reference needs at least 2 channels.", field="channels")
    return es.replace(epochs=es.epochs - es.epochs.mean(axis=1, keepdims=True))
