import logging

import numpy as np
from sklearn.model_selection import train_test_split

from pipeline.exceptions import ConfigError, SingleClassError

logger = logging.getLogger(__name__)


def split_train_test(fm, train_fraction, seed=0):
    """Row indices of a random train/test partition, stratified by treatment when both arms allow it."""
    if not 0 < train_fraction < 1:
        raise ConfigError("train_fraction must lie strictly between 0 and 1.", field="train_fraction")
    rows = np.arange(fm.n)
    counts = np.bincount(fm.W, minlength=2)
    stratify = fm.W if counts.min() >= 2 else None
    if stratify is None:
        logger.warning("Treatment arm too small to stratify the split (counts %s)", counts.tolist())
    try:
        train, test = train_test_split(rows, train_size=train_fraction, random_state=seed, stratify=stratify)
    except ValueError as exc:
        raise ConfigError(f"Cannot split {fm.n} subjects: {exc}", field="train_fraction") from exc
    return np.sort(train), np.sort(test)


def is_binary(values):
    return bool(np.isin(values, (0.0, 1.0)).all())


def upsample_rows(Y, seed=0):
    """Row indices that resample the minority outcome class with replacement up to the majority count."""
    Y = np.asarray(Y)
    if not is_binary(Y):
        raise ConfigError("Upsampling needs a binary outcome.", field="Y")
    classes, counts = np.unique(Y, return_counts=True)
    if classes.size < 2:
        raise SingleClassError("The outcome has a single class.", field="Y")
    rows = np.arange(len(Y))
    if counts[0] == counts[1]:
        return rows
    minority = classes[counts.argmin()]
    rng = np.random.default_rng(seed)
    extra = rng.choice(np.flatnonzero(Y == minority), size=counts.max() - counts.min(), replace=True)
    logger.info("Upsampled outcome class %g by %d rows", minority, len(extra))
    return np.concatenate([rows, np.sort(extra)])


def upsample_minority(fm, seed=0):
    """Training matrix with the minority outcome class resampled until both classes are equally frequent."""
    rows = upsample_rows(fm.Y, seed=seed)
    return fm if len(rows) == fm.n else fm.subset(rows)
