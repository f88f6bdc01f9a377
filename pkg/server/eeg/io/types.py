import dataclasses
from dataclasses import dataclass

import numpy as np
import pandas as pd

from eeg.exceptions import EegError, DuplicateChannelError, TreatmentDomainError


CONDITIONS = ("eyes_open", "eyes_closed")
COLUMN_KINDS = ("continuous", "categorical")


def _readonly(array, dtype):
    array = np.array(array, dtype=dtype)
    array.setflags(write=False)
    return array


def _check_unique(names, field):
    seen = set()
    for name in names:
        if name in seen:
            raise DuplicateChannelError(f"Duplicate name {name!r} in {field}.", field=field)
        seen.add(name)


@dataclass(frozen=True)
class Channel:
    name: str
    position: tuple | None = None

    def __post_init__(self):
        if self.position is not None:
            position = tuple(float(v) for v in self.position)
            if len(position) != 3:
                raise EegError(f"Channel {self.name!r} position must have 3 coordinates.", field="position")
            if abs(np.linalg.norm(position) - 1.0) > 1e-6:
                raise EegError(f"Channel {self.name!r} position is not on the unit sphere.", field="position")
            object.__setattr__(self, "position", position)


@dataclass(frozen=True, eq=False)
class Recording:
    """Multi-channel EEG block, channels x samples, microvolts."""

    channels: tuple
    sample_rate: float
    data: np.ndarray
    condition: str = "eyes_open"
    block_index: int = 0

    def __post_init__(self):
        channels = tuple(ch if isinstance(ch, Channel) else Channel(ch) for ch in self.channels)
        object.__setattr__(self, "channels", channels)
        data = _readonly(self.data, np.float64)
        if data.ndim != 2:
            raise EegError("Recording data must be a channels x samples matrix.", field="data")
        object.__setattr__(self, "data", data)

        if data.shape[0] != len(channels):
            raise EegError(
                f"Recording has {len(channels)} channels but {data.shape[0]} data rows.", field="data"
            )
        if not self.sample_rate > 0:
            raise EegError("Sample rate must be positive.", field="sample_rate")
        if self.condition not in CONDITIONS:
            raise EegError(f"Unknown condition {self.condition!r}.", field="condition")
        _check_unique([ch.name for ch in channels], "channels")

    @property
    def channel_names(self):
        return [ch.name for ch in self.channels]

    @property
    def n_channels(self):
        return self.data.shape[0]

    @property
    def n_samples(self):
        return self.data.shape[1]

    @property
    def duration(self):
        return self.n_samples / self.sample_rate

    def has_positions(self, names=None):
        wanted = set(self.channel_names if names is None else names)
        return all(ch.position is not None for ch in self.channels if ch.name in wanted)

    def positions(self, names=None):
        by_name = {ch.name: ch for ch in self.channels}
        names = self.channel_names if names is None else list(names)
        return np.array([by_name[name].position for name in names], dtype=np.float64)

    def replace(self, **changes):
        return dataclasses.replace(self, **changes)

    def pick(self, names):
        index = {name: i for i, name in enumerate(self.channel_names)}
        rows = [index[name] for name in names]
        return self.replace(channels=tuple(self.channels[i] for i in rows), data=self.data[rows])


@dataclass(frozen=True, eq=False)
class FeatureMatrix:
    """Covariates X, treatment W and outcome Y, one row per subject."""

    subject_ids: tuple
    X: np.ndarray
    W: np.ndarray
    Y: np.ndarray
    column_names: tuple
    column_kinds: tuple
    n_dropped: int = 0

    def __post_init__(self):
        object.__setattr__(self, "subject_ids", tuple(str(s) for s in self.subject_ids))
        object.__setattr__(self, "column_names", tuple(self.column_names))
        object.__setattr__(self, "column_kinds", tuple(self.column_kinds))
        X = _readonly(self.X, np.float64)
        W = np.asarray(self.W)
        Y = _readonly(self.Y, np.float64)
        n = len(self.subject_ids)

        if X.ndim != 2 or X.shape[0] != n or n == 0 or X.shape[1] == 0:
            raise EegError("X must be a non-empty n x d matrix matching subject_ids.", field="X")
        if W.shape != (n,) or Y.shape != (n,):
            raise EegError("W and Y must have one entry per subject.", field="W")
        if not np.isin(W, (0, 1)).all():
            raise TreatmentDomainError("Treatment W must be 0 or 1.", field="W")
        if not (np.isfinite(X).all() and np.isfinite(Y).all()):
            raise EegError("Feature matrix contains non-finite values.", field="X")
        if len(self.column_names) != X.shape[1] or len(self.column_kinds) != X.shape[1]:
            raise EegError("column_names and column_kinds must describe every column.", field="column_names")
        if any(kind not in COLUMN_KINDS for kind in self.column_kinds):
            raise EegError("Column kinds must be continuous or categorical.", field="column_kinds")
        _check_unique(self.column_names, "column_names")

        object.__setattr__(self, "X", X)
        object.__setattr__(self, "W", _readonly(W, np.int64))
        object.__setattr__(self, "Y", Y)

    @property
    def n(self):
        return self.X.shape[0]

    @property
    def d(self):
        return self.X.shape[1]

    def subset(self, rows):
        rows = np.asarray(rows)
        return dataclasses.replace(
            self,
            subject_ids=tuple(self.subject_ids[i] for i in rows),
            X=self.X[rows],
            W=self.W[rows],
            Y=self.Y[rows],
        )

    def to_frame(self):
        frame = pd.DataFrame(self.X, columns=list(self.column_names))
        frame.insert(0, "Y", self.Y)
        frame.insert(0, "W", self.W)
        frame.insert(0, "subject_id", list(self.subject_ids))
        return frame
