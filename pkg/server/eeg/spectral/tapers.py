from dataclasses import dataclass

import numpy as np
from scipy.signal import windows

from eeg.exceptions import SpectralError


@dataclass(frozen=True, eq=False)
class TaperSet:
    tapers: np.ndarray
    time_bandwidth: float
    concentrations: np.ndarray

    @property
    def n_tapers(self):
        return self.tapers.shape[0]

    @property
    def n_samples(self):
        return self.tapers.shape[1]


def _sign_normalize(tapers):
    tapers = np.array(tapers, dtype=np.float64)
    for row in tapers:
        first = np.flatnonzero(np.abs(row) > 1e-12 * np.abs(row).max())
        if first.size and row[first[0]] < 0:
            row *= -1.0
    return tapers


def dpss_tapers(n, nw, k):
    """First k discrete prolate spheroidal sequences of length n, unit L2 norm."""
    if not 1 <= k <= 2 * nw - 1:
        raise SpectralError(f"Taper count {k} must lie in [1, {2 * nw - 1}] for NW={nw}.", field="k")
    if n < k:
        raise SpectralError(f"Need at least {k} samples for {k} tapers, got {n}.", field="n")
    tapers, ratios = windows.dpss(n, nw, Kmax=k, sym=True, norm=2, return_ratios=True)
    tapers = _sign_normalize(np.atleast_2d(tapers))
    concentrations = np.clip(np.atleast_1d(ratios), np.finfo(float).tiny, 1.0)
    tapers.setflags(write=False)
    concentrations.setflags(write=False)
    return TaperSet(tapers=tapers, time_bandwidth=float(nw), concentrations=concentrations)
