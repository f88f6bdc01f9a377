import logging
from dataclasses import dataclass

import numpy as np
from scipy import fft
from scipy.integrate import simpson

from eeg.exceptions import SpectralError

logger = logging.getLogger(__name__)

GRID_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class Spectrum:
    freqs: np.ndarray
    psd: np.ndarray
    channel: str = ""


def multitaper_psd_array(data, tapers, sample_rate):
    """One-sided multitaper PSD along the last axis of ``data``.

    Scaled so that integrating the PSD over [0, Nyquist] gives the mean square of the signal.
    """
    data = np.asarray(data, dtype=np.float64)
    n = data.shape[-1]
    if n != tapers.n_samples:
        raise SpectralError(f"Signal has {n} samples, tapers have {tapers.n_samples}.", field="epoch_channel")
    spectra = fft.rfft(data[..., np.newaxis, :] * tapers.tapers, axis=-1)
    psd = np.mean(np.abs(spectra) ** 2, axis=-2) / sample_rate
    # Double every bin that has a negative-frequency twin.
    stop = -1 if n % 2 == 0 else None
    psd[..., 1:stop] *= 2.0
    return fft.rfftfreq(n, d=1.0 / sample_rate), psd


def multitaper_psd(epoch_channel, tapers, sample_rate, channel=""):
    freqs, psd = multitaper_psd_array(np.ravel(epoch_channel), tapers, sample_rate)
    return Spectrum(freqs=freqs, psd=psd, channel=channel)


def _band_points(freqs, band):
    lo, hi = band
    if not lo < hi:
        raise SpectralError(f"Band {band} is empty.", field="band")
    if lo < freqs[0] - GRID_TOL or hi > freqs[-1] + GRID_TOL:
        raise SpectralError(
            f"Band [{lo}, {hi}] Hz lies outside the grid [{freqs[0]}, {freqs[-1]}] Hz.", field="band"
        )
    idx = np.flatnonzero((freqs >= lo - GRID_TOL) & (freqs <= hi + GRID_TOL))
    if idx.size < 3:
        raise SpectralError(f"Band [{lo}, {hi}] Hz covers only {idx.size} grid points.", field="band")
    if idx.size % 2 == 0:
        logger.debug("Band [%s, %s] Hz: trimmed trailing point %.4f Hz for Simpson", lo, hi, freqs[idx[-1]])
        idx = idx[:-1]
    return idx


def band_integral(freqs, psd, band):
    """Composite Simpson integral over the band along the last axis."""
    idx = _band_points(np.asarray(freqs), band)
    return simpson(np.asarray(psd)[..., idx], x=np.asarray(freqs)[idx], axis=-1)


def band_power(spec, band):
    return float(band_integral(spec.freqs, spec.psd, band))


def relative_band_array(freqs, psd, band, total):
    if band[0] < total[0] or band[1] > total[1]:
        raise SpectralError(f"Band {list(band)} is not inside the total band {list(total)}.", field="band")
    denominator = band_integral(freqs, psd, total)
    if np.any(denominator <= 0):
        raise SpectralError("Total band power is zero.", field="total")
    ratio = band_integral(freqs, psd, band) / denominator
    # Simpson weights differ between nested bands; keep the ratio a proportion.
    return np.clip(ratio, 0.0, 1.0)


def relative_band_power(spec, band, total):
    return float(relative_band_array(spec.freqs, spec.psd, band, total))
