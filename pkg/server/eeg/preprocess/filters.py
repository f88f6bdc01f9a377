import logging
import math
from fractions import Fraction

import numpy as np
from scipy import signal

from eeg.exceptions import FilterSpecError

logger = logging.getLogger(__name__)


def resample(rec, target_rate):
    """Polyphase decimation to target_rate; the polyphase FIR is the anti-alias low-pass."""
    if not target_rate > 0 or not rec.sample_rate > 0:
        raise FilterSpecError("Sample rates must be positive.", field="target_rate")
    if target_rate > rec.sample_rate:
        raise FilterSpecError(
            f"Upsampling from {rec.sample_rate} Hz to {target_rate} Hz is not supported.", field="target_rate"
        )
    if target_rate == rec.sample_rate:
        return rec

    ratio = (Fraction(target_rate).limit_denominator(10**6) /
             Fraction(rec.sample_rate).limit_denominator(10**6))
    out = signal.resample_poly(rec.data, ratio.numerator, ratio.denominator, axis=1, padtype="line")
    n_out = math.floor(rec.n_samples * target_rate / rec.sample_rate + 1e-9)
    logger.debug("Resampled %.1f Hz -> %.1f Hz (%d/%d)", rec.sample_rate, target_rate,
                 ratio.numerator, ratio.denominator)
    return rec.replace(data=out[:, :n_out], sample_rate=float(target_rate))


def _numtaps(sample_rate, transition):
    # Hamming main lobe: 3.3 / N cycles per sample.
    n = int(math.ceil(3.3 * sample_rate / transition))
    return n + 1 if n % 2 == 0 else n


def design_kernel(sample_rate, notch, high_pass, low_pass, transition=1.0, notch_width=2.0):
    """Linear-phase windowed-sinc kernel: band-pass, optionally cascaded with a band-stop notch."""
    nyquist = sample_rate / 2.0
    if not 0 < high_pass < low_pass < nyquist:
        raise FilterSpecError(
            f"Need 0 < high_pass ({high_pass}) < low_pass ({low_pass}) < Nyquist ({nyquist}).",
            field="high_pass",
        )
    transition = min(transition, high_pass)
    numtaps = _numtaps(sample_rate, transition)
    kernel = signal.firwin(numtaps, [high_pass, low_pass], pass_zero=False, window="hamming", fs=sample_rate)

    if notch is not None:
        if not high_pass < notch < nyquist or notch + notch_width / 2.0 >= nyquist:
            raise FilterSpecError(f"Notch {notch} Hz must lie in ({high_pass}, {nyquist}) Hz.", field="notch")
        stop = [notch - notch_width / 2.0, notch + notch_width / 2.0]
        band_stop = signal.firwin(numtaps, stop, pass_zero=True, window="hamming", fs=sample_rate)
        kernel = np.convolve(kernel, band_stop)
    return kernel


def apply_filters(rec, notch, high_pass, low_pass, transition=1.0, notch_width=2.0):
    """Zero-phase FIR filtering with reflected edges; output has the input's shape."""
    kernel = design_kernel(rec.sample_rate, notch, high_pass, low_pass, transition, notch_width)
    half = len(kernel) // 2
    padded = np.pad(rec.data, ((0, 0), (half, half)), mode="reflect")
    out = signal.oaconvolve(padded, kernel[np.newaxis, :], mode="valid", axes=1)
    logger.debug("Filtered %d channels with a %d-tap kernel", rec.n_channels, len(kernel))
    return rec.replace(data=out)
