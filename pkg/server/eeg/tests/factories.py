"""Synthetic EEG for tests: a few spatially smooth sources seen through the bundled montage."""
import numpy as np

from eeg.io.montage import common_channels, load_montage
from eeg.io.types import Channel, Recording
from eeg.preprocess.epochs import EpochSet

EXTRA_CHANNELS = ["AF7", "AF8", "FT7", "FT8", "TP7", "TP8", "P9", "P10", "Iz", "POz"]


def channels_64():
    return common_channels() + EXTRA_CHANNELS


def _sources(n_samples, sample_rate, rng, alpha_uv, theta_uv):
    t = np.arange(n_samples) / sample_rate
    alpha = alpha_uv * np.sin(2 * np.pi * 10.0 * t + rng.uniform(0, 2 * np.pi))
    theta = theta_uv * np.sin(2 * np.pi * 6.0 * t + rng.uniform(0, 2 * np.pi))
    # slow broadband background: smoothed white noise
    kernel = np.hanning(int(sample_rate // 8) + 1)
    background = np.convolve(rng.standard_normal(n_samples), kernel / kernel.sum(), mode="same")
    background *= 10.0 / max(background.std(), 1e-12)
    return np.vstack([alpha, theta, background])


def make_recording(names=None, sample_rate=250.0, duration_s=30.0, condition="eyes_open", block_index=1,
                   seed=0, alpha_uv=10.0, theta_uv=5.0, noise_uv=0.5, offset_uv=0.0):
    names = list(names or channels_64())
    rng = np.random.default_rng(seed)
    montage = load_montage()
    positions = np.array([montage[name.casefold()] for name in names])
    n_samples = int(round(duration_s * sample_rate))

    directions = np.array([[0.0, -1.0, 0.3], [0.0, 1.0, 0.5], [0.3, 0.2, 1.0]])
    directions /= np.linalg.norm(directions, axis=1, keepdims=True)
    gains = 1.0 + 0.25 * positions @ directions.T
    data = gains @ _sources(n_samples, sample_rate, rng, alpha_uv, theta_uv)
    data += noise_uv * rng.standard_normal(data.shape) + offset_uv
    return Recording(
        channels=tuple(Channel(name, tuple(pos)) for name, pos in zip(names, positions)),
        sample_rate=sample_rate,
        data=data,
        condition=condition,
        block_index=block_index,
    )


def make_epoch_set(n_epochs=40, names=None, n_samples=500, sample_rate=250.0, condition="eyes_open",
                   seed=0, scale=1.0):
    names = list(names or common_channels())
    rng = np.random.default_rng(seed)
    epochs = scale * rng.standard_normal((n_epochs, len(names), n_samples))
    return EpochSet(
        epochs=epochs,
        channel_names=names,
        sample_rate=sample_rate,
        length_s=n_samples / sample_rate,
        condition=condition,
    )


def make_subject_blocks(subject_seed=0, names=None, duration_s=20.0):
    """Four blocks in the eyes-open, closed, closed, open order."""
    order = [("eyes_open", 1), ("eyes_closed", 2), ("eyes_closed", 3), ("eyes_open", 4)]
    return [
        make_recording(names=names, duration_s=duration_s, condition=condition, block_index=block,
                       seed=subject_seed * 10 + block, alpha_uv=20.0 if condition == "eyes_closed" else 8.0)
        for condition, block in order
    ]
