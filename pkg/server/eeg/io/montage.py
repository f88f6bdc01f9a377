import json
from functools import lru_cache

import mne
import numpy as np
from django.conf import settings

from eeg.exceptions import EegError


def _read_montage(source):
    if source in mne.channels.get_builtin_montages():
        return mne.channels.make_standard_montage(source)
    try:
        return mne.channels.read_custom_montage(source)
    except (OSError, ValueError) as exc:
        raise EegError(f"Cannot read montage {source}: {exc}", field="montage") from exc


@lru_cache(maxsize=8)
def _load_montage(source):
    montage = _read_montage(source)
    ch_pos = montage.get_positions()["ch_pos"]
    names = list(ch_pos)
    info = mne.create_info(names, sfreq=250.0, ch_types="eeg")
    info.set_montage(montage, verbose=False)
    # центр головы по сфере, вписанной в электроды
    _, origin, _ = mne.bem.fit_sphere_to_headshape(info, dig_kinds=("eeg",), units="m", verbose=False)
    xyz = np.array([ch_pos[name] for name in names]) - origin
    xyz /= np.linalg.norm(xyz, axis=1, keepdims=True)
    return {name.casefold(): tuple(float(v) for v in pos) for name, pos in zip(names, xyz)}


def load_montage(source=None):
    """Unit-sphere positions keyed by case-folded label; x to the right ear, y to the nose, z to the vertex.

    `source` is an MNE built-in montage name or a custom montage file.
    """
    return dict(_load_montage(str(source or settings.EEG_IO["MONTAGE"])))


def position_for(name, montage=None):
    montage = load_montage() if montage is None else montage
    return montage.get(name.casefold())


@lru_cache(maxsize=4)
def _load_common(path):
    with open(path, encoding="utf-8") as fh:
        return tuple(json.load(fh)["channels"])


def common_channels(path=None):
    """The bundled list of the 54 channels shared by all acquisition sites."""
    return list(_load_common(str(path or settings.EEG_IO["COMMON_CHANNELS_FILE"])))
