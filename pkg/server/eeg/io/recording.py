import json
import logging
import os
from pathlib import Path

import numpy as np
import pandas as pd
from django.conf import settings

from eeg.exceptions import (
    EegError, MalformedHeaderError, SampleCountMismatchError, DuplicateChannelError, RecordingFormatError,
)
from eeg.io.montage import load_montage
from eeg.io.serializers import RecordingHeaderSerializer, CsvSidecarSerializer
from eeg.io.types import Channel, Recording

logger = logging.getLogger(__name__)

RAW_DTYPE = np.dtype("<f4")


def _raise_from_errors(errors):
    field, details = next(iter(errors.items()))
    detail = details[0] if isinstance(details, list) and details else details
    if isinstance(detail, dict):
        detail = next(iter(detail.values()))[0]
    if field == "channel_names" and getattr(detail, "code", None) == "duplicate":
        raise DuplicateChannelError(str(detail), field=field)
    raise MalformedHeaderError(f"Invalid header field {field!r}: {detail}", field=field)


def _read_json(path):
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except json.JSONDecodeError as exc:
        raise MalformedHeaderError(f"Header {path} is not valid JSON: {exc}", field="header") from exc


def _channels(names, montage):
    return tuple(Channel(name, montage.get(name.casefold())) for name in names)


def _load_binary(header_path, montage):
    serializer = RecordingHeaderSerializer(data=_read_json(header_path))
    if not serializer.is_valid():
        _raise_from_errors(serializer.errors)
    header = serializer.validated_data

    data_path = header_path.parent / header.get("data_file", header_path.with_suffix(".bin").name)
    n_channels = len(header["channel_names"])
    expected = n_channels * header["n_samples"] * RAW_DTYPE.itemsize
    if not data_path.is_file():
        raise RecordingFormatError(f"Sample file {data_path} for header {header_path} does not exist.",
                                   field="data_file")
    actual = os.path.getsize(data_path)
    if actual != expected:
        raise SampleCountMismatchError(
            f"{data_path} holds {actual} bytes; header declares {n_channels} channels x "
            f"{header['n_samples']} samples = {expected} bytes.",
            field="n_samples",
        )
    raw = np.fromfile(data_path, dtype=RAW_DTYPE).reshape(n_channels, header["n_samples"])
    return Recording(
        channels=_channels(header["channel_names"], montage),
        sample_rate=header["sample_rate_hz"],
        data=raw.astype(np.float64),
        condition=header["condition"],
        block_index=header["block_index"],
    )


def _load_csv(path, montage, overrides):
    head = pd.read_csv(path, header=None, nrows=1, dtype=str)
    names = [str(v).strip() for v in head.iloc[0].tolist()]
    seen = set()
    for name in names:
        if name in seen:
            raise DuplicateChannelError(f"Duplicate channel name {name!r} in {path}.", field="channel_names")
        seen.add(name)

    body = pd.read_csv(path, header=None, skiprows=1, float_precision="round_trip")
    try:
        data = body.to_numpy(dtype=np.float64).T
    except ValueError as exc:
        raise MalformedHeaderError(f"{path} contains non-numeric samples.", field="data") from exc
    if data.shape[0] != len(names):
        raise SampleCountMismatchError(f"{path} rows do not match the header width.", field="data")

    sidecar = path.with_suffix(".json")
    meta = _read_json(sidecar) if sidecar.exists() else {}
    meta.update({k: v for k, v in overrides.items() if v is not None})
    serializer = CsvSidecarSerializer(data=meta)
    if not serializer.is_valid():
        _raise_from_errors(serializer.errors)
    meta = serializer.validated_data
    return Recording(
        channels=_channels(names, montage),
        sample_rate=meta["sample_rate_hz"],
        data=data,
        condition=meta["condition"],
        block_index=meta["block_index"],
    )


def load_recording(path, sample_rate=None, condition=None, block_index=None, montage=None):
    """Read a JSON header + float32 binary pair, or a CSV with a channel-name header row.

    Positions come from the bundled montage by channel name; unknown labels load
    without a position and only fail later at interpolation time.
    """
    path = Path(path)
    montage = load_montage() if montage is None else montage
    if path.suffix.lower() == ".csv":
        overrides = {"sample_rate_hz": sample_rate, "condition": condition, "block_index": block_index}
        recording = _load_csv(path, montage, overrides)
    elif path.suffix.lower() == ".json":
        recording = _load_binary(path, montage)
    else:
        raise EegError(f"Unsupported recording file {path}.", field="path")
    logger.debug("Loaded %s: %d channels x %d samples @ %.1f Hz",
                 path, recording.n_channels, recording.n_samples, recording.sample_rate)
    return recording


def save_recording(recording, path):
    """Write a recording in the format implied by the suffix (.json + .bin, or .csv)."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    meta = {
        "sample_rate_hz": recording.sample_rate,
        "condition": recording.condition,
        "block_index": recording.block_index,
    }
    if path.suffix.lower() == ".csv":
        frame = pd.DataFrame(recording.data.T, columns=recording.channel_names)
        frame.to_csv(path, index=False, float_format="%.17g")
        with open(path.with_suffix(".json"), "w", encoding="utf-8") as fh:
            json.dump(meta, fh, indent=2)
    elif path.suffix.lower() == ".json":
        data_path = path.with_suffix(".bin")
        np.ascontiguousarray(recording.data, dtype=RAW_DTYPE).tofile(data_path)
        header = {
            "channel_names": recording.channel_names,
            "n_samples": recording.n_samples,
            "data_file": data_path.name,
            **meta,
        }
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(header, fh, indent=2)
    else:
        raise EegError(f"Unsupported recording file {path}.", field="path")
    return path


def _recording_files(folder):
    csvs = sorted(folder.glob("*.csv"))
    stems = {p.stem for p in csvs}
    suffix = settings.EEG_IO["SCHEMA_SUFFIX"]
    headers = sorted(
        p for p in folder.glob("*.json")
        if p.stem not in stems and not p.name.endswith(suffix) and not p.name.endswith(".qc.json")
    )
    return sorted(csvs + headers)


def discover_recordings(root):
    """Map subject id to its recording files: one sub-directory per subject, or a flat directory."""
    root = Path(root)
    if not root.is_dir():
        raise EegError(f"{root} is not a directory.", field="in")
    subjects = {p.name: _recording_files(p) for p in sorted(root.iterdir()) if p.is_dir()}
    subjects = {name: files for name, files in subjects.items() if files}
    if not subjects:
        files = _recording_files(root)
        if files:
            subjects = {root.name: files}
    return subjects
