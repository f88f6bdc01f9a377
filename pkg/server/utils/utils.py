# utils/utils.py
import hashlib
import json
from pathlib import Path

import numpy as np
import pandas as pd
from django.core.serializers.json import DjangoJSONEncoder


class ArtifactJSONEncoder(DjangoJSONEncoder):
    """DjangoJSONEncoder that also understands numpy scalars, arrays and sets."""

    def default(self, o):
        if isinstance(o, np.integer):
            return int(o)
        if isinstance(o, np.floating):
            return None if np.isnan(o) else float(o)
        if isinstance(o, np.bool_):
            return bool(o)
        if isinstance(o, np.ndarray):
            return o.tolist()
        if isinstance(o, (set, frozenset)):
            return sorted(o)
        if isinstance(o, Path):
            return str(o)
        return super().default(o)


def _finite(value):
    # NaN is not valid JSON; write null instead.
    if isinstance(value, float) and not np.isfinite(value):
        return None
    if isinstance(value, dict):
        return {k: _finite(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_finite(v) for v in value]
    return value


def dump_json(payload, path):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    text = json.dumps(_finite(json.loads(json.dumps(payload, cls=ArtifactJSONEncoder))), indent=2, sort_keys=False)
    path.write_text(text + "\n", encoding="utf-8")
    return path


def load_json(path):
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)


def dump_csv(frame, path, columns=None):
    """Write a DataFrame (or anything DataFrame() accepts) without its index, LF line endings."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    frame = frame if isinstance(frame, pd.DataFrame) else pd.DataFrame(frame)
    frame.to_csv(path, index=False, columns=columns, lineterminator="\n")
    return path


def sha256_file(path, chunk_size=1 << 20):
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(chunk_size), b""):
            digest.update(chunk)
    return digest.hexdigest()


def sha256_json(payload):
    text = json.dumps(payload, cls=ArtifactJSONEncoder, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


def derive_seed(seed, *labels):
    """Stable seed for a named stage, e.g. derive_seed(seed, "fit_forest")."""
    words = [int.from_bytes(hashlib.sha256(str(label).encode("utf-8")).digest()[:4], "little") for label in labels]
    return int(np.random.SeedSequence([seed, *words]).generate_state(1, dtype=np.uint32)[0])


def sha256_artifact(path):
    """Content hash of a file or directory; .npz archives hash their arrays, not the zip bytes."""
    path = Path(path)
    if path.is_dir():
        return sha256_json({
            str(child.relative_to(path)): sha256_artifact(child)
            for child in sorted(path.rglob("*")) if child.is_file()
        })
    if path.suffix != ".npz":
        return sha256_file(path)
    digest = hashlib.sha256()
    with np.load(path, allow_pickle=False) as archive:
        for name in sorted(archive.files):
            array = archive[name]
            digest.update(f"{name}:{array.dtype.str}:{array.shape}".encode("utf-8"))
            digest.update(np.ascontiguousarray(array).tobytes())
    return digest.hexdigest()
