import logging
from importlib import metadata
from pathlib import Path

from utils.utils import dump_json, load_json, sha256_artifact, sha256_json

logger = logging.getLogger(__name__)

MANIFEST_VERSION = 1
PACKAGES = ("Django", "djangorestframework", "numpy", "scipy", "pandas", "scikit-learn", "statsmodels", "joblib")


def package_versions():
    versions = {}
    for name in PACKAGES:
        try:
            versions[name] = metadata.version(name)
        except metadata.PackageNotFoundError:
            versions[name] = None
    return versions


def hash_paths(paths):
    return {str(path): sha256_artifact(path) for path in paths if Path(path).exists()}


class Manifest:
    """Per-run record of stage inputs, outputs, seeds and timings; the previous one drives the cache."""

    def __init__(self, path, config_hash, seed, previous=None):
        self.path = Path(path)
        self.config_hash = config_hash
        self.seeds = {"master": seed}
        self.stages = []
        self._previous = {record["name"]: record for record in (previous or {}).get("stages", [])}

    @classmethod
    def open(cls, path, config_hash, seed):
        path = Path(path)
        previous = None
        if path.exists():
            try:
                previous = load_json(path)
            except ValueError:
                logger.warning("Ignoring unreadable manifest %s", path)
        return cls(path, config_hash, seed, previous)

    def cached(self, name, inputs, params, outputs):
        """True when the previous run finished this stage with the same inputs, params and outputs on disk."""
        record = self._previous.get(name)
        if record is None or record.get("status") not in ("ran", "cached"):
            return False
        if record.get("params") != sha256_json(params) or record.get("inputs") != hash_paths(inputs):
            return False
        expected = record.get("outputs") or {}
        return bool(expected) and all(Path(path).exists() for path in expected) and hash_paths(expected) == expected

    def record(self, name, status, inputs, params, outputs, seconds, seed=None, error=None):
        entry = {
            "name": name,
            "status": status,
            "params": sha256_json(params),
            "inputs": hash_paths(inputs),
            "outputs": hash_paths(outputs),
            "seconds": round(seconds, 3),
        }
        if error is not None:
            entry["error"] = error
        if seed is not None:
            self.seeds[name] = seed
        self.stages.append(entry)
        self.save()
        return entry

    def to_dict(self):
        return {
            "version": MANIFEST_VERSION,
            "config_hash": self.config_hash,
            "seeds": self.seeds,
            "stages": self.stages,
            "package_versions": package_versions(),
        }

    def save(self):
        return dump_json(self.to_dict(), self.path)
