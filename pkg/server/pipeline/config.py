import dataclasses
from dataclasses import dataclass, field
from pathlib import Path

from django.conf import settings

from pipeline.serializers import ALL_STAGES, PipelineConfigSerializer
from utils.utils import load_json, sha256_json


@dataclass(frozen=True)
class PipelineConfig:
    out_dir: Path
    stages: tuple = ()
    raw_dir: Path | None = None
    clinical: Path | None = None
    features: Path | None = None
    sim_spec: Path | None = None
    train_fraction: float = 0.7
    upsample_minority: bool = True
    propensity: float | None = None
    policy_method: str = "policy_tree"
    tune: bool = False
    tune_grid: dict = field(default_factory=dict)
    seed: int = 0
    threads: int = 1
    site: dict = field(default_factory=dict)
    forest: dict = field(default_factory=dict)
    policy: dict = field(default_factory=dict)
    simulation: dict = field(default_factory=dict)

    def replace(self, **changes):
        return dataclasses.replace(self, **changes)

    def to_dict(self):
        payload = dataclasses.asdict(self)
        for key, value in payload.items():
            if isinstance(value, Path):
                payload[key] = str(value)
        payload["stages"] = list(self.stages)
        return payload

    @property
    def config_hash(self):
        """Hash of everything that shapes the outputs; thread count and output directory excluded."""
        payload = self.to_dict()
        del payload["threads"], payload["out_dir"]
        return sha256_json(payload)

    @classmethod
    def from_payload(cls, payload=None, **flags):
        """Validate a config document; flags that are not None win over its keys."""
        data = dict(payload or {})
        data.update({key: value for key, value in flags.items() if value is not None})
        serializer = PipelineConfigSerializer(data=data)
        serializer.is_valid(raise_exception=True)
        values = serializer.validated_data
        defaults = settings.PIPELINE
        requested = values.get("stages") or defaults["STAGES"]

        def path(key):
            return Path(values[key]) if values.get(key) else None

        return cls(
            out_dir=Path(values.get("out_dir") or settings.PIPELINE_OUTPUT_DIR),
            stages=tuple(stage for stage in ALL_STAGES if stage in requested),
            raw_dir=path("raw_dir"),
            clinical=path("clinical"),
            features=path("features"),
            sim_spec=path("sim_spec"),
            train_fraction=values.get("train_fraction", defaults["TRAIN_FRACTION"]),
            upsample_minority=values.get("upsample_minority", defaults["UPSAMPLE_MINORITY"]),
            propensity=values.get("propensity"),
            policy_method=values.get("policy_method", "policy_tree"),
            tune=values.get("tune", False),
            tune_grid=_plain(values.get("tune_grid", {})),
            seed=values.get("seed", settings.PIPELINE_SEED),
            threads=values.get("threads", settings.PIPELINE_THREADS),
            site=_plain(values.get("site", {})),
            forest=_plain(values.get("forest", {})),
            policy=_plain(values.get("policy", {})),
            simulation=_plain(values.get("simulation", {})),
        )


def _plain(value):
    if isinstance(value, dict):
        return {key: _plain(item) for key, item in value.items()}
    if isinstance(value, (list, tuple)):
        return [_plain(item) for item in value]
    return value


def load_config(path=None, **flags):
    return PipelineConfig.from_payload(load_json(path) if path else {}, **flags)
