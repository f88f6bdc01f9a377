import dataclasses
import math
from dataclasses import dataclass

from django.conf import settings

from causal.exceptions import ParameterError

SETTINGS_KEYS = {
    "num_trees": "NUM_TREES",
    "nuisance_trees": "NUISANCE_TREES",
    "subsample_ratio": "SUBSAMPLE_RATIO",
    "honesty_ratio": "HONESTY_RATIO",
    "mtry": "MTRY",
    "min_node_size": "MIN_NODE_SIZE",
    "max_depth": "MAX_DEPTH",
    "cross_fit_folds": "CROSS_FIT_FOLDS",
    "propensity_clip": "PROPENSITY_CLIP",
}


@dataclass(frozen=True)
class ForestParams:
    num_trees: int = 2000
    subsample_ratio: float = 0.5
    honesty_ratio: float = 0.5
    mtry: int | None = None
    min_node_size: int = 5
    max_depth: int | None = None
    seed: int = 0
    nuisance_trees: int = 500
    cross_fit_folds: int = 10
    propensity_clip: float = 0.05

    def __post_init__(self):
        if self.num_trees < 1 or self.nuisance_trees < 1:
            raise ParameterError("Forests need at least one tree.", field="num_trees")
        if not 0 < self.subsample_ratio <= 1:
            raise ParameterError("subsample_ratio must lie in (0, 1].", field="subsample_ratio")
        if not 0 < self.honesty_ratio < 1:
            raise ParameterError("honesty_ratio must lie in (0, 1).", field="honesty_ratio")
        if self.mtry is not None and self.mtry < 1:
            raise ParameterError("mtry must be positive.", field="mtry")
        if self.min_node_size < 1:
            raise ParameterError("min_node_size must be positive.", field="min_node_size")
        if self.max_depth is not None and self.max_depth < 0:
            raise ParameterError("max_depth must be non-negative.", field="max_depth")
        if self.cross_fit_folds < 2:
            raise ParameterError("cross_fit_folds must be at least 2.", field="cross_fit_folds")
        if not 0 <= self.propensity_clip < 0.5:
            raise ParameterError("propensity_clip must lie in [0, 0.5).", field="propensity_clip")

    def resolved_mtry(self, n_features):
        mtry = self.mtry if self.mtry is not None else math.ceil(math.sqrt(n_features))
        return max(1, min(mtry, n_features))

    def replace(self, **changes):
        return dataclasses.replace(self, **changes)

    def to_dict(self):
        return dataclasses.asdict(self)

    @classmethod
    def from_settings(cls, overrides=None, seed=0, base=None):
        """Defaults from settings (or `base`), then lower-case overrides such as {"num_trees": 100}."""
        base = base or settings.CAUSAL_FOREST
        values = {field: base[key] for field, key in SETTINGS_KEYS.items() if key in base}
        values.update({k: v for k, v in (overrides or {}).items() if k in SETTINGS_KEYS})
        return cls(seed=seed, **values)
