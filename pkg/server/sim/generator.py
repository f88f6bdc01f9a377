import dataclasses
import logging
from dataclasses import dataclass

import numpy as np
from scipy import linalg

from causal.policy.value import optimal_actions
from eeg.io.montage import common_channels
from eeg.io.types import FeatureMatrix
from eeg.spectral.features import feature_names
from sim.exceptions import CovarianceError, EffectVariantError, SpecError

logger = logging.getLogger(__name__)

EFFECTS = ("strong", "weak")
NOISE_MODELS = ("bernoulli", "gaussian")
WEAKEN_SHIFT = 0.1
JITTER = 1e-10


@dataclass(frozen=True)
class Categorical:
    name: str
    probabilities: tuple

    @property
    def column_names(self):
        return [f"{self.name}_{level}" for level in range(1, len(self.probabilities))]


@dataclass(frozen=True)
class EffectNode:
    """Indicator tree over named covariates; leaves hold the arm means E[Y(1)] and E[Y(0)]."""

    feature: str | None = None
    threshold: float | None = None
    left: "EffectNode | None" = None
    right: "EffectNode | None" = None
    mu_1: float | None = None
    mu_0: float | None = None

    @property
    def is_leaf(self):
        return self.feature is None

    def leaves(self):
        if self.is_leaf:
            return [self]
        return self.left.leaves() + self.right.leaves()

    def features(self):
        if self.is_leaf:
            return set()
        return {self.feature} | self.left.features() | self.right.features()

    def map_leaves(self, fn):
        if self.is_leaf:
            return fn(self)
        return dataclasses.replace(self, left=self.left.map_leaves(fn), right=self.right.map_leaves(fn))

    def apply(self, X, columns):
        """Leaf index (left-to-right order) of each row of X."""
        out = np.empty(X.shape[0], dtype=np.int64)
        self._apply(X, columns, np.arange(X.shape[0]), out, 0)
        return out

    def _apply(self, X, columns, rows, out, offset):
        if self.is_leaf:
            out[rows] = offset
            return offset + 1
        goes_left = X[rows, columns[self.feature]] <= self.threshold
        offset = self.left._apply(X, columns, rows[goes_left], out, offset)
        return self.right._apply(X, columns, rows[~goes_left], out, offset)

    def to_dict(self):
        if self.is_leaf:
            return {"mu_1": self.mu_1, "mu_0": self.mu_0}
        return {"feature": self.feature, "threshold": self.threshold,
                "left": self.left.to_dict(), "right": self.right.to_dict()}

    @classmethod
    def from_dict(cls, payload):
        if "feature" not in payload:
            return cls(mu_1=float(payload["mu_1"]), mu_0=float(payload["mu_0"]))
        return cls(feature=payload["feature"], threshold=float(payload["threshold"]),
                   left=cls.from_dict(payload["left"]), right=cls.from_dict(payload["right"]))


@dataclass(frozen=True, eq=False)
class GeneratorSpec:
    continuous_names: tuple
    mean: np.ndarray
    covariance: np.ndarray
    categoricals: tuple
    effect_tree: EffectNode
    effect: str = "strong"
    noise: str = "bernoulli"
    noise_sd: float = 1.0
    clip: tuple = (0.02, 0.98)
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "continuous_names", tuple(self.continuous_names))
        object.__setattr__(self, "categoricals", tuple(self.categoricals))
        mean = np.asarray(self.mean, dtype=np.float64)
        cov = np.asarray(self.covariance, dtype=np.float64)
        p = len(self.continuous_names)
        if mean.shape != (p,) or cov.shape != (p, p):
            raise SpecError("Mean and covariance must match the continuous columns.", field="covariance")
        if not np.allclose(cov, cov.T, rtol=0, atol=1e-12):
            raise SpecError("Covariance must be symmetric.", field="covariance")
        for cat in self.categoricals:
            probs = np.asarray(cat.probabilities, dtype=np.float64)
            if probs.size < 2 or np.any(probs < 0) or abs(probs.sum() - 1) > 1e-9:
                raise SpecError(f"Class probabilities of {cat.name!r} must be non-negative and sum to 1.",
                                field=cat.name)
        if self.effect not in EFFECTS:
            raise SpecError(f"effect must be one of {EFFECTS}.", field="effect")
        if self.noise not in NOISE_MODELS:
            raise SpecError(f"noise must be one of {NOISE_MODELS}.", field="noise")
        unknown = self.effect_tree.features() - set(self.column_names)
        if unknown:
            raise SpecError(f"Effect tree splits on unknown columns {sorted(unknown)}.", field="effect_tree")
        if len(set(self.column_names)) != len(self.column_names):
            raise SpecError("Column names must be unique.", field="continuous_names")
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "covariance", cov)

    @property
    def column_names(self):
        return list(self.continuous_names) + [name for cat in self.categoricals for name in cat.column_names]

    @property
    def column_kinds(self):
        n_indicators = len(self.column_names) - len(self.continuous_names)
        return ["continuous"] * len(self.continuous_names) + ["categorical"] * n_indicators

    def replace(self, **changes):
        return dataclasses.replace(self, **changes)

    def to_dict(self):
        return {
            "continuous": {
                "names": list(self.continuous_names),
                "mean": self.mean.tolist(),
                "covariance": self.covariance.tolist(),
            },
            "categoricals": [{"name": c.name, "probabilities": list(c.probabilities)} for c in self.categoricals],
            "effect_tree": self.effect_tree.to_dict(),
            "effect": self.effect,
            "noise": {"model": self.noise, "sd": self.noise_sd, "clip": list(self.clip)},
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, payload):
        noise = payload.get("noise", {})
        return cls(
            continuous_names=payload["continuous"]["names"],
            mean=payload["continuous"]["mean"],
            covariance=payload["continuous"]["covariance"],
            categoricals=tuple(Categorical(c["name"], tuple(c["probabilities"])) for c in payload["categoricals"]),
            effect_tree=EffectNode.from_dict(payload["effect_tree"]),
            effect=payload.get("effect", "strong"),
            noise=noise.get("model", "bernoulli"),
            noise_sd=float(noise.get("sd", 1.0)),
            clip=tuple(noise.get("clip", (0.02, 0.98))),
            seed=int(payload.get("seed", 0)),
        )


def block_covariance(block_sizes, block_sds, within=0.3, across=0.05):
    """Exchangeable correlation inside each block and a constant one between blocks, scaled to covariances."""
    sizes = np.asarray(block_sizes)
    labels = np.repeat(np.arange(len(sizes)), sizes)
    corr = np.where(labels[:, None] == labels[None, :], within, across)
    np.fill_diagonal(corr, 1.0)
    sd = np.repeat(np.asarray(block_sds, dtype=np.float64), sizes)
    return corr * np.outer(sd, sd)


def default_spec(effect="strong", seed=0):
    """Bundled generator: 216 EEG band powers, 38 clinical scores and 10 categorical covariates.

    The effect tree splits on c2.close.theta, then f7.open.alpha or fc2.close.theta; every leaf
    has |E[Y(1)] - E[Y(0)]| = 0.3. These numbers are placeholders for a calibrated spec file.
    """
    eeg = feature_names(common_channels())
    theta = [name for name in eeg if name.endswith(".theta")]
    alpha = [name for name in eeg if name.endswith(".alpha")]
    clinical = [f"clinical_{i:02d}" for i in range(1, 39)]
    names = theta + alpha + clinical

    mean = np.concatenate([np.full(len(theta), 0.15), np.full(len(alpha), 0.25), np.zeros(len(clinical))])
    covariance = block_covariance([len(theta), len(alpha), len(clinical)], [0.04, 0.06, 1.0])

    categoricals = tuple(Categorical(f"binary_{i}", (0.6, 0.4)) for i in range(1, 6)) + tuple(
        Categorical(f"ternary_{i}", (0.5, 0.3, 0.2)) for i in range(1, 6)
    )
    tree = EffectNode(
        feature="c2.close.theta", threshold=0.15,
        left=EffectNode(
            feature="f7.open.alpha", threshold=0.25,
            left=EffectNode(mu_1=0.6, mu_0=0.3),
            right=EffectNode(mu_1=0.3, mu_0=0.6),
        ),
        right=EffectNode(
            feature="fc2.close.theta", threshold=0.15,
            left=EffectNode(mu_1=0.35, mu_0=0.65),
            right=EffectNode(mu_1=0.7, mu_0=0.4),
        ),
    )
    spec = GeneratorSpec(continuous_names=names, mean=mean, covariance=covariance, categoricals=categoricals,
                         effect_tree=tree, seed=seed)
    return weaken_effects(spec) if effect == "weak" else spec


def _weaken_leaf(leaf):
    if leaf.mu_1 > leaf.mu_0:
        return dataclasses.replace(leaf, mu_1=leaf.mu_1 - WEAKEN_SHIFT, mu_0=leaf.mu_0 + WEAKEN_SHIFT)
    if leaf.mu_1 < leaf.mu_0:
        return dataclasses.replace(leaf, mu_1=leaf.mu_1 + WEAKEN_SHIFT, mu_0=leaf.mu_0 - WEAKEN_SHIFT)
    return leaf


def weaken_effects(spec):
    """Move both arm means of every leaf 0.1 towards each other; the tree is unchanged."""
    if spec.effect != "strong":
        raise EffectVariantError("Only a strong-effect spec can be weakened.", field="effect")
    return spec.replace(effect_tree=spec.effect_tree.map_leaves(_weaken_leaf), effect="weak")


@dataclass(frozen=True, eq=False)
class SimDataset:
    """Observed data plus the per-subject arm means and realized potential outcomes."""

    features: FeatureMatrix
    mu_0: np.ndarray
    mu_1: np.ndarray
    y_0: np.ndarray
    y_1: np.ndarray
    leaf: np.ndarray

    @property
    def n(self):
        return self.features.n

    @property
    def tau(self):
        return self.mu_1 - self.mu_0

    @property
    def optimal(self):
        return optimal_actions(self.mu_0, self.mu_1)

    @property
    def oracle_value(self):
        return float(np.maximum(self.mu_0, self.mu_1).mean())

    @property
    def best_arm_value(self):
        return float(max(self.mu_0.mean(), self.mu_1.mean()))


def _cholesky(covariance):
    try:
        return linalg.cholesky(covariance, lower=True)
    except linalg.LinAlgError:
        pass
    try:
        factor = linalg.cholesky(covariance + JITTER * np.eye(len(covariance)), lower=True)
    except linalg.LinAlgError as exc:
        raise CovarianceError("Covariance is not positive semidefinite.", field="covariance") from exc
    logger.debug("Covariance needed %.0e diagonal jitter", JITTER)
    return factor


def _outcomes(spec, mu, rng):
    if spec.noise == "bernoulli":
        return rng.binomial(1, np.clip(mu, *spec.clip)).astype(np.float64)
    return mu + spec.noise_sd * rng.standard_normal(mu.shape)


def generate_dataset(spec, n, seed=None):
    """Draw n subjects: normal continuous block, multinomial categoricals, W ~ Bernoulli(0.5)."""
    if n < 1:
        raise SpecError("n must be positive.", field="n")
    rng = np.random.default_rng(spec.seed if seed is None else seed)
    factor = _cholesky(spec.covariance)
    continuous = spec.mean + rng.standard_normal((n, len(spec.continuous_names))) @ factor.T

    blocks = [continuous]
    for cat in spec.categoricals:
        levels = rng.choice(len(cat.probabilities), size=n, p=np.asarray(cat.probabilities))
        blocks.append((levels[:, None] == np.arange(1, len(cat.probabilities))[None, :]).astype(np.float64))
    X = np.hstack(blocks)

    names = spec.column_names
    leaf = spec.effect_tree.apply(X, {name: j for j, name in enumerate(names)})
    leaves = spec.effect_tree.leaves()
    mu_1 = np.array([node.mu_1 for node in leaves])[leaf]
    mu_0 = np.array([node.mu_0 for node in leaves])[leaf]

    W = rng.binomial(1, 0.5, n)
    y_0 = _outcomes(spec, mu_0, rng)
    y_1 = _outcomes(spec, mu_1, rng)
    features = FeatureMatrix(
        subject_ids=[f"sim{i:06d}" for i in range(n)],
        X=X, W=W, Y=np.where(W == 1, y_1, y_0),
        column_names=names, column_kinds=spec.column_kinds,
    )
    return SimDataset(features=features, mu_0=mu_0, mu_1=mu_1, y_0=y_0, y_1=y_1, leaf=leaf)
