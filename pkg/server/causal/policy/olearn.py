import logging
from dataclasses import dataclass

import numpy as np
from sklearn.linear_model import LinearRegression, LogisticRegression
from sklearn.preprocessing import StandardScaler

from causal.exceptions import ParameterError

logger = logging.getLogger(__name__)

RESIDUALIZERS = ("linear", "none")


@dataclass(frozen=True, eq=False)
class OPolicy:
    """Linear decision function f(H); treat where f(H) > 0."""

    coef: np.ndarray
    intercept: float
    residualizer: str = "linear"
    degenerate: bool = False
    feature_names: tuple = ()

    kind = "o_learning"

    def decision_function(self, H):
        return np.asarray(H, dtype=np.float64) @ self.coef + self.intercept

    def predict(self, H):
        return (self.decision_function(H) > 0).astype(np.int64)

    def to_dict(self):
        return {
            "kind": self.kind,
            "feature_names": list(self.feature_names),
            "coef": self.coef.tolist(),
            "intercept": self.intercept,
            "residualizer": self.residualizer,
            "degenerate": self.degenerate,
        }

    @classmethod
    def from_dict(cls, payload):
        return cls(
            coef=np.asarray(payload["coef"], dtype=np.float64),
            intercept=float(payload["intercept"]),
            residualizer=payload.get("residualizer", "linear"),
            degenerate=bool(payload.get("degenerate", False)),
            feature_names=tuple(payload.get("feature_names", ())),
        )


def _control_policy(d, residualizer, names, reason):
    logger.warning("O-learning has no usable signal (%s); assigning control to everyone", reason)
    return OPolicy(coef=np.zeros(d), intercept=-1.0, residualizer=residualizer, degenerate=True, feature_names=names)


def o_learning_fit(H, A, R, propensity, residualizer="linear", ridge_per_subject=1e-4, feature_names=None):
    """Residual-weighted logistic classification of A·sign(R − s(H)) with weights |R − s(H)|/π(A, H).

    `propensity` is P(A = 1 | H), a scalar or one value per subject.
    """
    H = np.asarray(H, dtype=np.float64)
    A = np.asarray(A)
    R = np.asarray(R, dtype=np.float64)
    n, d = H.shape
    names = tuple(feature_names or (f"x{j}" for j in range(d)))
    if not np.isin(A, (-1, 1)).all():
        raise ParameterError("Actions must be coded -1/1.", field="A")
    if not np.isfinite(R).all():
        raise ParameterError("Rewards must be finite.", field="R")
    if residualizer not in RESIDUALIZERS:
        raise ParameterError(f"residualizer must be one of {RESIDUALIZERS}.", field="residualizer")
    p = np.broadcast_to(np.asarray(propensity, dtype=np.float64), (n,))
    if np.any((p <= 0) | (p >= 1)):
        raise ParameterError("Assignment probabilities must lie in (0, 1).", field="propensity")

    baseline = LinearRegression().fit(H, R).predict(H) if residualizer == "linear" else np.zeros(n)
    residual = R - baseline
    if np.all(np.abs(residual) <= 1e-12 * max(1.0, float(np.abs(R).max()))):
        return _control_policy(d, residualizer, names, "all residuals zero")

    labels = (A * np.sign(residual) > 0).astype(np.int64)
    weights = np.abs(residual) / np.where(A == 1, p, 1 - p)
    used = weights > 0
    if np.unique(labels[used]).size < 2:
        return _control_policy(d, residualizer, names, "single label")

    scaler = StandardScaler().fit(H)
    scale = np.where(scaler.scale_ > 0, scaler.scale_, 1.0)
    Z = (H - scaler.mean_) / scale
    penalty = ridge_per_subject * n * weights.mean()
    model = LogisticRegression(C=1.0 / penalty, max_iter=10_000, tol=1e-10).fit(Z, labels, sample_weight=weights)

    coef = model.coef_[0] / scale
    intercept = float(model.intercept_[0] - coef @ scaler.mean_)
    logger.info("O-learning: %d subjects, ridge %.4g", n, penalty)
    return OPolicy(coef=coef, intercept=intercept, residualizer=residualizer, feature_names=names)
