import logging
from dataclasses import dataclass

import numpy as np

from causal.exceptions import NonFiniteScoreError, ParameterError

logger = logging.getLogger(__name__)

SCORE_FIELDS = ("gamma", "gamma_0", "gamma_1", "tau_hat", "e_hat", "m_hat")


@dataclass(frozen=True, eq=False)
class DoublyRobustScores:
    """Per-subject doubly robust scores Γ̂ᵢ and their per-arm parts."""

    gamma: np.ndarray
    gamma_0: np.ndarray
    gamma_1: np.ndarray
    tau_hat: np.ndarray
    e_hat: np.ndarray
    m_hat: np.ndarray
    subject_ids: tuple = ()

    @property
    def n(self):
        return len(self.gamma)

    def by_arm(self):
        """(n, 2) matrix: column w holds Γ̂ᵢ(w)."""
        return np.column_stack([self.gamma_0, self.gamma_1])

    def subset(self, rows):
        rows = np.asarray(rows)
        ids = tuple(self.subject_ids[i] for i in rows) if self.subject_ids else ()
        return DoublyRobustScores(**{f: getattr(self, f)[rows] for f in SCORE_FIELDS}, subject_ids=ids)

    def to_dict(self):
        return {"subject_ids": list(self.subject_ids), **{f: getattr(self, f).tolist() for f in SCORE_FIELDS}}

    @classmethod
    def from_dict(cls, payload):
        arrays = {f: np.asarray(payload[f], dtype=np.float64) for f in SCORE_FIELDS}
        return cls(**arrays, subject_ids=tuple(str(s) for s in payload.get("subject_ids") or ()))


def doubly_robust_scores(tau_hat, e_hat, m_hat, W, Y, subject_ids=()):
    """Γ̂ᵢ = τ̂ + (W−ê)/(ê(1−ê))·[Y − m̂ − (W−ê)τ̂], with per-arm scores built from û(x, w) = m̂ + (w − ê)τ̂."""
    tau_hat, e_hat, m_hat, Y = (np.asarray(a, dtype=np.float64) for a in (tau_hat, e_hat, m_hat, Y))
    W = np.asarray(W, dtype=np.float64)
    for name, values in (("tau_hat", tau_hat), ("e_hat", e_hat), ("m_hat", m_hat), ("Y", Y)):
        if values.shape != W.shape:
            raise ParameterError(f"{name} must have one entry per subject.", field=name)
        if not np.isfinite(values).all():
            raise NonFiniteScoreError(f"{name} contains non-finite values.", field=name)
    if np.any((e_hat <= 0) | (e_hat >= 1)):
        raise ParameterError("Propensities must lie strictly inside (0, 1).", field="e_hat")

    residual = Y - m_hat - (W - e_hat) * tau_hat
    gamma = tau_hat + (W - e_hat) / (e_hat * (1 - e_hat)) * residual
    u_1 = m_hat + (1 - e_hat) * tau_hat
    u_0 = m_hat - e_hat * tau_hat
    gamma_1 = u_1 + W / e_hat * (Y - u_1)
    gamma_0 = u_0 + (1 - W) / (1 - e_hat) * (Y - u_0)
    return DoublyRobustScores(
        gamma=gamma, gamma_0=gamma_0, gamma_1=gamma_1, tau_hat=tau_hat, e_hat=e_hat, m_hat=m_hat,
        subject_ids=tuple(str(s) for s in subject_ids),
    )


def scores_from_model(model, subject_ids=()):
    """Scores from a fitted forest's out-of-bag τ̂⁻ⁱ and cross-fitted nuisances."""
    return doubly_robust_scores(model.predict_oob(), model.e_hat, model.m_hat, model.W, model.Y, subject_ids)
