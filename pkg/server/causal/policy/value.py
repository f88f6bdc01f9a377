import logging
from dataclasses import dataclass

import numpy as np

from causal.exceptions import ParameterError

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ConstantPolicy:
    action: int

    kind = "constant"

    def predict(self, X):
        return np.full(np.asarray(X).shape[0], self.action, dtype=np.int64)

    def to_dict(self):
        return {"kind": self.kind, "action": self.action}

    @classmethod
    def from_dict(cls, payload):
        return cls(action=int(payload["action"]))


def _actions(policy, X):
    if hasattr(policy, "predict"):
        return np.asarray(policy.predict(X), dtype=np.int64)
    return np.asarray(policy, dtype=np.int64)


def estimate_value(policy, X, scores=None, potential=None, eval_ids=None, train_ids=None):
    """Mean outcome under the policy.

    Pass `scores` (DoublyRobustScores or a (Γ̂(0), Γ̂(1)) pair) for the doubly robust value, or
    `potential` ((E[Y(0)|X], E[Y(1)|X]) or realized outcomes) for the simulation value.
    """
    if (scores is None) == (potential is None):
        raise ParameterError("Pass exactly one of scores or potential.", field="scores")
    if scores is not None:
        table = scores.by_arm() if hasattr(scores, "by_arm") else np.column_stack(scores)
    else:
        table = np.column_stack(potential)
    table = np.asarray(table, dtype=np.float64)
    actions = _actions(policy, X)
    if actions.shape != (table.shape[0],):
        raise ParameterError("Policy actions do not match the evaluation rows.", field="X")
    if eval_ids is not None and train_ids is not None:
        overlap = set(map(str, eval_ids)) & set(map(str, train_ids))
        if overlap:
            logger.warning("%d evaluation subjects were also used for training", len(overlap))
    return float(table[np.arange(len(actions)), actions].mean())


def optimal_actions(mu_0, mu_1):
    """Arm with the larger mean outcome; ties go to control."""
    return (np.asarray(mu_1) > np.asarray(mu_0)).astype(np.int64)


def policy_accuracy(policy, X, optimal):
    optimal = np.asarray(optimal, dtype=np.int64)
    actions = _actions(policy, X)
    if actions.shape != optimal.shape:
        raise ParameterError("Policy actions do not match the optimal actions.", field="optimal")
    return float(np.mean(actions == optimal))
