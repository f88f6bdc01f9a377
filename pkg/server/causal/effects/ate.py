import logging
from dataclasses import asdict, dataclass

import numpy as np
from scipy.stats import norm

from causal.exceptions import ParameterError

logger = logging.getLogger(__name__)

Z_95 = 1.96


@dataclass(frozen=True)
class AteResult:
    tau_hat: float
    score_variance: float
    standard_error: float
    ci_low: float
    ci_high: float
    p_value: float
    n: int

    @property
    def ci_95(self):
        return (self.ci_low, self.ci_high)

    def to_dict(self):
        payload = asdict(self)
        payload["ci_95"] = [self.ci_low, self.ci_high]
        return payload


def ate(scores):
    """Mean doubly robust score with plug-in SE √(σ̂²/n) and a normal 95% interval."""
    gamma = np.asarray(getattr(scores, "gamma", scores), dtype=np.float64)
    n = gamma.shape[0]
    if n < 2:
        raise ParameterError("At least two scores are needed.", field="scores")
    tau = float(gamma.mean())
    variance = float(np.mean((gamma - tau) ** 2))
    se = float(np.sqrt(variance / n))
    if se > 0:
        p_value = float(2 * norm.sf(abs(tau) / se))
    else:
        p_value = 1.0 if tau == 0 else 0.0
    logger.info("ATE %.4f (SE %.4f) over %d subjects", tau, se, n)
    return AteResult(
        tau_hat=tau, score_variance=variance, standard_error=se,
        ci_low=tau - Z_95 * se, ci_high=tau + Z_95 * se, p_value=p_value, n=n,
    )
