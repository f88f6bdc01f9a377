import logging
from dataclasses import dataclass, field

import numpy as np
import pandas as pd
import statsmodels.api as sm
from scipy.stats import t as student_t

from causal.exceptions import DegenerateRegressorError, NonFiniteScoreError

logger = logging.getLogger(__name__)

MEAN_TERM = "mean.forest.prediction"
DIFFERENTIAL_TERM = "differential.forest.prediction"
COLUMNS = ["Estimates", "Standard Error", "t value", "Pr(>t)"]


@dataclass(frozen=True, eq=False)
class BlpResult:
    table: pd.DataFrame
    tau_bar: float
    dropped: tuple = field(default_factory=tuple)

    def _value(self, term, column):
        return float(self.table.loc[term, column]) if term in self.table.index else float("nan")

    @property
    def alpha_hat(self):
        return self._value(MEAN_TERM, "Estimates")

    @property
    def beta_hat(self):
        return self._value(DIFFERENTIAL_TERM, "Estimates")

    @property
    def beta_p_value(self):
        return self._value(DIFFERENTIAL_TERM, "Pr(>t)")

    def to_dict(self):
        return {
            "tau_bar": self.tau_bar,
            "dropped": list(self.dropped),
            "table": {term: row.to_dict() for term, row in self.table.iterrows()},
        }


def blp_test(Y, W, m_hat, e_hat, tau_hat):
    """Regress Y − m̂ on τ̄(W − ê) and (τ̂ − τ̄)(W − ê), no intercept, HC3 errors, one-sided p-values."""
    Y, W, m_hat, e_hat, tau_hat = (np.asarray(a, dtype=np.float64) for a in (Y, W, m_hat, e_hat, tau_hat))
    if not all(np.isfinite(a).all() for a in (Y, m_hat, e_hat, tau_hat)):
        raise NonFiniteScoreError("BLP inputs contain non-finite values.", field="tau_hat")
    tau_bar = float(tau_hat.mean())
    w_res = W - e_hat
    regressors = {
        MEAN_TERM: tau_bar * w_res,
        DIFFERENTIAL_TERM: (tau_hat - tau_bar) * w_res,
    }
    dropped = []
    if tau_bar == 0:
        dropped.append(MEAN_TERM)
        logger.warning("Mean forest prediction is zero; %s dropped", MEAN_TERM)
    if np.var(tau_hat) == 0:
        dropped.append(DIFFERENTIAL_TERM)
        logger.warning("Forest predictions have no variance; %s dropped", DIFFERENTIAL_TERM)
    terms = [name for name in regressors if name not in dropped]
    if not terms:
        raise DegenerateRegressorError("Both BLP regressors are degenerate.", field="tau_hat")

    design = pd.DataFrame({name: regressors[name] for name in terms})
    fit = sm.OLS(Y - m_hat, design).fit(cov_type="HC3", use_t=True)
    p_values = student_t.sf(fit.tvalues.to_numpy(), fit.df_resid)
    table = pd.DataFrame(
        {
            "Estimates": fit.params.to_numpy(),
            "Standard Error": fit.bse.to_numpy(),
            "t value": fit.tvalues.to_numpy(),
            "Pr(>t)": p_values,
        },
        index=terms,
    )[COLUMNS]
    return BlpResult(table=table, tau_bar=tau_bar, dropped=tuple(dropped))


def blp_from_model(model):
    return blp_test(model.Y, model.W, model.m_hat, model.e_hat, model.predict_oob())
