import logging
from dataclasses import dataclass

import numpy as np
from sklearn.linear_model import Lasso, LassoCV
from sklearn.model_selection import KFold
from sklearn.preprocessing import StandardScaler

from causal.exceptions import ArmMissingError, EmptyGridError, ParameterError

logger = logging.getLogger(__name__)

MAX_ITER = 100_000
TOL = 1e-10


@dataclass(frozen=True, eq=False)
class QPolicy:
    """Lasso outcome model on [X ‖ W ‖ W·X], coefficients on the original scale."""

    main: np.ndarray
    treatment: float
    interaction: np.ndarray
    intercept: float
    penalty: float
    feature_names: tuple = ()

    kind = "q_learning"

    def q_values(self, X):
        X = np.asarray(X, dtype=np.float64)
        base = self.intercept + X @ self.main
        return np.column_stack([base, base + self.treatment + X @ self.interaction])

    def predict(self, X):
        q = self.q_values(X)
        # Ties go to control.
        return (q[:, 1] > q[:, 0]).astype(np.int64)

    @property
    def n_nonzero(self):
        return int(np.count_nonzero(self.main) + (self.treatment != 0) + np.count_nonzero(self.interaction))

    def to_dict(self):
        return {
            "kind": self.kind,
            "feature_names": list(self.feature_names),
            "penalty": self.penalty,
            "intercept": self.intercept,
            "main": self.main.tolist(),
            "treatment": self.treatment,
            "interaction": self.interaction.tolist(),
        }

    @classmethod
    def from_dict(cls, payload):
        return cls(
            main=np.asarray(payload["main"], dtype=np.float64),
            treatment=float(payload["treatment"]),
            interaction=np.asarray(payload["interaction"], dtype=np.float64),
            intercept=float(payload["intercept"]),
            penalty=float(payload["penalty"]),
            feature_names=tuple(payload.get("feature_names", ())),
        )


def q_design(X, W):
    X = np.asarray(X, dtype=np.float64)
    W = np.asarray(W, dtype=np.float64)[:, None]
    return np.hstack([X, W, W * X])


def lambda_grid(Z, Y, n_lambdas=50, ratio=1e-4):
    """Log-spaced penalties from the smallest one zeroing every coefficient down by `ratio`."""
    centred = Y - Y.mean()
    lam_max = np.abs(Z.T @ centred).max() / len(Y)
    if lam_max == 0:
        lam_max = 1.0
    return np.logspace(np.log10(lam_max), np.log10(lam_max * ratio), n_lambdas)


def _one_se_choice(cv):
    mse = cv.mse_path_.mean(axis=1)
    se = cv.mse_path_.std(axis=1, ddof=1) / np.sqrt(cv.mse_path_.shape[1])
    best = int(mse.argmin())
    within = np.flatnonzero(mse <= mse[best] + se[best])
    return float(cv.alphas_[within].max())


def q_learning_fit(X, W, Y, lambdas=None, folds=10, seed=0, n_lambdas=50, lambda_ratio=1e-4,
                   one_se_rule=False, feature_names=None):
    """Cross-validated lasso Q-function; the policy treats where the fitted treated outcome is larger."""
    X = np.asarray(X, dtype=np.float64)
    W = np.asarray(W)
    Y = np.asarray(Y, dtype=np.float64)
    if not ((W == 0).any() and (W == 1).any()):
        raise ArmMissingError("Q-learning needs both arms.", field="W")
    d = X.shape[1]
    design = q_design(X, W)
    scaler = StandardScaler().fit(design)
    scale = np.where(scaler.scale_ > 0, scaler.scale_, 1.0)
    Z = (design - scaler.mean_) / scale

    if lambdas is None:
        lambdas = lambda_grid(Z, Y, n_lambdas, lambda_ratio)
    lambdas = np.sort(np.asarray(lambdas, dtype=np.float64))[::-1]
    if lambdas.size == 0:
        raise EmptyGridError("The penalty grid is empty.", field="lambdas")
    if np.any(lambdas < 0):
        raise ParameterError("Penalties must be non-negative.", field="lambdas")

    cv = LassoCV(
        alphas=lambdas, cv=KFold(n_splits=folds, shuffle=True, random_state=seed),
        max_iter=MAX_ITER, tol=TOL,
    ).fit(Z, Y)
    penalty = _one_se_choice(cv) if one_se_rule and lambdas.size > 1 else float(cv.alpha_)
    lasso = cv if penalty == cv.alpha_ else Lasso(alpha=penalty, max_iter=MAX_ITER, tol=TOL).fit(Z, Y)

    coef = lasso.coef_ / scale
    intercept = float(lasso.intercept_ - coef @ scaler.mean_)
    logger.info("Q-learning: penalty %.4g, %d nonzero coefficients", penalty, int(np.count_nonzero(coef)))
    return QPolicy(
        main=coef[:d], treatment=float(coef[d]), interaction=coef[d + 1:], intercept=intercept,
        penalty=penalty, feature_names=tuple(feature_names or (f"x{j}" for j in range(d))),
    )


def sparsity_path(X, W, Y, lambdas):
    """Nonzero coefficient count of the standardized lasso at each penalty."""
    design = q_design(X, W)
    Z = StandardScaler().fit_transform(design)
    return [int(np.count_nonzero(Lasso(alpha=lam, max_iter=MAX_ITER, tol=TOL).fit(Z, Y).coef_)) for lam in lambdas]
