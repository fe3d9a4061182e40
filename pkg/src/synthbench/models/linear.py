"""Ordinary least squares with dummy-coded categorical predictors."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import FitError
from .design import DesignEncoding, Predictors, encode_from_predictors

_RIDGE = 1e-8


@dataclass(frozen=True)
class LinearModel:
    encoding: DesignEncoding
    coef: np.ndarray
    se: np.ndarray
    residual_sd: float
    n: int
    ridged: bool

    @property
    def coef_names(self) -> tuple[str, ...]:
        return self.encoding.coef_names

    def predict(self, cols) -> np.ndarray:
        return self.encoding.encode(cols) @ self.coef

    def predict_row(self, x_row) -> float:
        return float(self.encoding.encode_row(x_row) @ self.coef)


def fit_ols(X: Predictors, y: np.ndarray) -> LinearModel:
    """Least-squares fit of ``y`` on an intercept plus the encoded predictors.

    Residual sd is sqrt(RSS / (n - p)) with p counting every coefficient
    including the intercept; standard errors come from the diagonal of
    sigma^2 (X'X)^-1. A rank-deficient design falls back to a small ridge
    (1e-8 on the normal-equation diagonal) and flags the model.
    """
    y = np.asarray(y, dtype=np.float64)
    enc, M = encode_from_predictors(X)
    n, p = M.shape
    if y.shape[0] != n:
        raise FitError("predictors and target differ in row count")
    if n <= p:
        raise FitError(f"need more rows ({n}) than coefficients ({p})")

    xtx = M.T @ M
    xty = M.T @ y
    ridged = int(np.linalg.matrix_rank(M)) < p
    if ridged:
        xtx = xtx + _RIDGE * np.eye(p)
    coef = np.linalg.solve(xtx, xty)

    resid = y - M @ coef
    rss = float(resid @ resid)
    sigma2 = max(rss, 0.0) / (n - p)
    cov = sigma2 * np.linalg.inv(xtx)
    se = np.sqrt(np.clip(np.diag(cov), 0.0, None))
    return LinearModel(
        encoding=enc,
        coef=coef,
        se=se,
        residual_sd=float(np.sqrt(sigma2)),
        n=n,
        ridged=ridged,
    )


def draw_linear(model: LinearModel, x_row, rng: np.random.Generator) -> float:
    """Predicted mean at ``x_row`` plus one normal residual draw."""
    mu = model.predict_row(x_row)
    return float(mu + rng.normal(0.0, model.residual_sd))


def draw_linear_many(model: LinearModel, cols, rng: np.random.Generator) -> np.ndarray:
    mu = model.predict(cols)
    return mu + rng.normal(0.0, model.residual_sd, size=mu.shape[0])
