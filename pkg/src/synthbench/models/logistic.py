"""Multinomial logistic regression fitted by Newton's method.

The first observed class is the reference and its coefficient row is pinned
at zero, so the parameter matrix has one row per remaining class. Iterations
maximise the softmax log-likelihood with step-halving; convergence means the
score's largest component fell below ``tol``. Standard errors come from the
inverse of the observed information at the optimum.

Complete separation pushes coefficients towards infinity; any coefficient
exceeding the cap (30 in absolute value per encoded predictor) stops the
solver, clips the matrix, and flags the model as separated.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import FitError
from .design import DesignEncoding, Predictors, encode_from_predictors

_COEF_CAP = 30.0
_MAX_HALVINGS = 30


def _log_probs(M: np.ndarray, B: np.ndarray) -> np.ndarray:
    n = M.shape[0]
    logits = np.empty((n, B.shape[0] + 1), dtype=np.float64)
    logits[:, 0] = 0.0
    logits[:, 1:] = M @ B.T
    shift = logits.max(axis=1, keepdims=True)
    logits -= shift
    lse = np.log(np.exp(logits).sum(axis=1, keepdims=True))
    return logits - lse


def softmax_loglik(M: np.ndarray, y_pos: np.ndarray, B: np.ndarray) -> float:
    lp = _log_probs(M, B)
    return float(lp[np.arange(M.shape[0]), y_pos].sum())


def softmax_score(M: np.ndarray, y_pos: np.ndarray, B: np.ndarray) -> np.ndarray:
    """Gradient of the log-likelihood wrt B, shape (K-1, p)."""
    P = np.exp(_log_probs(M, B))
    k = B.shape[0] + 1
    Y = (y_pos[:, None] == np.arange(1, k)[None, :]).astype(np.float64)
    return (Y - P[:, 1:]).T @ M


def softmax_information(M: np.ndarray, B: np.ndarray) -> np.ndarray:
    """Observed information (negative Hessian), shape ((K-1)p, (K-1)p)."""
    P = np.exp(_log_probs(M, B))
    km1 = B.shape[0]
    p = M.shape[1]
    info = np.empty((km1 * p, km1 * p), dtype=np.float64)
    for a in range(km1):
        pa = P[:, a + 1]
        for b in range(a, km1):
            w = pa * ((1.0 if a == b else 0.0) - P[:, b + 1])
            block = M.T @ (w[:, None] * M)
            info[a * p:(a + 1) * p, b * p:(b + 1) * p] = block
            if b != a:
                info[b * p:(b + 1) * p, a * p:(a + 1) * p] = block.T
    return info


@dataclass(frozen=True)
class LogisticModel:
    encoding: DesignEncoding
    classes: tuple[int, ...]
    coef: np.ndarray
    se: np.ndarray
    n: int
    n_iter: int
    converged: bool
    separated: bool
    loglik: float

    @property
    def coef_names(self) -> tuple[str, ...]:
        return self.encoding.coef_names

    def predict_proba(self, cols) -> np.ndarray:
        M = self.encoding.encode(cols)
        return np.exp(_log_probs(M, self.coef))


def fit_logistic(
    X: Predictors,
    y: np.ndarray,
    *,
    max_iter: int = 50,
    tol: float = 1e-8,
) -> LogisticModel:
    y = np.asarray(y, dtype=np.int64)
    enc, M = encode_from_predictors(X)
    n, p = M.shape
    if y.shape[0] != n:
        raise FitError("predictors and target differ in row count")
    classes = tuple(int(c) for c in np.unique(y))
    k = len(classes)
    if k < 2:
        raise FitError("target has a single observed class")
    if n <= p:
        raise FitError(f"need more rows ({n}) than encoded predictors ({p})")
    pos_of = {c: i for i, c in enumerate(classes)}
    y_pos = np.fromiter((pos_of[int(v)] for v in y), dtype=np.int64, count=n)

    B = np.zeros((k - 1, p), dtype=np.float64)
    ll = softmax_loglik(M, y_pos, B)
    converged = False
    separated = False
    it = 0
    for it in range(1, max_iter + 1):
        G = softmax_score(M, y_pos, B)
        if float(np.abs(G).max()) < tol:
            converged = True
            it -= 1
            break
        info = softmax_information(M, B)
        g = G.reshape(-1)
        try:
            step = np.linalg.solve(info, g)
        except np.linalg.LinAlgError:
            step = np.linalg.lstsq(info, g, rcond=None)[0]
        if not np.isfinite(step).all():
            step = np.linalg.pinv(info) @ g
        step = step.reshape(k - 1, p)

        t = 1.0
        accepted = False
        for _ in range(_MAX_HALVINGS):
            cand = B + t * step
            ll_new = softmax_loglik(M, y_pos, cand)
            if np.isfinite(ll_new) and ll_new > ll:
                B, ll = cand, ll_new
                accepted = True
                break
            t /= 2.0
        if not accepted:
            break
        if float(np.abs(B).max()) > _COEF_CAP:
            B = np.clip(B, -_COEF_CAP, _COEF_CAP)
            ll = softmax_loglik(M, y_pos, B)
            separated = True
            break

    info = softmax_information(M, B)
    try:
        cov = np.linalg.inv(info)
    except np.linalg.LinAlgError:
        cov = np.linalg.pinv(info)
    se = np.sqrt(np.clip(np.diag(cov), 0.0, None)).reshape(k - 1, p)

    return LogisticModel(
        encoding=enc,
        classes=classes,
        coef=B,
        se=se,
        n=n,
        n_iter=it,
        converged=converged,
        separated=separated,
        loglik=ll,
    )


def _validated_probs(P: np.ndarray) -> np.ndarray:
    sums = P.sum(axis=1)
    drift = float(np.abs(sums - 1.0).max()) if P.shape[0] else 0.0
    if drift > 1e-9:
        raise FitError(f"class probabilities drift from 1 by {drift:.3e}")
    return P / sums[:, None]


def draw_class(model: LogisticModel, x_row, rng: np.random.Generator) -> int:
    """Draw one class from the model's probabilities at ``x_row``.

    Probabilities are renormalised when they are off by at most 1e-9; larger
    drift raises.
    """
    M = model.encoding.encode_row(x_row)[None, :]
    P = _validated_probs(np.exp(_log_probs(M, model.coef)))
    cum = np.cumsum(P[0])
    pick = int(np.searchsorted(cum, rng.random(), side="right"))
    pick = min(pick, len(model.classes) - 1)
    return int(model.classes[pick])


def draw_class_many(model: LogisticModel, cols, rng: np.random.Generator) -> np.ndarray:
    P = _validated_probs(model.predict_proba(cols))
    cum = np.cumsum(P, axis=1)
    u = rng.random(P.shape[0])
    picks = (cum <= u[:, None]).sum(axis=1)
    picks = np.minimum(picks, len(model.classes) - 1)
    return np.asarray(model.classes, dtype=np.int64)[picks]
