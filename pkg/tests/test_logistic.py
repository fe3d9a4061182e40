import numpy as np
import pytest

from synthbench.dataset import ColumnKind
from synthbench.errors import FitError
from synthbench.models import fit_logistic
from synthbench.models.design import Predictors
from synthbench.models.logistic import (
    softmax_information,
    softmax_loglik,
    softmax_score,
)

NUM = ColumnKind.numeric()


def cat(k):
    return ColumnKind.categorical(tuple(f"l{i}" for i in range(k)))


def predictors(names, kinds, cols):
    return Predictors(tuple(names), tuple(kinds), tuple(np.asarray(c) for c in cols))


def fd_score(M, y_pos, B, h=1e-6):
    """Central finite differences of the log-likelihood in each coefficient."""
    g = np.zeros_like(B, dtype=np.float64)
    for i in range(B.shape[0]):
        for j in range(B.shape[1]):
            up = B.copy()
            up[i, j] += h
            dn = B.copy()
            dn[i, j] -= h
            g[i, j] = (softmax_loglik(M, y_pos, up) - softmax_loglik(M, y_pos, dn)) / (2 * h)
    return g


def test_score_matches_finite_differences_at_random_point():
    rng = np.random.default_rng(5)
    n, k = 150, 3
    M = np.column_stack([np.ones(n), rng.normal(size=n), rng.normal(size=n)])
    y_pos = rng.integers(0, k, n)
    B = rng.normal(scale=0.5, size=(k - 1, 3))
    analytic = softmax_score(M, y_pos, B)
    numeric = fd_score(M, y_pos, B)
    scale = max(1.0, np.abs(analytic).max())
    assert np.abs(analytic - numeric).max() / scale < 1e-6


def test_information_matches_finite_differences_of_score():
    rng = np.random.default_rng(6)
    n, k = 60, 3
    M = np.column_stack([np.ones(n), rng.normal(size=n)])
    y_pos = rng.integers(0, k, n)
    B = rng.normal(scale=0.3, size=(k - 1, 2))
    info = softmax_information(M, B)
    h = 1e-6
    p = B.size
    fd = np.zeros((p, p))
    for col in range(p):
        up = B.copy().reshape(-1)
        up[col] += h
        dn = B.copy().reshape(-1)
        dn[col] -= h
        s_up = softmax_score(M, y_pos, up.reshape(B.shape)).reshape(-1)
        s_dn = softmax_score(M, y_pos, dn.reshape(B.shape)).reshape(-1)
        fd[:, col] = -(s_up - s_dn) / (2 * h)
    assert np.abs(info - fd).max() < 1e-4


def test_fitted_probabilities_sum_to_class_counts():
    # the intercept score equations force sum_i p_ik = n_k at the optimum
    rng = np.random.default_rng(12)
    x = rng.normal(size=400)
    y = rng.integers(0, 3, 400)
    X = predictors(["x"], [NUM], [x])
    model = fit_logistic(X, y)
    assert model.converged
    probs = model.predict_proba((x,))
    counts = np.bincount(y, minlength=3).astype(np.float64)
    assert probs.sum(axis=0) == pytest.approx(counts.tolist(), abs=1e-5)


def test_recovery_of_generating_coefficients():
    rng = np.random.default_rng(7)
    n = 6000
    x = rng.normal(size=n)
    true_b = np.asarray([[0.4, 1.2], [-0.3, -0.8]])  # classes 1, 2 vs 0
    logits = np.column_stack([np.zeros(n), true_b[0, 0] + true_b[0, 1] * x, true_b[1, 0] + true_b[1, 1] * x])
    expz = np.exp(logits - logits.max(axis=1, keepdims=True))
    probs = expz / expz.sum(axis=1, keepdims=True)
    u = rng.random(n)
    y = (probs.cumsum(axis=1) < u[:, None]).sum(axis=1)
    X = predictors(["x"], [NUM], [x])
    model = fit_logistic(X, y)
    assert model.converged and not model.separated
    assert model.coef == pytest.approx(true_b, abs=0.15)
    assert np.max(np.abs(softmax_score(np.column_stack([np.ones(n), x]), y, model.coef))) < 1e-6


def test_probabilities_normalize():
    rng = np.random.default_rng(8)
    x = rng.normal(size=500)
    y = rng.integers(0, 3, 500)
    X = predictors(["x"], [NUM], [x])
    model = fit_logistic(X, y)
    probs = model.predict_proba((x,))
    assert np.abs(probs.sum(axis=1) - 1.0).max() < 1e-12
    assert probs.min() >= 0.0


def test_separation_is_flagged_and_capped():
    x = np.linspace(-2.0, 2.0, 80)
    y = (x > 0).astype(np.int64)
    X = predictors(["x"], [NUM], [x])
    model = fit_logistic(X, y)
    assert model.separated
    assert np.abs(model.coef).max() <= 30.0


def test_single_observed_class_is_an_error():
    X = predictors(["x"], [NUM], [np.arange(10.0)])
    with pytest.raises(FitError):
        fit_logistic(X, np.zeros(10, dtype=np.int64))


def test_reference_class_is_first_observed():
    rng = np.random.default_rng(9)
    x = rng.normal(size=90)
    y = np.asarray([2, 0, 1] * 30)  # observed classes 0, 1, 2
    model = fit_logistic(predictors(["x"], [NUM], [x]), y)
    assert model.classes == (0, 1, 2)
    assert model.coef.shape == (2, 2)
