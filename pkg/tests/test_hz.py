import numpy as np
import pytest

from qrlof import DataSample, fit_linear_quantile, hz_statistic
from qrlof.hz import indicator_matrix
from qrlof.qreg import QuantileFit


def naive_hz(fit, X):
    n = X.shape[0]
    G = np.column_stack([np.ones(n), X])
    tau = fit.tau
    M = np.zeros((G.shape[1], G.shape[1]))
    for j in range(n):
        R = np.zeros(G.shape[1])
        for i in range(n):
            if all(X[i, k] <= X[j, k] for k in range(X.shape[1])):
                r = fit.residuals[i]
                p = tau if r > 0 else (tau - 1 if r < 0 else 0.0)
                R += p * G[i]
        R /= np.sqrt(n)
        M += np.outer(R, R)
    M /= n
    return np.linalg.eigvalsh(M)[-1]


def test_zero_residuals():
    X = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
    fit = fit_linear_quantile(DataSample(X, np.array([3.0, 1.0, 2.0])), 0.5)
    assert hz_statistic(fit, X).value == 0.0


def test_single_observation():
    # n = 1 cannot leave a residual in a fitted model, so the fit is built by hand
    X = np.array([[2.0, -1.0]])
    fake = QuantileFit(tau=0.3, theta=np.array([0.0, 0.0, 0.0]), residuals=np.array([-2.0]),
                       objective=1.4, design_has_intercept=True, basis=np.array([0]))
    g = np.array([1.0, 2.0, -1.0])
    assert hz_statistic(fake, X).value == pytest.approx((0.3 - 1) ** 2 * g @ g, rel=1e-14)


@pytest.mark.parametrize("seed", range(4))
def test_matches_naive_loops(seed):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(15, 1))
    y = 1 + X[:, 0] ** 2 + rng.normal(size=15)
    fit = fit_linear_quantile(DataSample(X, y), 0.4)
    assert abs(hz_statistic(fit, X).value - naive_hz(fit, X)) <= 1e-12


def test_matches_naive_loops_multivariate():
    rng = np.random.default_rng(9)
    X = np.round(rng.normal(size=(20, 3)), 1)  # ties in components
    y = X.sum(axis=1) + rng.normal(size=20)
    fit = fit_linear_quantile(DataSample(X, y), 0.5)
    assert abs(hz_statistic(fit, X).value - naive_hz(fit, X)) <= 1e-12


def test_psd():
    rng = np.random.default_rng(1)
    X = rng.uniform(size=(40, 2))
    fit = fit_linear_quantile(DataSample(X, rng.normal(size=40)), 0.5)
    s = hz_statistic(fit, X)
    ev = np.linalg.eigvalsh(s.core_matrix)
    assert s.value >= 0 and ev[0] >= -1e-8 * np.trace(s.core_matrix)


def test_monotone_transform_invariance():
    rng = np.random.default_rng(2)
    X = rng.uniform(0.1, 2.0, size=(30, 2))
    y = 1 + X.sum(axis=1) + rng.normal(size=30)
    fit = fit_linear_quantile(DataSample(X, y), 0.5)
    G = np.column_stack([np.ones(30), X])
    Xt = X.copy()
    Xt[:, 1] = np.log(Xt[:, 1]) ** 3
    assert np.array_equal(indicator_matrix(X), indicator_matrix(Xt))
    assert hz_statistic(fit, Xt, G=G).value == hz_statistic(fit, X, G=G).value


def test_indicator_degeneracy_grows_with_dimension():
    # mean number of other points dominated by each point, independent continuous covariates
    rng = np.random.default_rng(3)
    means = {}
    for d in (2, 5, 10, 20):
        counts = []
        for _ in range(200):
            L = indicator_matrix(rng.normal(size=(50, d)))
            counts.append((L.sum() - 50) / 50)
        counts = np.array(counts)
        means[d] = (counts.mean(), counts.std(ddof=1) / np.sqrt(counts.size))
    ds = sorted(means)
    for a, b in zip(ds, ds[1:]):
        (ma, sa), (mb, sb) = means[a], means[b]
        assert ma - mb > 1.96 * np.hypot(sa, sb)
