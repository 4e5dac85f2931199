import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.stats import ortho_group

from qrlof import DataSample, InputError, fit_linear_quantile
from qrlof.projection import (
    complementary_angle,
    lof_statistic,
    mc_statistic,
    projected_process,
    scale_constant,
    sphere_area,
    weight_matrix,
)


def scalar_angle(u, v):
    """Independent evaluation via Kahan's half-angle atan2, with the zero-vector rules."""
    nu = math.sqrt(sum(a * a for a in u))
    nv = math.sqrt(sum(b * b for b in v))
    if nu == 0 and nv == 0:
        return 2 * math.pi
    if nu == 0 or nv == 0:
        return math.pi
    a = [x / nu for x in u]
    b = [x / nv for x in v]
    diff = math.sqrt(sum((x - y) ** 2 for x, y in zip(a, b)))
    plus = math.sqrt(sum((x + y) ** 2 for x, y in zip(a, b)))
    return math.pi - 2.0 * math.atan2(diff, plus)


def scalar_weight_matrix(X):
    n, d = len(X), len(X[0])
    c = math.pi ** (d / 2 - 1) / math.gamma(d / 2 + 1)
    out = [[0.0] * n for _ in range(n)]
    for i in range(n):
        for j in range(n):
            s = 0.0
            for r in range(n):
                u = [X[i][k] - X[r][k] for k in range(d)]
                v = [X[j][k] - X[r][k] for k in range(d)]
                s += scalar_angle(u, v)
            out[i][j] = c * s
    return np.array(out)


def model1(n, d=2, seed=0, tau=0.5):
    rng = np.random.default_rng(seed)
    X = rng.uniform(size=(n, d))
    y = 1 + X.sum(axis=1) + rng.normal(size=n)
    return X, fit_linear_quantile(DataSample(X, y), tau)


class TestComplementaryAngle:
    def test_same_direction(self):
        assert complementary_angle([1, 0], [1, 0]) == pytest.approx(np.pi, abs=1e-15)

    def test_opposite(self):
        assert complementary_angle([1, 0], [-1, 0]) == pytest.approx(0.0, abs=1e-15)

    def test_orthogonal(self):
        assert complementary_angle([1, 0], [0, 1]) == pytest.approx(np.pi / 2, abs=1e-15)

    def test_degenerate(self):
        assert complementary_angle([0, 0], [0, 0]) == 2 * np.pi
        assert complementary_angle([0, 0], [3, 1]) == np.pi
        assert complementary_angle([3, 1], [0, 0]) == np.pi

    def test_collinear_no_nan(self):
        u = np.array([1e-8, 3.0, 1.0 / 3.0])
        assert np.isfinite(complementary_angle(u, 7 * u))


class TestWeightMatrix:
    def test_single_point(self):
        for d in (1, 2, 5):
            A = weight_matrix(np.zeros((1, d)))
            assert A.values[0, 0] == pytest.approx(2 * np.pi * scale_constant(d), rel=1e-15)

    def test_two_points_hand_value(self):
        A = weight_matrix(np.array([[0.0, 0.0], [1.0, 0.0]]))
        assert A.scale_constant == pytest.approx(1.0, rel=1e-15)
        expected = np.array([[3 * np.pi, 2 * np.pi], [2 * np.pi, 3 * np.pi]])
        np.testing.assert_allclose(A.values, expected, rtol=1e-15)
        np.testing.assert_allclose(A.values, scalar_weight_matrix([[0, 0], [1, 0]]), rtol=1e-14)

    @pytest.mark.parametrize("d", [1, 2, 3, 6])
    def test_against_scalar_script(self, d):
        rng = np.random.default_rng(d)
        X = rng.normal(size=(9, d))
        X[4] = X[2]  # duplicate row exercises the zero-vector rules
        np.testing.assert_allclose(weight_matrix(X).values, scalar_weight_matrix(X.tolist()),
                                   rtol=1e-9, atol=1e-9)

    def test_exact_symmetry_and_bounds(self):
        X = np.random.default_rng(1).normal(size=(40, 4))
        A = weight_matrix(X)
        assert np.array_equal(A.values, A.values.T)
        assert np.all(A.values >= 0)
        assert np.all(A.values <= 40 * 2 * np.pi * A.scale_constant)

    def test_rotation_invariance(self):
        rng = np.random.default_rng(2)
        X = rng.normal(size=(30, 3))
        Q = ortho_group.rvs(3, random_state=5)
        np.testing.assert_allclose(weight_matrix(X @ Q).values, weight_matrix(X).values,
                                   atol=1e-9, rtol=0)

    def test_thread_count_bit_identical(self):
        X = np.random.default_rng(3).normal(size=(70, 3))
        a = weight_matrix(X, n_jobs=1).values
        b = weight_matrix(X, n_jobs=4).values
        assert np.array_equal(a, b)

    def test_rejects_non_finite(self):
        with pytest.raises(InputError):
            weight_matrix(np.array([[0.0], [np.inf]]))

    def test_constants(self):
        assert scale_constant(2) == pytest.approx(1.0)
        assert sphere_area(2) == pytest.approx(2 * np.pi)
        assert sphere_area(3) == pytest.approx(4 * np.pi)
        assert scale_constant(3) == pytest.approx(np.pi ** 0.5 / math.gamma(2.5))


class TestLofStatistic:
    def test_interpolation_gives_zero(self):
        X = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
        fit = fit_linear_quantile(DataSample(X, np.array([1.0, 2.0, 5.0])), 0.5)
        assert np.all(fit.residuals == 0)
        assert lof_statistic(fit, X, weight_matrix(X)).value == 0.0

    def test_homogeneity(self):
        X, fit = model1(30, seed=1)
        A = weight_matrix(X)
        t1 = lof_statistic(fit, X, A).value
        t3 = lof_statistic(fit, X, A.scaled(3.0)).value
        assert t3 == pytest.approx(3 * t1, rel=1e-13)
        t4 = lof_statistic(fit, X, A.scaled(4.0)).value
        assert t4 == 4 * t1  # power-of-two scaling is exact in floating point

    def test_core_matrix_psd_and_top_eigenvalue(self):
        X, fit = model1(40, d=3, seed=2)
        s = lof_statistic(fit, X, weight_matrix(X))
        M = s.core_matrix
        assert np.max(np.abs(M - M.T)) <= 1e-10
        ev = np.linalg.eigvalsh(M)
        assert ev[0] >= -1e-8 * np.trace(M)
        assert s.value == pytest.approx(ev[-1], rel=1e-9)

    def test_direct_double_sum(self):
        X, fit = model1(15, seed=3)
        A = weight_matrix(X).values
        G = np.column_stack([np.ones(15), X])
        p = np.where(fit.residuals > 0, 0.5, np.where(fit.residuals < 0, -0.5, 0.0))
        M = np.zeros((3, 3))
        for i in range(15):
            for j in range(15):
                M += p[i] * p[j] * np.outer(G[i], G[j]) * A[i, j]
        M /= 15**2
        assert lof_statistic(fit, X, weight_matrix(X)).value == pytest.approx(
            np.linalg.eigvalsh((M + M.T) / 2)[-1], rel=1e-12)

    def test_permutation_invariance(self):
        X, fit = model1(35, seed=4)
        T = lof_statistic(fit, X, weight_matrix(X)).value
        perm = np.random.default_rng(0).permutation(35)
        Xp = X[perm]
        fitp = fit_linear_quantile(
            DataSample(Xp, (np.column_stack([np.ones(35), X]) @ fit.theta + fit.residuals)[perm]),
            0.5)
        Tp = lof_statistic(fitp, Xp, weight_matrix(Xp)).value
        assert abs(T - Tp) <= 1e-10 * max(1.0, T)

    def test_dimension_mismatch(self):
        X, fit = model1(10)
        with pytest.raises(InputError):
            lof_statistic(fit, X, weight_matrix(X[:9]))


class TestProjectedProcess:
    def test_all_indicators_on(self):
        X, fit = model1(20, seed=5)
        beta = np.array([0.6, 0.8])
        u = (X @ beta).max()
        G = np.column_stack([np.ones(20), X])
        expected = (np.where(fit.residuals > 0, 0.5, np.where(fit.residuals < 0, -0.5, 0))[:, None]
                    * G).sum(axis=0) / np.sqrt(20)
        np.testing.assert_allclose(projected_process(fit, X, beta, u), expected, atol=1e-15)

    def test_all_indicators_off(self):
        X, fit = model1(20, seed=5)
        beta = np.array([0.6, 0.8])
        out = projected_process(fit, X, beta, (X @ beta).min() - 1.0)
        np.testing.assert_array_equal(out, np.zeros(3))

    def test_median_fit_intercept_coordinate_bound(self):
        X, fit = model1(51, seed=6)
        beta = np.array([1.0, 0.0])
        first = projected_process(fit, X, beta, np.inf)[0]
        neg = np.count_nonzero(fit.residuals < 0)
        pos = np.count_nonzero(fit.residuals > 0)
        assert first == pytest.approx(0.5 * (pos - neg) / np.sqrt(51), abs=1e-14)
        assert abs(first) <= fit.q * 0.5 / np.sqrt(51)

    def test_requires_unit_beta(self):
        X, fit = model1(10)
        with pytest.raises(InputError):
            projected_process(fit, X, np.array([1.0, 1.0]), 0.0)


class TestMonteCarloOracle:
    def test_zero_residuals(self):
        X = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
        fit = fit_linear_quantile(DataSample(X, np.array([1.0, 2.0, 5.0])), 0.5)
        assert mc_statistic(fit, X, 10, np.random.default_rng(0)) == 0.0

    def test_d2_agrees(self):
        X, fit = model1(25, seed=7)
        T = lof_statistic(fit, X, weight_matrix(X)).value
        mc = mc_statistic(fit, X, 50_000, np.random.default_rng(1))
        assert mc == pytest.approx(T, rel=0.03)

    def test_d1_exact_limit(self):
        # for d=1 the sphere is {-1, +1}: two directions give the integral exactly
        X, fit = model1(12, d=1, seed=8)
        T = lof_statistic(fit, X, weight_matrix(X)).value
        mc = mc_statistic(fit, X, 40_000, np.random.default_rng(2))
        assert mc == pytest.approx(T * sphere_area(1) / (2 * np.pi * scale_constant(1)),
                                   rel=0.03)

    def test_d3_ratio_is_half_dimension(self):
        # sphere measure vs printed constant differ by Gamma(d/2 + 1) / Gamma(d/2) = d/2
        X, fit = model1(20, d=3, seed=10)
        T = lof_statistic(fit, X, weight_matrix(X)).value
        mc = mc_statistic(fit, X, 50_000, np.random.default_rng(4))
        assert mc / T == pytest.approx(1.5, rel=0.03)

    def test_process_integrand_matches_mc_definition(self):
        # one direction, integrand built from projected_process by hand
        X, fit = model1(10, seed=9)
        rng = np.random.default_rng(3)
        beta = rng.standard_normal(2)
        beta /= np.linalg.norm(beta)
        R = np.array([projected_process(fit, X, beta, u) for u in X @ beta])
        M = sphere_area(2) * R.T @ R / 10
        mc = mc_statistic(fit, X, 1, np.random.default_rng(3))
        assert mc == pytest.approx(np.linalg.eigvalsh(M)[-1], rel=1e-12)


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 10_000), n=st.integers(3, 25), d=st.integers(1, 5))
def test_weight_matrix_properties(seed, n, d):
    X = np.random.default_rng(seed).normal(size=(n, d))
    A = weight_matrix(X).values
    assert np.array_equal(A, A.T)
    assert A.min() >= 0
    perm = np.random.default_rng(seed + 1).permutation(n)
    np.testing.assert_allclose(weight_matrix(X[perm]).values, A[np.ix_(perm, perm)],
                               rtol=1e-12, atol=1e-12)
