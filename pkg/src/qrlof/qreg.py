"""Check loss, its derivative, and exact linear quantile regression.

The fit is computed by a vertex-descent simplex on the primal problem
(Barrodale-Roberts style): the iterate is always a basic solution, i.e. a
coefficient vector that interpolates ``q`` observations, so residuals of the
basic observations are exactly zero and the sign-count optimality conditions
hold without tolerance.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
from numba import njit
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from .exceptions import (
    DomainError,
    InputError,
    SingularDesignError,
    SolverError,
    UnderdeterminedError,
)

__all__ = [
    "DataSample",
    "QuantileFit",
    "check_loss",
    "psi",
    "model_gradient",
    "design_matrix",
    "fit_linear_quantile",
    "fit_design",
    "LinearQuantileRegressor",
]


def _check_tau(tau):
    tau = float(tau)
    if not 0.0 < tau < 1.0:
        raise DomainError(f"tau must lie in (0, 1), got {tau!r}")
    return tau


def _readonly(a):
    a = np.array(a, dtype=np.float64, order="C", copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class DataSample:
    """Covariates (n x d) and response (n,)."""

    covariates: np.ndarray
    response: np.ndarray

    def __post_init__(self):
        X = np.asarray(self.covariates, dtype=np.float64)
        y = np.asarray(self.response, dtype=np.float64)
        if X.ndim == 1:
            X = X.reshape(-1, 1)
        if X.ndim != 2 or y.ndim != 1:
            raise InputError("covariates must be 2-D and response 1-D")
        if X.shape[0] < 1 or X.shape[1] < 1:
            raise InputError(f"need n >= 1 and d >= 1, got shape {X.shape}")
        if X.shape[0] != y.shape[0]:
            raise InputError(
                f"covariates have {X.shape[0]} rows but response has {y.shape[0]}"
            )
        if not (np.isfinite(X).all() and np.isfinite(y).all()):
            raise InputError("covariates and response must be finite")
        object.__setattr__(self, "covariates", _readonly(X))
        object.__setattr__(self, "response", _readonly(y))

    @property
    def n(self):
        return self.covariates.shape[0]

    @property
    def d(self):
        return self.covariates.shape[1]

    def select(self, columns):
        """Sample restricted to the given covariate columns (in that order)."""
        return DataSample(self.covariates[:, list(columns)], self.response)


@dataclass(frozen=True, eq=False)
class QuantileFit:
    tau: float
    theta: np.ndarray
    residuals: np.ndarray
    objective: float
    design_has_intercept: bool
    basis: np.ndarray = field(repr=False)
    iterations: int = field(default=0, repr=False)

    @property
    def n(self):
        return self.residuals.shape[0]

    @property
    def q(self):
        return self.theta.shape[0]


def check_loss(r, tau):
    """Quantile check loss ``rho_tau``; works elementwise on arrays."""
    tau = _check_tau(tau)
    r = np.asarray(r, dtype=np.float64)
    out = np.where(r > 0, tau * r, np.where(r < 0, (tau - 1.0) * r, 0.0))
    return out if out.ndim else float(out)


def psi(r, tau):
    """Derivative of the check loss, with ``psi(0) = 0``."""
    tau = _check_tau(tau)
    r = np.asarray(r, dtype=np.float64)
    out = np.where(r > 0, tau, np.where(r < 0, tau - 1.0, 0.0))
    return out if out.ndim else float(out)


def model_gradient(x, theta=None, with_intercept=True):
    """Gradient of the linear model ``x'theta`` in ``theta``.

    Accepts a single point (1-D) or a matrix of points (one per row). ``theta``
    is only used for a dimension check; the gradient does not depend on it.
    """
    x = np.asarray(x, dtype=np.float64)
    single = x.ndim == 1
    G = design_matrix(x.reshape(1, -1) if single else x, with_intercept)
    if theta is not None and np.size(theta) != G.shape[1]:
        raise InputError(
            f"theta has length {np.size(theta)}, expected {G.shape[1]}"
        )
    return G[0] if single else G


def design_matrix(X, with_intercept=True):
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X.reshape(-1, 1)
    # C order regardless of how X was sliced, so BLAS rounding does not depend on layout
    if with_intercept:
        return np.ascontiguousarray(np.column_stack([np.ones(X.shape[0]), X]))
    return np.array(X, order="C")


@njit(cache=True)
def _rho(z, tau):
    if z > 0.0:
        return tau * z
    if z < 0.0:
        return (tau - 1.0) * z
    return 0.0


@njit(cache=True, nogil=True)
def _residuals(X, y, theta, basis):
    n, q = X.shape
    r = np.empty(n)
    for i in range(n):
        fit = 0.0
        mag = abs(y[i])
        for j in range(q):
            fit += X[i, j] * theta[j]
            mag += abs(X[i, j] * theta[j])
        ri = y[i] - fit
        # floating noise on exact ties is zeroed so degenerate vertices are seen
        if abs(ri) <= 1e-12 * mag:
            ri = 0.0
        r[i] = ri
    for k in range(q):
        r[basis[k]] = 0.0
    return r


@njit(cache=True, nogil=True)
def _vertex_descent(X, y, tau, basis0, max_iter):
    n, q = X.shape
    h = basis0.copy()
    inb = np.zeros(n, dtype=np.bool_)
    for k in range(q):
        inb[h[k]] = True
    XB = np.empty((q, q))
    for k in range(q):
        XB[k, :] = X[h[k], :]
    Binv = np.linalg.inv(XB)
    yb = np.empty(q)
    ts = np.empty(n)
    ws = np.empty(n)
    idx = np.empty(n, dtype=np.int64)

    for it in range(max_iter):
        for k in range(q):
            yb[k] = y[h[k]]
        theta = Binv @ yb
        r = _residuals(X, y, theta, h)
        Z = X @ Binv

        best = 0.0
        bk = -1
        bs = 0.0
        for k in range(q):
            g = 0.0
            dp = 0.0
            dm = 0.0
            absz = 0.0
            for i in range(n):
                if inb[i]:
                    continue
                z = Z[i, k]
                absz += abs(z)
                ri = r[i]
                if ri > 0.0:
                    g += tau * z
                elif ri < 0.0:
                    g += (tau - 1.0) * z
                else:
                    dp += _rho(-z, tau)
                    dm += _rho(z, tau)
            tol = 1e-11 * (1.0 + absz)
            d_plus = -g + dp + (1.0 - tau)
            d_minus = g + dm + tau
            if d_plus < -tol and d_plus < best:
                best, bk, bs = d_plus, k, 1.0
            if d_minus < -tol and d_minus < best:
                best, bk, bs = d_minus, k, -1.0

        if bk < 0:
            for k in range(q):
                XB[k, :] = X[h[k], :]
                yb[k] = y[h[k]]
            theta = np.linalg.solve(XB, yb)
            r = _residuals(X, y, theta, h)
            return h, theta, r, it, 0

        # exact line search along the edge: the objective is convex piecewise
        # linear in the step, its slope rises by |z_i| at every zero crossing
        m = 0
        for i in range(n):
            if inb[i] or r[i] == 0.0:
                continue
            zd = bs * Z[i, bk]
            if zd == 0.0:
                continue
            t = r[i] / zd
            if t > 0.0:
                ts[m] = t
                ws[m] = abs(zd)
                idx[m] = i
                m += 1
        if m == 0:
            return h, theta, r, it, 2
        order = np.argsort(ts[:m], kind="mergesort")
        slope = best
        enter = -1
        for j in range(m):
            slope += ws[order[j]]
            if slope >= 0.0:
                enter = idx[order[j]]
                break
        if enter < 0:
            return h, theta, r, it, 2

        w = Z[enter, :].copy()
        wk = w[bk]
        col = Binv[:, bk].copy()
        for j in range(q):
            if j == bk:
                Binv[:, j] = col / wk
            else:
                Binv[:, j] = Binv[:, j] - col * (w[j] / wk)
        inb[h[bk]] = False
        inb[enter] = True
        h[bk] = enter
        if it % 32 == 31:
            for k in range(q):
                XB[k, :] = X[h[k], :]
            Binv = np.linalg.inv(XB)

    return h, theta, r, max_iter, 1


def _initial_basis(G):
    n, q = G.shape
    if n < q:
        raise UnderdeterminedError(
            f"need at least q={q} observations, got n={n}"
        )
    _, R, piv = scipy.linalg.qr(G.T, mode="economic", pivoting=True)
    diag = np.abs(np.diag(R))
    if diag.size < q or diag[q - 1] <= max(n, q) * np.finfo(float).eps * diag[0]:
        raise SingularDesignError(
            f"design matrix ({n} x {q}) is not of full column rank"
        )
    return np.sort(piv[:q]).astype(np.int64)


def fit_design(G, y, tau, with_intercept=True, warm_basis=None):
    """Fit the quantile regression of ``y`` on an explicit design matrix ``G``.

    ``warm_basis`` (q row indices) seeds the descent; it must index a
    nonsingular q x q submatrix, and falls back to a cold start otherwise.
    """
    tau = _check_tau(tau)
    G = np.ascontiguousarray(G, dtype=np.float64)
    y = np.ascontiguousarray(y, dtype=np.float64)
    n, q = G.shape
    if warm_basis is None:
        basis0 = _initial_basis(G)
    else:
        basis0 = np.asarray(warm_basis, dtype=np.int64)
        if np.linalg.cond(G[basis0]) > 1e12:
            basis0 = _initial_basis(G)
    h, theta, r, iters, status = _vertex_descent(G, y, tau, basis0, 50 * n + 1000)
    if status == 1:
        raise SolverError(f"simplex did not converge in {iters} pivots")
    if status == 2:
        raise SolverError("objective unbounded along an edge; design is degenerate")
    objective = float(np.sum(check_loss(r, tau)))
    return QuantileFit(
        tau=tau,
        theta=_readonly(theta),
        residuals=_readonly(r),
        objective=objective,
        design_has_intercept=bool(with_intercept),
        basis=np.sort(h),
        iterations=int(iters),
    )


def fit_linear_quantile(sample, tau, with_intercept=True):
    """Minimise the summed check loss of ``Y - design @ theta`` exactly."""
    G = design_matrix(sample.covariates, with_intercept)
    return fit_design(G, sample.response, tau, with_intercept=with_intercept)


class LinearQuantileRegressor(RegressorMixin, BaseEstimator):
    """Linear quantile regression with exact (basic) LP solutions.

    Parameters
    ----------
    tau : float, default=0.5
        Quantile level in (0, 1).
    fit_intercept : bool, default=True
        Prepend a constant column to the design.
    """

    def __init__(self, tau=0.5, fit_intercept=True):
        self.tau = tau
        self.fit_intercept = fit_intercept

    def fit(self, X, y):
        X, y = check_X_y(X, y, y_numeric=True, dtype=np.float64)
        fit = fit_linear_quantile(DataSample(X, y), self.tau, self.fit_intercept)
        self.fit_ = fit
        self.n_features_in_ = X.shape[1]
        if self.fit_intercept:
            self.intercept_ = float(fit.theta[0])
            self.coef_ = np.array(fit.theta[1:])
        else:
            self.intercept_ = 0.0
            self.coef_ = np.array(fit.theta)
        self.residuals_ = np.array(fit.residuals)
        self.objective_ = fit.objective
        return self

    def predict(self, X):
        check_is_fitted(self, "fit_")
        X = check_array(X, dtype=np.float64)
        if X.shape[1] != self.n_features_in_:
            raise InputError(f"X has {X.shape[1]} features, expected {self.n_features_in_}")
        return X @ self.coef_ + self.intercept_
