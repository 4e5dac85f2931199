"""He-Zhu type statistic on multivariate half-space indicators ``I(X_i <= t)``."""
from __future__ import annotations

import numpy as np

from .exceptions import InputError
from .projection import LofStatistic, _marks, quadratic_statistic

__all__ = ["indicator_matrix", "hz_weight_matrix", "hz_statistic"]


def indicator_matrix(X):
    """``L[i, j] = I(X_i <= X_j)`` componentwise over all columns."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X.reshape(-1, 1)
    return np.all(X[:, None, :] <= X[None, :, :], axis=2)


def hz_weight_matrix(X):
    """``L L'``: the statistic is then ``n^-2 V' (L L') V`` like the projection one."""
    L = indicator_matrix(X).astype(np.float64)
    W = L @ L.T
    W.setflags(write=False)
    return W


def hz_statistic(fit, X, G=None, W=None):
    """Largest eigenvalue of ``n^-1 sum_j R(X_j) R(X_j)'``.

    ``R(t) = n^-1/2 sum_i psi(r_i) g(X_i) I(X_i <= t)``. ``X`` supplies the
    indicator covariates; pass ``G`` when the gradient comes from a smaller
    null design, and ``W`` to reuse a precomputed :func:`hz_weight_matrix`.
    """
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X.reshape(-1, 1)
    if X.shape[0] != fit.n:
        raise InputError(f"{X.shape[0]} covariate rows for {fit.n} residuals")
    V = _marks(fit, X, G)
    if W is None:
        W = hz_weight_matrix(X)
    value, M = quadratic_statistic(V, W)
    return LofStatistic(value=float(value), core_matrix=M)
