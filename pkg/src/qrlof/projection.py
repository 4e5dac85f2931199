"""Projection-based cumulative-sum statistic and its angle weight matrix.

Integrating products of half-space indicators ``I(b'(X_i - X_r) <= 0)`` over
directions ``b`` on the unit sphere reduces to the angle between the
difference vectors ``X_i - X_r`` and ``X_j - X_r``. Summing over ``r`` gives
an n x n weight matrix that depends only on the covariates, so it is built
once per dataset and reused for every bootstrap replicate.
"""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln

from .exceptions import InputError
from .qreg import design_matrix, psi

__all__ = [
    "ProjectionWeightMatrix",
    "LofStatistic",
    "complementary_angle",
    "scale_constant",
    "sphere_area",
    "weight_matrix",
    "quadratic_statistic",
    "lof_statistic",
    "projected_process",
    "mc_statistic",
]

# fixed block of r-indices per task; independent of the number of threads
_R_BLOCK = 16


@dataclass(frozen=True, eq=False)
class ProjectionWeightMatrix:
    values: np.ndarray
    dimension_d: int
    scale_constant: float

    def scaled(self, c):
        return ProjectionWeightMatrix(self.values * c, self.dimension_d, self.scale_constant * c)


@dataclass(frozen=True, eq=False)
class LofStatistic:
    value: float
    core_matrix: np.ndarray


def complementary_angle(u, v):
    """``pi`` minus the angle between ``u`` and ``v``, in radians.

    A zero vector points nowhere: one zero vector gives ``pi``, two give
    ``2 pi`` (the sphere measure of the corresponding indicator products).
    """
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    nu = np.linalg.norm(u)
    nv = np.linalg.norm(v)
    if nu == 0.0 and nv == 0.0:
        return 2.0 * np.pi
    if nu == 0.0 or nv == 0.0:
        return np.pi
    a, b = u / nu, v / nv
    c = np.clip(np.dot(a, b), -1.0, 1.0)
    if abs(c) > 1.0 - 1e-6:
        return float(np.pi - 2.0 * np.arctan2(np.linalg.norm(a - b), np.linalg.norm(a + b)))
    return float(np.pi - np.arccos(c))


def scale_constant(d):
    """``pi^(d/2 - 1) / Gamma(d/2 + 1)``."""
    return float(np.exp((d / 2.0 - 1.0) * np.log(np.pi) - gammaln(d / 2.0 + 1.0)))


def sphere_area(d):
    """Surface measure of the unit sphere in R^d, ``2 pi^(d/2) / Gamma(d/2)``."""
    return float(np.exp(np.log(2.0) + (d / 2.0) * np.log(np.pi) - gammaln(d / 2.0)))


def _angle_block(X, rs):
    n = X.shape[0]
    acc = np.zeros((n, n))
    for r in rs:
        D = X - X[r]
        norms = np.sqrt(np.einsum("ij,ij->i", D, D))
        zero = norms == 0.0
        safe = np.where(zero, 1.0, norms)
        U = D / safe[:, None]
        C = np.clip(U @ U.T, -1.0, 1.0)
        ang = np.pi - np.arccos(C)
        # arccos loses half the digits near +-1; redo those pairs with the
        # half-angle form 2 atan2(|a - b|, |a + b|)
        ii, jj = np.nonzero(np.abs(C) > 1.0 - 1e-6)
        if ii.size:
            a, b = U[ii], U[jj]
            ang[ii, jj] = np.pi - 2.0 * np.arctan2(np.linalg.norm(a - b, axis=1),
                                                   np.linalg.norm(a + b, axis=1))
        np.fill_diagonal(ang, np.pi)
        ang[zero, :] = np.pi
        ang[:, zero] = np.pi
        ang[np.ix_(zero, zero)] = 2.0 * np.pi
        acc += 0.5 * (ang + ang.T)
    return acc


def weight_matrix(X, n_jobs=1):
    """Accumulated complementary-angle weights for covariates ``X`` (n x d).

    ``values[i, j] = c_d * sum_r angle(X_i - X_r, X_j - X_r)``. Work is split
    in fixed blocks of ``r`` and reduced in block order, so the result is
    bit-identical for any ``n_jobs``.
    """
    X = np.ascontiguousarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X.reshape(-1, 1)
    if X.ndim != 2 or X.shape[0] < 1 or X.shape[1] < 1:
        raise InputError(f"covariates must be a non-empty 2-D array, got {X.shape}")
    if not np.isfinite(X).all():
        raise InputError("covariates must be finite")
    n, d = X.shape
    blocks = [range(s, min(s + _R_BLOCK, n)) for s in range(0, n, _R_BLOCK)]
    if n_jobs == 1 or len(blocks) == 1:
        partial = [_angle_block(X, b) for b in blocks]
    else:
        with ThreadPoolExecutor(max_workers=n_jobs) as ex:
            partial = list(ex.map(lambda b: _angle_block(X, b), blocks))
    total = partial[0]
    for p in partial[1:]:
        total = total + p
    c = scale_constant(d)
    values = total * c
    values.setflags(write=False)
    return ProjectionWeightMatrix(values=values, dimension_d=d, scale_constant=c)


def _top_eigenvalue(M):
    M = 0.5 * (M + np.swapaxes(M, -1, -2))
    return np.linalg.eigvalsh(M)[..., -1], M


def quadratic_statistic(marks, W):
    """Largest eigenvalue of ``n^-2 V' W V`` for marks ``V`` (n x q).

    ``marks`` may carry a leading batch axis (B x n x q); ``W`` is n x n.
    """
    V = np.asarray(marks, dtype=np.float64)
    n = V.shape[-2]
    WV = np.matmul(W, V)
    M = np.matmul(np.swapaxes(V, -1, -2), WV) / float(n * n)
    value, M = _top_eigenvalue(M)
    return value, M


def _marks(fit, X, G=None):
    if G is None:
        G = design_matrix(X, fit.design_has_intercept)
    G = np.asarray(G, dtype=np.float64)
    if G.shape != (fit.n, fit.q):
        raise InputError(
            f"gradient matrix {G.shape} does not match a fit with n={fit.n}, q={fit.q}"
        )
    return psi(fit.residuals, fit.tau)[:, None] * G


def lof_statistic(fit, X, A, G=None):
    """Projection statistic from a fit, its covariates and the weight matrix.

    ``X`` are the covariates entering the model gradient (the null design).
    ``G`` overrides the gradient matrix directly when given.
    """
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X.reshape(-1, 1)
    W = A.values if isinstance(A, ProjectionWeightMatrix) else np.asarray(A)
    n = fit.n
    if W.shape != (n, n) or X.shape[0] != n:
        raise InputError(
            f"dimension mismatch: {n} residuals, covariates {X.shape}, weights {W.shape}"
        )
    V = _marks(fit, X, G)
    value, M = quadratic_statistic(V, W)
    return LofStatistic(value=float(value), core_matrix=M)


def projected_process(fit, X, beta, u, G=None):
    """``n^-1/2 sum_i psi(r_i) g(X_i) I(beta'X_i <= u)``."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X.reshape(-1, 1)
    beta = np.asarray(beta, dtype=np.float64)
    if abs(np.linalg.norm(beta) - 1.0) > 1e-12:
        raise InputError("beta must be a unit vector")
    V = _marks(fit, X, G)
    ind = (X @ beta) <= u
    return V[ind].sum(axis=0) / np.sqrt(fit.n)


def mc_statistic(fit, X, num_projections, rng, G=None, batch=None):
    """Monte Carlo estimate of the projection statistic from its defining integral.

    Directions are drawn uniformly on the unit sphere; the sphere integral is
    ``sphere_area(d)`` times the mean integrand.
    """
    if num_projections < 1:
        raise InputError("num_projections must be >= 1")
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X.reshape(-1, 1)
    n, d = X.shape
    V = _marks(fit, X, G)
    q = V.shape[1]
    batch = batch or max(1, 2_000_000 // (n * n))
    acc = np.zeros((q, q))
    done = 0
    while done < num_projections:
        m = min(batch, num_projections - done)
        B = rng.standard_normal((m, d))
        B /= np.linalg.norm(B, axis=1, keepdims=True)
        P = B @ X.T  # m x n
        # L[b, i, k] = I(beta_b'X_i <= beta_b'X_k)
        L = (P[:, :, None] <= P[:, None, :]).astype(np.float64)
        R = np.einsum("bik,iq->bkq", L, V) / np.sqrt(n)
        acc += np.einsum("bkq,bkp->qp", R, R) / n
        done += m
    M = sphere_area(d) * acc / num_projections
    value, _ = _top_eigenvalue(M)
    return max(float(value), 0.0)
