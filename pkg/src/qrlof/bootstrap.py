"""Wild bootstrap calibration with two-point multipliers.

Bootstrap errors are ``w_i |r_i|`` where ``w`` takes ``2(1 - tau)`` with
probability ``1 - tau`` and ``-2 tau`` with probability ``tau``, so each
bootstrap error has conditional tau-quantile zero without any density
estimate. Every replicate ``b`` draws from its own Philox stream keyed by
``(seed, b)``, which makes the result independent of scheduling.
"""
from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted, check_X_y

from .exceptions import InputError
from .hz import hz_weight_matrix
from .projection import ProjectionWeightMatrix, quadratic_statistic, weight_matrix
from .qreg import DataSample, _check_tau, design_matrix, fit_design, psi

__all__ = [
    "STATISTIC_KINDS",
    "BootstrapConfig",
    "TestReport",
    "replicate_rng",
    "draw_multiplier",
    "bootstrap_response",
    "statistic_weights",
    "run_test",
    "LackOfFitTest",
]

STATISTIC_KINDS = ("projection", "hz")
_CHUNK = 25
_UINT64_MAX = 2**64 - 1


@dataclass(frozen=True)
class BootstrapConfig:
    replications: int = 500
    seed: int = 0
    statistic_kind: str = "projection"
    smooth_pvalue: bool = False
    n_jobs: int = 1

    def __post_init__(self):
        if int(self.replications) < 1:
            raise InputError(f"bootstrap replications must be >= 1, got {self.replications}")
        if not 0 <= int(self.seed) <= _UINT64_MAX:
            raise InputError("seed must be an unsigned 64-bit integer")
        if self.statistic_kind not in STATISTIC_KINDS:
            raise InputError(
                f"statistic_kind must be one of {STATISTIC_KINDS}, got {self.statistic_kind!r}"
            )
        if int(self.n_jobs) < 1:
            raise InputError("n_jobs must be >= 1")


@dataclass(frozen=True, eq=False)
class TestReport:
    __test__ = False  # not a pytest class

    statistic: float
    bootstrap_statistics: np.ndarray = field(repr=False)
    p_value: float
    tau: float
    B: int
    seed: int
    statistic_kind: str
    n: int
    d_null: int
    d_alt: int

    def __eq__(self, other):
        if not isinstance(other, TestReport):
            return NotImplemented
        a, b = self.to_dict(), other.to_dict()
        return a == b

    def to_dict(self):
        out = asdict(self)
        out["bootstrap_statistics"] = [float(v) for v in self.bootstrap_statistics]
        out["statistic"] = float(self.statistic)
        out["p_value"] = float(self.p_value)
        return out

    @classmethod
    def from_dict(cls, data):
        data = dict(data)
        data["bootstrap_statistics"] = np.asarray(data["bootstrap_statistics"], dtype=np.float64)
        return cls(**data)

    def to_json(self, **kwargs):
        # float repr is the shortest string that round-trips exactly
        return json.dumps(self.to_dict(), **kwargs)

    @classmethod
    def from_json(cls, text):
        return cls.from_dict(json.loads(text))


def replicate_rng(seed, b):
    """Counter-based generator for replicate ``b`` of experiment ``seed``."""
    ss = np.random.SeedSequence(int(seed), spawn_key=(int(b),))
    return np.random.Generator(np.random.Philox(ss))


def draw_multiplier(tau, rng, size=None):
    """Two-point multiplier(s) with tau-quantile zero."""
    tau = _check_tau(tau)
    u = rng.random(size)
    out = np.where(u < tau, -2.0 * tau, 2.0 * (1.0 - tau))
    return out if size is not None else float(out)


def bootstrap_response(fit, X, rng, G=None):
    """``Y* = fitted + w |r|`` with fresh independent multipliers."""
    if G is None:
        G = design_matrix(X, fit.design_has_intercept)
    fitted = G @ fit.theta
    w = draw_multiplier(fit.tau, rng, size=fit.n)
    return fitted + w * np.abs(fit.residuals)


def statistic_weights(X_alt, kind, n_jobs=1):
    """n x n weight matrix of the chosen statistic (built once per dataset)."""
    if kind == "projection":
        return weight_matrix(X_alt, n_jobs=n_jobs).values
    if kind == "hz":
        return hz_weight_matrix(X_alt)
    raise InputError(f"unknown statistic kind {kind!r}")


def _replicate_chunk(G, fit, weights, seed, bs):
    fitted = G @ fit.theta
    absr = np.abs(fit.residuals)
    V = np.empty((len(bs), G.shape[0], G.shape[1]))
    for k, b in enumerate(bs):
        w = draw_multiplier(fit.tau, replicate_rng(seed, b), size=fit.n)
        refit = fit_design(G, fitted + w * absr, fit.tau,
                           with_intercept=fit.design_has_intercept, warm_basis=fit.basis)
        V[k] = psi(refit.residuals, fit.tau)[:, None] * G
    return {kind: quadratic_statistic(V, W)[0] for kind, W in weights.items()}


def _bootstrap(G, fit, weights, B, seed, n_jobs=1):
    chunks = [range(s, min(s + _CHUNK, B)) for s in range(0, B, _CHUNK)]
    work = lambda bs: _replicate_chunk(G, fit, weights, seed, bs)  # noqa: E731
    if n_jobs == 1 or len(chunks) == 1:
        parts = [work(bs) for bs in chunks]
    else:
        with ThreadPoolExecutor(max_workers=n_jobs) as ex:
            parts = list(ex.map(work, chunks))
    return {kind: np.concatenate([p[kind] for p in parts]) for kind in weights}


def _p_value(statistic, boot, smooth=False):
    hits = int(np.count_nonzero(statistic <= boot))
    if smooth:
        return (hits + 1) / (boot.size + 1)
    return hits / boot.size


def _run_tests(G, y, X_alt, tau, kinds, B, seed, with_intercept=True,
               smooth_pvalue=False, n_jobs=1, weights=None):
    """Fit the null once and calibrate every requested statistic on shared draws.

    Returns ``{kind: TestReport}``. Each report is identical to what a single
    :func:`run_test` call with that kind and seed produces.
    """
    tau = _check_tau(tau)
    G = np.ascontiguousarray(G, dtype=np.float64)
    fit = fit_design(G, y, tau, with_intercept=with_intercept)
    if weights is None:
        weights = {}
    weights = {k: (weights[k] if k in weights else statistic_weights(X_alt, k, n_jobs)) for k in kinds}
    weights = {k: (w.values if isinstance(w, ProjectionWeightMatrix) else np.asarray(w))
               for k, w in weights.items()}
    V = psi(fit.residuals, tau)[:, None] * G
    observed = {k: float(quadratic_statistic(V, W)[0]) for k, W in weights.items()}
    boot = _bootstrap(G, fit, weights, int(B), int(seed), n_jobs=n_jobs)
    n = G.shape[0]
    d_null = G.shape[1] - int(with_intercept)
    return {
        k: TestReport(
            statistic=observed[k],
            bootstrap_statistics=boot[k],
            p_value=_p_value(observed[k], boot[k], smooth_pvalue),
            tau=tau,
            B=int(B),
            seed=int(seed),
            statistic_kind=k,
            n=n,
            d_null=d_null,
            d_alt=X_alt.shape[1],
        )
        for k in kinds
    }


def run_test(sample, tau, config, null_columns=None, with_intercept=True, weights=None):
    """Wild-bootstrap lack-of-fit test of the linear tau-quantile model.

    Parameters
    ----------
    sample : DataSample
        All covariates of ``sample`` span the alternative: they enter the
        indicator (or projection) sets.
    tau : float
    config : BootstrapConfig
    null_columns : sequence of int, optional
        Covariate columns of the null linear model. Defaults to all of them;
        an empty sequence gives the intercept-only null.
    weights : ProjectionWeightMatrix or ndarray, optional
        Precomputed weight matrix for ``config.statistic_kind``.
    """
    X_alt = sample.covariates
    cols = range(sample.d) if null_columns is None else list(null_columns)
    G = design_matrix(X_alt[:, list(cols)], with_intercept)
    if G.shape[1] == 0:
        raise InputError("null model has no parameters")
    kind = config.statistic_kind
    reports = _run_tests(
        G, sample.response, X_alt, tau, (kind,), config.replications, config.seed,
        with_intercept=with_intercept, smooth_pvalue=config.smooth_pvalue,
        n_jobs=config.n_jobs, weights=None if weights is None else {kind: weights},
    )
    return reports[kind]


class LackOfFitTest(BaseEstimator):
    """Lack-of-fit test for a linear quantile regression model.

    ``fit(X, y)`` fits the null model, computes the chosen cumulative-sum
    statistic and calibrates it with the wild bootstrap.

    Parameters
    ----------
    tau : float, default=0.5
    statistic : {"projection", "hz"}, default="projection"
    n_bootstrap : int, default=500
    random_state : int or None, default=0
        Unsigned 64-bit seed. ``None`` draws fresh entropy; the seed used is
        kept in ``report_``.
    fit_intercept : bool, default=True
    null_features : sequence of int or None, default=None
        Columns of ``X`` in the null model; all columns when None.
    smooth_pvalue : bool, default=False
        Use ``(1 + hits) / (B + 1)`` instead of ``hits / B``.
    n_jobs : int, default=1

    Attributes
    ----------
    report_ : TestReport
    statistic_ : float
    pvalue_ : float
    bootstrap_statistics_ : ndarray of shape (n_bootstrap,)
    """

    def __init__(self, tau=0.5, statistic="projection", n_bootstrap=500, random_state=0,
                 fit_intercept=True, null_features=None, smooth_pvalue=False, n_jobs=1):
        self.tau = tau
        self.statistic = statistic
        self.n_bootstrap = n_bootstrap
        self.random_state = random_state
        self.fit_intercept = fit_intercept
        self.null_features = null_features
        self.smooth_pvalue = smooth_pvalue
        self.n_jobs = n_jobs

    def fit(self, X, y):
        X, y = check_X_y(X, y, y_numeric=True, dtype=np.float64)
        seed = self.random_state
        if seed is None:
            seed = int(np.random.SeedSequence().generate_state(1, np.uint64)[0])
        config = BootstrapConfig(
            replications=self.n_bootstrap, seed=int(seed), statistic_kind=self.statistic,
            smooth_pvalue=self.smooth_pvalue, n_jobs=self.n_jobs,
        )
        self.report_ = run_test(DataSample(X, y), self.tau, config,
                                null_columns=self.null_features, with_intercept=self.fit_intercept)
        self.statistic_ = self.report_.statistic
        self.pvalue_ = self.report_.p_value
        self.bootstrap_statistics_ = np.array(self.report_.bootstrap_statistics)
        self.n_features_in_ = X.shape[1]
        return self

    def reject(self, alpha=0.05):
        check_is_fitted(self, "report_")
        return self.pvalue_ <= alpha
