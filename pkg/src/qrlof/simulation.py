"""Simulation models 1-8, centred error laws and the rejection-rate harness."""
from __future__ import annotations

import csv
import io
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np
from scipy import optimize, stats

from .bootstrap import STATISTIC_KINDS, BootstrapConfig, _run_tests
from .exceptions import InputError
from .qreg import DataSample, _check_tau, design_matrix

__all__ = [
    "ERROR_KINDS",
    "DEVIATION_KINDS",
    "quantile_of_z",
    "ErrorDistribution",
    "ModelSpec",
    "SimulatedSample",
    "generate_sample",
    "ExperimentConfig",
    "RejectionTable",
    "tally_rejections",
    "run_experiment",
    "power_curve",
    "write_power_curve_csv",
]

ERROR_KINDS = ("normal", "lognormal", "exponential", "chisq", "uniform", "mixture")
DEVIATION_KINDS = ("quadratic", "sin", "exp", "log")

# default Z law of each model
_DEFAULT_ERROR = {1: "normal", 2: "normal", 3: "normal", 4: "normal",
                  5: "normal", 6: "lognormal", 7: "lognormal", 8: "lognormal"}
_DEFAULT_DF = {"chisq": 4}


def _mixture_cdf(z):
    return 0.75 * stats.norm.cdf(z) + 0.25 * stats.norm.cdf((z - 5.0) / 2.0)


def quantile_of_z(kind, tau, df=None):
    """tau-quantile of the uncentred error variable ``Z``."""
    tau = _check_tau(tau)
    if kind == "normal":
        return float(stats.norm.ppf(tau))
    if kind == "lognormal":
        return float(np.exp(stats.norm.ppf(tau)))
    if kind == "exponential":
        return float(-np.log1p(-tau))
    if kind == "chisq":
        if df is None or df <= 0:
            raise InputError(f"chi-squared errors need df > 0, got {df!r}")
        return float(stats.chi2.ppf(tau, df))
    if kind == "uniform":
        return -1.0 + 2.0 * tau
    if kind == "mixture":
        return float(optimize.bisect(lambda z: _mixture_cdf(z) - tau, -20.0, 40.0,
                                     xtol=1e-10, rtol=4 * np.finfo(float).eps))
    raise InputError(f"unknown error kind {kind!r}")


@dataclass(frozen=True)
class ErrorDistribution:
    """``eps = Z - z_tau``: a law with tau-quantile zero."""

    kind: str = "normal"
    tau: float = 0.5
    df: float | None = None

    def __post_init__(self):
        if self.kind not in ERROR_KINDS:
            raise InputError(f"error kind must be one of {ERROR_KINDS}, got {self.kind!r}")
        _check_tau(self.tau)
        if self.kind == "chisq" and self.df is None:
            object.__setattr__(self, "df", _DEFAULT_DF["chisq"])
        if self.kind != "chisq" and self.df is not None:
            raise InputError("df only applies to chi-squared errors")

    @property
    def z_tau(self):
        return quantile_of_z(self.kind, self.tau, self.df)

    def draw_z(self, rng, n):
        k = self.kind
        if k == "normal":
            return rng.standard_normal(n)
        if k == "lognormal":
            return np.exp(rng.standard_normal(n))
        if k == "exponential":
            return rng.standard_exponential(n)
        if k == "chisq":
            return rng.chisquare(self.df, n)
        if k == "uniform":
            return rng.uniform(-1.0, 1.0, n)
        # mixture: N(0,1) w.p. 0.75, N(5, 2^2) w.p. 0.25
        second = rng.random(n) < 0.25
        z = rng.standard_normal(n)
        return np.where(second, 5.0 + 2.0 * z, z)

    def sample(self, rng, n):
        return self.draw_z(rng, n) - self.z_tau


@dataclass(frozen=True)
class ModelSpec:
    model_id: int
    tau: float = 0.5
    deviation_c: float = 0.0
    extra_dims_t: int = 0
    deviation_kind: str | None = None
    error_kind: str | None = None
    error_df: float | None = None

    def __post_init__(self):
        if self.model_id not in range(1, 9):
            raise InputError(f"model_id must be in 1..8, got {self.model_id}")
        _check_tau(self.tau)
        if self.deviation_c != 0.0 and self.model_id != 6:
            raise InputError("deviation_c only applies to model 6")
        if self.extra_dims_t != 0 and self.model_id != 8:
            raise InputError("extra_dims_t only applies to model 8")
        if self.extra_dims_t < 0:
            raise InputError("extra_dims_t must be >= 0")
        if self.model_id == 7:
            if self.deviation_kind is None:
                object.__setattr__(self, "deviation_kind", "quadratic")
            if self.deviation_kind not in DEVIATION_KINDS:
                raise InputError(f"deviation_kind must be one of {DEVIATION_KINDS}")
        elif self.deviation_kind is not None:
            raise InputError("deviation_kind only applies to model 7")
        if self.error_kind is None:
            object.__setattr__(self, "error_kind", _DEFAULT_ERROR[self.model_id])
        if self.model_id == 6 and self.error_kind != "lognormal":
            raise InputError("model 6 uses centred log-normal errors only")
        self.error  # validates kind/df

    @property
    def error(self):
        df = self.error_df
        if self.error_kind == "chisq" and df is None:
            df = 2 if self.model_id == 7 else 4
        return ErrorDistribution(self.error_kind, self.tau, df)

    @property
    def null_is_true(self):
        if self.model_id in (1, 2, 3, 4):
            return True
        if self.model_id == 6:
            return self.deviation_c == 0.0
        return False

    @property
    def label(self):
        extra = []
        if self.model_id == 6:
            extra.append(f"c={self.deviation_c:g}")
        if self.model_id == 7:
            extra.append(self.deviation_kind)
        if self.model_id == 8:
            extra.append(f"t={self.extra_dims_t}")
        return ":".join([str(self.model_id), *extra])


@dataclass(frozen=True, eq=False)
class SimulatedSample:
    sample: DataSample
    null_columns: tuple
    null_is_true: bool


def _deviation(kind, X1, X2):
    lin = 1.0 + X1 + X2
    if kind == "quadratic":
        return (X1**2 + X2**2 + X1 * X2) / 3.0
    if kind == "sin":
        return 5.0 * np.sin(0.6 * np.pi * lin)
    if kind == "exp":
        return 8.0 * np.exp(-0.5 * lin)
    return 6.0 * np.log(np.abs(lin))


def generate_sample(spec, n, rng):
    """Draw covariates, then errors, for one replication of ``spec``."""
    m = spec.model_id
    n = int(n)
    if m in (1, 3):
        X = rng.uniform(size=(n, 2))
    elif m == 2:
        X = rng.uniform(size=(n, 5))
    elif m == 4:
        X = rng.uniform(size=(n, 1))
    elif m == 5:
        X = rng.standard_normal((n, 2))
    elif m in (6, 7):
        X = np.column_stack([rng.uniform(size=n), rng.standard_normal(n)])
    else:
        d = 2 + spec.extra_dims_t
        cols = [rng.uniform(size=n) if (j + 1) % 2 == 1 else rng.standard_normal(n)
                for j in range(d)]
        X = np.column_stack(cols)
    eps = spec.error.sample(rng, n)

    if m == 1:
        y = 1.0 + X[:, 0] + X[:, 1] + eps
    elif m == 2:
        y = 1.0 + X.sum(axis=1) + eps
    elif m == 3:
        y = 1.0 + X[:, 0] + X[:, 1] + (X[:, 0] + 0.5) * eps
    elif m == 4:
        y = 1.0 + X[:, 0] + (X[:, 0] + 0.5) * eps
    elif m == 5:
        y = 1.0 + (X[:, 0] - X[:, 1]) / 5.0 + eps
    elif m == 6:
        quad = X[:, 0] ** 2 + X[:, 1] ** 2 + X[:, 0] * X[:, 1]
        y = 1.0 + X[:, 0] + X[:, 1] + spec.deviation_c * quad + eps
    elif m == 7:
        y = 1.0 + X[:, 0] + X[:, 1] + _deviation(spec.deviation_kind, X[:, 0], X[:, 1]) + eps
    else:
        y = 1.0 + X[:, 0] + X[:, 1] + _deviation("quadratic", X[:, 0], X[:, 1]) + eps

    if m == 5:
        null_cols = ()
    elif m == 8:
        null_cols = (0, 1)
    else:
        null_cols = tuple(range(X.shape[1]))
    if n < len(null_cols) + 1:
        raise InputError(f"n={n} too small for the null design of model {m}")
    return SimulatedSample(DataSample(X, y), null_cols, spec.null_is_true)


@dataclass(frozen=True)
class ExperimentConfig:
    model: ModelSpec
    n: int = 100
    replications: int = 200
    bootstrap: BootstrapConfig = field(default_factory=lambda: BootstrapConfig(replications=200))
    alphas: tuple = (0.10, 0.05, 0.01)
    tests: tuple = ("projection", "hz")
    seed: int = 0

    def __post_init__(self):
        if int(self.replications) < 1:
            raise InputError("replications must be >= 1")
        if int(self.n) < 1:
            raise InputError("n must be >= 1")
        if not self.alphas or any(not 0.0 < a < 1.0 for a in self.alphas):
            raise InputError(f"alphas must lie in (0, 1), got {self.alphas}")
        bad = [t for t in self.tests if t not in STATISTIC_KINDS]
        if bad or not self.tests:
            raise InputError(f"tests must be a non-empty subset of {STATISTIC_KINDS}")
        object.__setattr__(self, "alphas", tuple(float(a) for a in self.alphas))
        object.__setattr__(self, "tests", tuple(self.tests))

    @classmethod
    def full_scale(cls, model, n, **kwargs):
        """1000 original samples with B=500 bootstrap replicates."""
        boot = kwargs.pop("bootstrap", BootstrapConfig())
        return cls(model=model, n=n, replications=1000,
                   bootstrap=replace(boot, replications=500), **kwargs)


@dataclass(frozen=True, eq=False)
class RejectionTable:
    model: str
    n: int
    tau: float
    replications: int
    seed: int
    B: int
    alphas: tuple
    tests: tuple
    rejections: dict
    p_values: dict = field(repr=False)

    def proportion(self, test, alpha):
        return self.rejections[(test, float(alpha))] / self.replications

    def rows(self):
        for test in self.tests:
            for alpha in self.alphas:
                yield {
                    "model": self.model,
                    "test": test,
                    "n": self.n,
                    "tau": self.tau,
                    "alpha": alpha,
                    "rejections": self.rejections[(test, alpha)],
                    "replications": self.replications,
                    "proportion": self.proportion(test, alpha),
                    "seed": self.seed,
                }

    def to_csv(self, fh=None, header=True):
        out = fh if fh is not None else io.StringIO()
        writer = csv.DictWriter(out, fieldnames=CSV_COLUMNS, lineterminator="\n")
        if header:
            writer.writeheader()
        writer.writerows(self.rows())
        return out.getvalue() if fh is None else None


CSV_COLUMNS = ["model", "test", "n", "tau", "alpha", "rejections", "replications",
               "proportion", "seed"]


def tally_rejections(p_values, alphas):
    """Rejection counts ``#{p <= alpha}`` per level."""
    p = np.asarray(p_values, dtype=np.float64)
    return {float(a): int(np.count_nonzero(p <= a)) for a in alphas}


def _replicate_seeds(seed, rep):
    data = np.random.SeedSequence(int(seed), spawn_key=(int(rep), 0))
    boot = np.random.SeedSequence(int(seed), spawn_key=(int(rep), 1))
    return data, int(boot.generate_state(1, np.uint64)[0])


def _default_runner(config, rep):
    data_ss, boot_seed = _replicate_seeds(config.seed, rep)
    rng = np.random.Generator(np.random.Philox(data_ss))
    sim = generate_sample(config.model, config.n, rng)
    X = sim.sample.covariates
    G = design_matrix(X[:, list(sim.null_columns)], True)
    reports = _run_tests(G, sim.sample.response, X, config.model.tau, config.tests,
                         config.bootstrap.replications, boot_seed,
                         smooth_pvalue=config.bootstrap.smooth_pvalue)
    return {k: r.p_value for k, r in reports.items()}


def run_experiment(config, n_jobs=1, runner=None, progress=None):
    """Replicate the experiment and tally ``p <= alpha`` for every test and level.

    ``runner(config, rep) -> {test: p_value}`` replaces the data generation
    and testing of one replication (used to inject known p-values).
    """
    runner = runner or _default_runner
    reps = range(int(config.replications))

    def one(rep):
        out = runner(config, rep)
        if progress is not None:
            progress(rep)
        return out

    if n_jobs == 1:
        results = [one(r) for r in reps]
    else:
        with ThreadPoolExecutor(max_workers=n_jobs) as ex:
            results = list(ex.map(one, reps))
    p_values = {t: np.array([res[t] for res in results]) for t in config.tests}
    rejections = {}
    for t in config.tests:
        for a, count in tally_rejections(p_values[t], config.alphas).items():
            rejections[(t, a)] = count
    return RejectionTable(
        model=config.model.label, n=int(config.n), tau=float(config.model.tau),
        replications=int(config.replications), seed=int(config.seed),
        B=int(config.bootstrap.replications), alphas=config.alphas, tests=config.tests,
        rejections=rejections, p_values=p_values,
    )


POWER_CSV_COLUMNS = ["model", "test", "n", "tau", "c", "alpha", "rejections",
                     "replications", "proportion", "seed"]


def power_curve(config, cs, n_jobs=1):
    """Run model 6 over deviation sizes ``cs``; returns long-format rows."""
    if config.model.model_id != 6:
        raise InputError("power curves are defined for model 6")
    rows = []
    for c in cs:
        cfg = replace(config, model=replace(config.model, deviation_c=float(c)))
        table = run_experiment(cfg, n_jobs=n_jobs)
        for row in table.rows():
            row = dict(row, c=float(c), model="6")
            rows.append({k: row[k] for k in POWER_CSV_COLUMNS})
    return rows


def write_power_curve_csv(rows, fh):
    writer = csv.DictWriter(fh, fieldnames=POWER_CSV_COLUMNS, lineterminator="\n")
    writer.writeheader()
    writer.writerows(rows)
