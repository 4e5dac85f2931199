"""Command-line entry point: ``qrlof test | simulate | oracle``."""
from __future__ import annotations

import argparse
import csv
import json
import logging
import sys

import numpy as np

from . import __version__
from .bootstrap import STATISTIC_KINDS, BootstrapConfig
from .dataio import DatasetFile, ProblemSpec, default_covariates, load_csv, run_problem
from .exceptions import QrlofError
from .projection import lof_statistic, mc_statistic, weight_matrix
from .qreg import DataSample, fit_linear_quantile
from .simulation import (
    DEVIATION_KINDS,
    ERROR_KINDS,
    ErrorDistribution,
    ExperimentConfig,
    ModelSpec,
    power_curve,
    run_experiment,
    write_power_curve_csv,
)

log = logging.getLogger("qrlof")

REPORT_CSV_COLUMNS = ["statistic", "p_value", "tau", "B", "seed", "statistic_kind",
                      "n", "d_null", "d_alt"]


def _names(text):
    return tuple(s.strip() for s in text.split(",") if s.strip())


def _floats(text):
    return tuple(float(s) for s in _names(text))


def _seed(text):
    v = int(text, 0)
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return v


def _add_common(p):
    p.add_argument("--tau", type=float, default=0.5, help="quantile level (default 0.5)")
    p.add_argument("--bootstrap", "-B", type=int, default=500, metavar="B",
                   help="bootstrap replications")
    p.add_argument("--seed", type=_seed, default=0)
    p.add_argument("--jobs", type=int, default=1, help="worker threads")
    p.add_argument("--output", "-o", default="-", help="output file ('-' for stdout)")


def build_parser():
    parser = argparse.ArgumentParser(
        prog="qrlof",
        description="Lack-of-fit tests for linear quantile regression models.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    t = sub.add_parser("test", help="test one dataset against one null model")
    t.add_argument("data", help="CSV file with a header row")
    t.add_argument("--response", "-y", required=True, help="response column")
    t.add_argument("--alt-cols", type=_names, default=None,
                   help="comma-separated alternative covariates (default: all named columns but the response)")
    t.add_argument("--null-cols", type=_names, default=None,
                   help="comma-separated null-model covariates (default: the alternative set)")
    t.add_argument("--statistic", choices=STATISTIC_KINDS, default="projection")
    t.add_argument("--delimiter", default=",")
    t.add_argument("--smooth-pvalue", action="store_true",
                   help="report (1 + hits) / (B + 1)")
    t.add_argument("--out", choices=("json", "csv"), default="json")
    _add_common(t)

    s = sub.add_parser("simulate", help="rejection rates for one simulation model")
    s.add_argument("--model", type=int, required=True, choices=range(1, 9))
    s.add_argument("--n", type=int, default=100)
    s.add_argument("--reps", type=int, default=200, help="simulated original samples")
    s.add_argument("--alphas", type=_floats, default=(0.10, 0.05, 0.01))
    s.add_argument("--tests", type=_names, default=("projection", "hz"))
    s.add_argument("--c", type=_floats, default=None,
                   help="model 6 deviation size; several values give a power curve")
    s.add_argument("--t", type=int, default=0, help="model 8 extra dimensions")
    s.add_argument("--deviation", choices=DEVIATION_KINDS, default=None, help="model 7")
    s.add_argument("--error", choices=ERROR_KINDS, default=None, help="Z distribution")
    s.add_argument("--df", type=float, default=None, help="chi-squared degrees of freedom")
    s.add_argument("--full-scale", action="store_true",
                   help="1000 samples and B=500 (overrides --reps/--bootstrap)")
    s.add_argument("--out", choices=("csv", "json"), default="csv")
    _add_common(s)
    s.set_defaults(bootstrap=200)

    o = sub.add_parser("oracle", help="cross-check the closed form against sphere Monte Carlo")
    o.add_argument("--n", type=int, default=25)
    o.add_argument("--d", type=int, default=2)
    o.add_argument("--draws", type=int, default=200_000)
    o.add_argument("--tau", type=float, default=0.5)
    o.add_argument("--seed", type=_seed, default=0)
    o.add_argument("--output", "-o", default="-")
    return parser


def _open_out(path):
    if path == "-":
        return sys.stdout, False
    return open(path, "w", newline=""), True


def cmd_test(args):
    file = DatasetFile(args.data, args.response, args.alt_cols, args.delimiter)
    alt = args.alt_cols or default_covariates(file)
    sample = load_csv(file)
    null = alt if args.null_cols is None else args.null_cols
    unknown = [c for c in null if c not in alt]
    if unknown:
        raise QrlofError(f"null columns {unknown} are not among the alternative columns")
    config = BootstrapConfig(args.bootstrap, args.seed, args.statistic,
                             args.smooth_pvalue, args.jobs)
    problem = ProblemSpec(tuple(alt.index(c) for c in null), tuple(range(len(alt))),
                          args.tau, config)
    report = run_problem(sample, problem)
    out, close = _open_out(args.output)
    try:
        if args.out == "json":
            out.write(report.to_json() + "\n")
        else:
            row = report.to_dict()
            w = csv.DictWriter(out, fieldnames=REPORT_CSV_COLUMNS, lineterminator="\n")
            w.writeheader()
            w.writerow({k: row[k] for k in REPORT_CSV_COLUMNS})
    finally:
        if close:
            out.close()
    return 0


def cmd_simulate(args):
    cs = args.c if args.c is not None else (0.0,)
    spec = ModelSpec(
        model_id=args.model, tau=args.tau,
        deviation_c=cs[0] if args.c is not None else 0.0,
        extra_dims_t=args.t, deviation_kind=args.deviation,
        error_kind=args.error, error_df=args.df,
    )
    boot = BootstrapConfig(replications=args.bootstrap)
    if args.full_scale:
        config = ExperimentConfig.full_scale(spec, args.n, bootstrap=boot, alphas=args.alphas,
                                              tests=args.tests, seed=args.seed)
    else:
        config = ExperimentConfig(spec, args.n, args.reps, boot, args.alphas, args.tests, args.seed)
    progress = None
    if args.verbose:
        progress = lambda rep: log.info("replication %d done", rep)  # noqa: E731
    out, close = _open_out(args.output)
    try:
        if args.c is not None and len(cs) > 1:
            rows = power_curve(config, cs, n_jobs=args.jobs)
            if args.out == "json":
                out.write(json.dumps(rows) + "\n")
            else:
                write_power_curve_csv(rows, out)
        else:
            table = run_experiment(config, n_jobs=args.jobs, progress=progress)
            if args.out == "json":
                out.write(json.dumps(list(table.rows())) + "\n")
            else:
                table.to_csv(out)
    finally:
        if close:
            out.close()
    return 0


def cmd_oracle(args):
    # model-1 style data: uniform covariates, linear median, normal errors
    rng = np.random.default_rng(args.seed)
    X = rng.uniform(size=(args.n, args.d))
    y = 1.0 + X.sum(axis=1) + ErrorDistribution("normal", args.tau).sample(rng, args.n)
    fit = fit_linear_quantile(DataSample(X, y), args.tau)
    A = weight_matrix(X)
    closed = lof_statistic(fit, X, A).value
    mc = mc_statistic(fit, X, args.draws, rng)
    result = {"n": args.n, "d": args.d, "draws": args.draws, "seed": args.seed,
              "lof_statistic": closed, "mc_statistic": mc,
              "ratio": mc / closed if closed > 0 else None,
              "scale_constant": A.scale_constant}
    out, close = _open_out(args.output)
    try:
        out.write(json.dumps(result) + "\n")
    finally:
        if close:
            out.close()
    return 0


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    handler = {"test": cmd_test, "simulate": cmd_simulate, "oracle": cmd_oracle}[args.command]
    try:
        return handler(args)
    except (QrlofError, OSError) as exc:
        print(f"qrlof: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
