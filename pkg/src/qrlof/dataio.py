"""CSV ingestion and the real-data testing problems."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .bootstrap import BootstrapConfig, run_test
from .exceptions import InputError
from .qreg import DataSample

__all__ = [
    "DatasetFile",
    "ProblemSpec",
    "default_covariates",
    "load_csv",
    "run_problem",
    "BARRO_RESPONSE",
    "BARRO_COVARIATES",
    "barro_problems",
]

# column names of the `barro` data shipped with the R package quantreg,
# in the order X1..X13 used by the growth-regression problems
BARRO_RESPONSE = "y.net"
BARRO_COVARIATES = (
    "lgdp2", "mse2", "fse2", "fhe2", "mhe2", "lexp2", "lintr2",
    "gedy2", "Iy2", "gcony2", "lblakp2", "pol2", "ttrad2",
)
_SELECTED = (1, 2, 6, 7, 9, 10, 11, 12, 13)
_STATE = (1, 2, 3, 4, 5, 6, 7)
_ALL = tuple(range(1, 14))


@dataclass(frozen=True)
class DatasetFile:
    path: str
    response: str
    covariates: tuple | None = None
    delimiter: str = ","


@dataclass(frozen=True)
class ProblemSpec:
    """Null and alternative covariate sets (0-based column indices)."""

    null_columns: tuple
    alt_columns: tuple
    tau: float = 0.5
    bootstrap: BootstrapConfig = field(default_factory=BootstrapConfig)

    def __post_init__(self):
        null, alt = tuple(self.null_columns), tuple(self.alt_columns)
        if not alt:
            raise InputError("alternative covariate set is empty")
        if len(set(alt)) != len(alt) or len(set(null)) != len(null):
            raise InputError("covariate sets must not repeat columns")
        missing = sorted(set(null) - set(alt))
        if missing:
            raise InputError(f"null columns {missing} are not in the alternative set")
        object.__setattr__(self, "null_columns", null)
        object.__setattr__(self, "alt_columns", alt)


def _read(path, delimiter):
    with Path(path).open(newline="") as fh:
        reader = csv.reader(fh, delimiter=delimiter)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise InputError(f"{path}: empty file, expected a header row") from None
        return header, list(reader)


def default_covariates(file):
    """Every named column other than the response, in file order.

    Unnamed columns (such as the row labels of an R export) are skipped.
    """
    header, _ = _read(file.path, file.delimiter)
    return tuple(h for h in header if h and h != file.response)


def load_csv(file):
    """Read a header-row CSV into a DataSample with columns in declared order.

    Covariates default to :func:`default_covariates`.
    """
    path = Path(file.path)
    header, rows = _read(path, file.delimiter)
    if file.response not in header:
        raise InputError(f"{path}: response column {file.response!r} not found in header")
    covs = file.covariates
    if covs is None:
        covs = tuple(h for h in header if h and h != file.response)
    absent = [c for c in covs if c not in header]
    if absent:
        raise InputError(f"{path}: covariate columns {absent} not found in header")
    if not covs:
        raise InputError(f"{path}: no covariate columns")
    wanted = [file.response, *covs]
    pos = [header.index(c) for c in wanted]
    rows = [r for r in rows if any(cell.strip() for cell in r)]
    if not rows:
        raise InputError(f"{path}: no data rows")
    data = np.empty((len(rows), len(wanted)))
    for i, row in enumerate(rows):
        for k, (col, j) in enumerate(zip(wanted, pos)):
            cell = row[j].strip() if j < len(row) else ""
            try:
                v = float(cell)
            except ValueError:
                v = math.nan
            if not math.isfinite(v):
                raise InputError(
                    f"{path}: data row {i + 1}, column {col!r}: "
                    f"{'missing' if not cell else 'non-numeric or non-finite'} value {cell!r}"
                )
            data[i, k] = v
    return DataSample(data[:, 1:], data[:, 0])


def run_problem(sample, problem):
    """Fit the null on its columns; search deviations over the alternative's.

    The model gradient always comes from the null fit; the projections (or
    indicators) use all alternative columns.
    """
    d = sample.d
    bad = [c for c in problem.alt_columns if not 0 <= c < d]
    if bad:
        raise InputError(f"column indices {bad} out of range for {d} covariates")
    alt = list(problem.alt_columns)
    sub = sample.select(alt)
    null_pos = [alt.index(c) for c in problem.null_columns]
    return run_test(sub, problem.tau, problem.bootstrap, null_columns=null_pos)


def barro_problems(bootstrap=None, tau=0.5):
    """The four growth-regression problems over columns ``BARRO_COVARIATES``."""
    bootstrap = bootstrap or BootstrapConfig(replications=500)
    z = lambda s: tuple(i - 1 for i in s)  # noqa: E731
    return {
        1: ProblemSpec(z(_ALL), z(_ALL), tau, bootstrap),
        2: ProblemSpec(z(_SELECTED), z(_SELECTED), tau, bootstrap),
        3: ProblemSpec(z(_SELECTED), z(_ALL), tau, bootstrap),
        4: ProblemSpec(z(_STATE), z(_ALL), tau, bootstrap),
    }
