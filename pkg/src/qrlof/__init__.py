"""Lack-of-fit tests for linear quantile regression with many covariates."""

__version__ = "0.1.0"

from .bootstrap import (  # noqa: E402
    BootstrapConfig,
    LackOfFitTest,
    TestReport,
    bootstrap_response,
    draw_multiplier,
    run_test,
)
from .dataio import DatasetFile, ProblemSpec, load_csv, run_problem  # noqa: E402
from .exceptions import (  # noqa: E402
    DomainError,
    InputError,
    QrlofError,
    SingularDesignError,
    SolverError,
    UnderdeterminedError,
)
from .hz import hz_statistic  # noqa: E402
from .projection import (  # noqa: E402
    LofStatistic,
    ProjectionWeightMatrix,
    complementary_angle,
    lof_statistic,
    mc_statistic,
    projected_process,
    weight_matrix,
)
from .qreg import (  # noqa: E402
    DataSample,
    LinearQuantileRegressor,
    QuantileFit,
    check_loss,
    fit_linear_quantile,
    model_gradient,
    psi,
)
from .simulation import (  # noqa: E402
    ErrorDistribution,
    ExperimentConfig,
    ModelSpec,
    RejectionTable,
    generate_sample,
    quantile_of_z,
    run_experiment,
)
