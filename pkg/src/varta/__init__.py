"""Latent Gaussian VAR models with arbitrary continuous marginals.

A p-dimensional VAR with unit stationary variances drives the dynamics;
each component is mapped through its marginal quantile transform, so the
observed series keeps the autoregressive structure while following any
continuous marginal distribution.  The package provides maximum
likelihood estimation with asymptotic standard errors, exact simulation,
simulation-based forecast distributions, residual diagnostics, and a
replication harness for coverage/RMSE experiments.
"""

from .diagnostics import ResidualReport, diagnose, residuals, whiteness_test
from .errors import (
    DataValidationError,
    NonStationaryError,
    NotPositiveDefiniteError,
    NumericalError,
    OmegaNotPDError,
    VartaError,
)
from .estimation import (
    FitResult,
    ParamPacking,
    confidence_intervals,
    fit,
    initial_values,
    standard_errors,
)
from .forecasting import ForecastResult, forecast, forecast_summary
from .gaussian import (
    CorrelationMatrix,
    corr_to_unconstrained,
    mvn_logpdf,
    normal_cdf,
    normal_pdf,
    normal_quantile,
    unconstrained_to_corr,
)
from .likelihood import (
    TimeSeriesData,
    VartaModel,
    latentize,
    loglik,
    loglik_conditional,
    loglik_exact_var1,
)
from .marginals import (
    EmpiricalMarginal,
    GaussianMarginal,
    Marginal,
    WeibullMarginal,
    fit_marginal,
    marginal_from_dict,
)
from .montecarlo import McDesign, McReport, group_summary, run_mc
from .simulation import RngSpec, simulate_latent, simulate_varta
from .var_model import (
    VarParams,
    companion,
    companion_covariance,
    derive_omega,
    solve_autocov,
    spectral_radius,
)

__version__ = "0.1.0"
