"""Log-likelihood of the transformed latent VAR model.

The density of the observed series factorizes into a Gaussian VAR part,
evaluated on the latent (normal-scores) transform of the data, plus the
sum of per-observation log derivatives of that transform.  For one lag
the exact likelihood includes the stationary density of the first
observation; for more lags the likelihood conditions on the first k
observations.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import (
    DataValidationError,
    NonStationaryError,
    NotPositiveDefiniteError,
)
from .gaussian import (
    clamp_probability,
    cholesky_lower,
    log_normal_pdf,
    mvn_logpdf,
    mvn_logpdf_rows,
    normal_quantile,
)
from .marginals import GaussianMarginal, Marginal, WeibullMarginal
from .var_model import VarParams, derive_omega

# Log-likelihood returned for parameter values outside the valid region
# (non-stationary, or implied innovation covariance not PD).  Finite so
# that line searches can recover instead of aborting.
BARRIER_LOGLIK = -1e10


@dataclass(frozen=True)
class VartaModel:
    """Latent VAR parameters plus one marginal per component."""

    var: VarParams
    marginals: tuple[Marginal, ...]

    def __post_init__(self):
        marginals = tuple(self.marginals)
        if len(marginals) != self.var.p:
            raise DataValidationError(
                f"need {self.var.p} marginals, got {len(marginals)}"
            )
        object.__setattr__(self, "marginals", marginals)

    @property
    def p(self) -> int:
        return self.var.p

    @property
    def k(self) -> int:
        return self.var.k

    def to_dict(self) -> dict:
        d = self.var.to_dict()
        d["marginals"] = [m.to_dict() for m in self.marginals]
        return d


@dataclass(frozen=True)
class TimeSeriesData:
    """An n x p observation matrix with series names."""

    values: np.ndarray
    names: tuple[str, ...] = ()

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim == 1:
            v = v[:, None]
        if v.ndim != 2:
            raise DataValidationError(f"values must be 2-d, got shape {v.shape}")
        names = tuple(self.names) if self.names else tuple(
            f"series{i + 1}" for i in range(v.shape[1])
        )
        if len(names) != v.shape[1]:
            raise DataValidationError(
                f"{len(names)} names for {v.shape[1]} columns"
            )
        v = v.copy()
        v.setflags(write=False)
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "names", names)

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def p(self) -> int:
        return self.values.shape[1]


def validate_data(model: VartaModel, data: TimeSeriesData) -> None:
    """Check shape compatibility and per-column support membership."""
    if data.p != model.p:
        raise DataValidationError(
            f"data has {data.p} columns but the model is {model.p}-dimensional"
        )
    for i, m in enumerate(model.marginals):
        m.validate_data(data.values[:, i], name=data.names[i])


def _latent_and_jacobian(
    marginals: tuple[Marginal, ...], x: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Latent matrix and per-column total Jacobian rowsums, in one pass.

    Returns (z, jac) where z is n x p and jac is n x p with
    jac[t, i] = log_jacobian_term(marginal_i, x[t, i]).  Homogeneous
    all-Weibull and all-Gaussian marginals take a vectorized path (the
    hot case in fitting); correctness against the per-column path is
    pinned by tests.
    """
    n, p = x.shape
    if all(type(m) is WeibullMarginal for m in marginals):
        shapes = np.array([m.shape for m in marginals])
        scales = np.array([m.scale for m in marginals])
        r = x / scales
        s = r ** shapes
        u = -np.expm1(-s)
        # upper-half points via the survival function, as in to_latent
        upper = u > 0.5
        tail = np.where(upper, np.exp(-s), u)
        z = normal_quantile(clamp_probability(tail).ravel()).reshape(n, p)
        z = np.where(upper, -z, z)
        log_pdf = np.log(shapes / scales) + (shapes - 1.0) * np.log(r) - s
        return z, log_pdf - log_normal_pdf(z)
    if all(type(m) is GaussianMarginal for m in marginals):
        means = np.array([m.mean for m in marginals])
        sds = np.array([m.sd for m in marginals])
        z = (x - means) / sds
        return z, np.broadcast_to(-np.log(sds), (n, p)).copy()

    z = np.empty_like(x)
    jac = np.empty_like(x)
    for i, m in enumerate(marginals):
        z[:, i] = m.to_latent(x[:, i])
        jac[:, i] = m.log_jacobian_term(x[:, i])
    return z, jac


def latentize(model: VartaModel, data: TimeSeriesData) -> np.ndarray:
    """Transform observations to the latent scale, column by column."""
    validate_data(model, data)
    z, _ = _latent_and_jacobian(model.marginals, data.values)
    return z


def delatentize(model: VartaModel, z: np.ndarray) -> np.ndarray:
    """Inverse of latentize."""
    z = np.asarray(z, dtype=float)
    x = np.empty_like(z)
    for i, m in enumerate(model.marginals):
        x[:, i] = m.from_latent(z[:, i])
    return x


def _conditional_residuals(a: np.ndarray, z: np.ndarray) -> np.ndarray:
    """z_t minus its one-step predictor, rows t = k+1..n."""
    k = a.shape[0]
    n = z.shape[0]
    resid = z[k:].copy()
    for i in range(1, k + 1):
        resid -= z[k - i:n - i] @ a[i - 1].T
    return resid


def gaussian_loglik(var: VarParams, z: np.ndarray, kind: str = "exact") -> float:
    """Gaussian VAR log density of a latent matrix.

    ``kind='exact'`` adds the stationary density of the first row (one
    lag only); ``'conditional'`` conditions on the first k rows.  Raises
    NonStationaryError / OmegaNotPDError outside the valid region.
    """
    omega = derive_omega(var)
    ll = mvn_logpdf_rows(_conditional_residuals(var.A, z),
                         cholesky_lower(omega))
    if kind == "exact":
        if var.k != 1:
            raise DataValidationError("exact likelihood is defined for k = 1 only")
        ll += mvn_logpdf(z[0], np.zeros(var.p), var.sigma.matrix)
    elif kind != "conditional":
        raise DataValidationError(f"unknown likelihood kind '{kind}'")
    return float(ll)


def loglik_exact_var1(model: VartaModel, data: TimeSeriesData,
                      validate: bool = True) -> float:
    """Exact log-likelihood for the one-lag model.

    Stationary density of the first latent vector, plus one-step
    conditional densities, plus the Jacobian terms over all n rows.
    Returns BARRIER_LOGLIK when (A, Sigma) is outside the valid region.
    ``validate=False`` skips the support scan of the data (safe inside
    optimizers, where the data was validated once up front).
    """
    if model.k != 1:
        raise DataValidationError("exact likelihood is defined for k = 1 only")
    if validate:
        validate_data(model, data)
    if data.n < 2:
        raise DataValidationError("need at least 2 observations")
    z, jac = _latent_and_jacobian(model.marginals, data.values)
    try:
        return gaussian_loglik(model.var, z, "exact") + float(jac.sum())
    except (NonStationaryError, NotPositiveDefiniteError):
        return BARRIER_LOGLIK


def loglik_conditional(model: VartaModel, data: TimeSeriesData,
                       validate: bool = True) -> float:
    """Conditional log-likelihood given the first k observations.

    One-step conditional Gaussian densities for t = k+1..n plus the
    Jacobian terms over the same rows.
    """
    if validate:
        validate_data(model, data)
    k = model.k
    if data.n <= k:
        raise DataValidationError(f"need more than k = {k} observations")
    z, jac = _latent_and_jacobian(model.marginals, data.values)
    try:
        return gaussian_loglik(model.var, z, "conditional") + float(jac[k:].sum())
    except (NonStationaryError, NotPositiveDefiniteError):
        return BARRIER_LOGLIK


def loglik(model: VartaModel, data: TimeSeriesData, kind: str = "auto",
           validate: bool = True) -> float:
    """Dispatch between the exact (k = 1) and conditional likelihoods."""
    if kind == "auto":
        kind = "exact" if model.k == 1 else "conditional"
    if kind == "exact":
        return loglik_exact_var1(model, data, validate=validate)
    if kind == "conditional":
        return loglik_conditional(model, data, validate=validate)
    raise DataValidationError(f"unknown likelihood kind '{kind}'")
