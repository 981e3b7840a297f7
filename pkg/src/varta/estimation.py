"""Maximum likelihood fitting and asymptotic standard errors.

Parameters are optimized in a fully unconstrained space: lag matrices
enter raw, the latent correlation through spherical Cholesky angles, and
positive marginal parameters through logs.  Gradients and Hessians are
central finite differences of the log-likelihood; standard errors come
from the observed information in the unconstrained space mapped to the
natural space by the delta method.

Fitting is deterministic: no randomness anywhere (the single fallback
restart uses a fixed perturbation), so identical inputs give identical
results.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize

from .errors import (
    DataValidationError,
    NonStationaryError,
    NotPositiveDefiniteError,
    NumericalError,
)
from .gaussian import (
    CorrelationMatrix,
    cholesky_lower,
    corr_to_unconstrained,
    normal_quantile,
    unconstrained_to_corr,
)
from .likelihood import (
    BARRIER_LOGLIK,
    TimeSeriesData,
    VartaModel,
    _latent_and_jacobian,
    gaussian_loglik,
    latentize,
    validate_data,
)
from .marginals import (
    EmpiricalMarginal,
    GaussianMarginal,
    Marginal,
    WeibullMarginal,
    fit_marginal,
)
from .var_model import VarParams, companion, derive_omega, spectral_radius


def central_diff_grad(f, x: np.ndarray, rel_step: float = 1e-6) -> np.ndarray:
    """Central finite-difference gradient with per-coordinate steps."""
    x = np.asarray(x, dtype=float)
    g = np.empty_like(x)
    for i in range(x.size):
        h = rel_step * max(1.0, abs(x[i]))
        xp, xm = x.copy(), x.copy()
        xp[i] += h
        xm[i] -= h
        g[i] = (f(xp) - f(xm)) / (2.0 * h)
    return g


def central_diff_hessian(f, x: np.ndarray, rel_step: float = 1e-4) -> np.ndarray:
    """Central finite-difference Hessian (symmetric by construction)."""
    x = np.asarray(x, dtype=float)
    m = x.size
    h = rel_step * np.maximum(1.0, np.abs(x))
    hess = np.empty((m, m))
    f0 = f(x)
    for i in range(m):
        xp, xm = x.copy(), x.copy()
        xp[i] += h[i]
        xm[i] -= h[i]
        hess[i, i] = (f(xp) - 2.0 * f0 + f(xm)) / h[i] ** 2
    for i in range(m):
        for j in range(i + 1, m):
            xpp, xpm, xmp, xmm = x.copy(), x.copy(), x.copy(), x.copy()
            xpp[[i, j]] += [h[i], h[j]]
            xpm[i] += h[i]
            xpm[j] -= h[j]
            xmp[i] -= h[i]
            xmp[j] += h[j]
            xmm[[i, j]] -= [h[i], h[j]]
            hess[i, j] = hess[j, i] = (
                f(xpp) - f(xpm) - f(xmp) + f(xmm)
            ) / (4.0 * h[i] * h[j])
    return hess


class ParamPacking:
    """Maps between VartaModel and flat parameter vectors.

    Unconstrained layout: [vec(A_1) .. vec(A_k) | correlation angles |
    per-series marginal parameters, positive ones logged].  The natural
    layout replaces angles by correlations and logs by the parameters
    themselves; both have the same length, and vec() stacks columns.
    """

    def __init__(self, p: int, k: int, marginals: tuple[Marginal, ...]):
        self.p = p
        self.k = k
        self.marginals = tuple(marginals)
        self.n_var = k * p * p
        self.n_corr = p * (p - 1) // 2
        self.n_marg = sum(m.n_params for m in self.marginals)
        self.n_params = self.n_var + self.n_corr + self.n_marg

    @classmethod
    def from_model(cls, model: VartaModel) -> "ParamPacking":
        return cls(model.p, model.k, model.marginals)

    # -- flat vector <-> model ---------------------------------------------
    def pack(self, model: VartaModel) -> np.ndarray:
        x = np.empty(self.n_params)
        pos = 0
        for a in model.var.A:
            x[pos:pos + self.p * self.p] = a.ravel(order="F")
            pos += self.p * self.p
        x[pos:pos + self.n_corr] = corr_to_unconstrained(model.var.sigma)
        pos += self.n_corr
        for m in model.marginals:
            vals = self._to_unconstrained(m)
            x[pos:pos + vals.size] = vals
            pos += vals.size
        return x

    def unpack(self, x: np.ndarray) -> VartaModel:
        x = np.asarray(x, dtype=float)
        if x.size != self.n_params:
            raise DataValidationError(
                f"expected {self.n_params} parameters, got {x.size}"
            )
        return VartaModel(var=self.unpack_var(x),
                          marginals=self.unpack_marginals(x))

    def unpack_var(self, x: np.ndarray) -> VarParams:
        pos = 0
        mats = []
        for _ in range(self.k):
            mats.append(
                x[pos:pos + self.p * self.p].reshape((self.p, self.p), order="F")
            )
            pos += self.p * self.p
        corr = unconstrained_to_corr(x[pos:pos + self.n_corr], self.p)
        return VarParams(A=np.stack(mats), sigma=corr)

    def unpack_marginals(self, x: np.ndarray) -> tuple[Marginal, ...]:
        pos = self.n_var + self.n_corr
        margs = []
        for m in self.marginals:
            vals = x[pos:pos + m.n_params]
            pos += m.n_params
            margs.append(self._from_unconstrained(m, vals))
        return tuple(margs)

    @staticmethod
    def _to_unconstrained(m: Marginal) -> np.ndarray:
        if isinstance(m, WeibullMarginal):
            return np.log(m.params())
        if isinstance(m, GaussianMarginal):
            return np.array([m.mean, np.log(m.sd)])
        return np.empty(0)

    @staticmethod
    def _from_unconstrained(template: Marginal, vals: np.ndarray) -> Marginal:
        if isinstance(template, WeibullMarginal):
            return template.with_params(np.exp(vals))
        if isinstance(template, GaussianMarginal):
            return template.with_params([vals[0], np.exp(vals[1])])
        return template

    # -- natural-space view -------------------------------------------------
    def natural(self, model: VartaModel) -> np.ndarray:
        parts = [a.ravel(order="F") for a in model.var.A]
        parts.append(model.var.sigma.rho)
        parts.extend(m.params() for m in model.marginals)
        return np.concatenate(parts)

    def natural_from_unconstrained(self, x: np.ndarray) -> np.ndarray:
        return self.natural(self.unpack(x))

    def names(self) -> list[str]:
        out = []
        for lag in range(1, self.k + 1):
            prefix = "A" if self.k == 1 else f"A{lag}_"
            for j in range(1, self.p + 1):
                for i in range(1, self.p + 1):
                    out.append(f"{prefix}{i}{j}")
        for i in range(1, self.p + 1):
            for j in range(i + 1, self.p + 1):
                out.append(f"rho{i}{j}")
        for idx, m in enumerate(self.marginals, start=1):
            out.extend(f"{name}{idx}" for name in m.param_names())
        return out

    def groups(self) -> list[str]:
        return (["A"] * self.n_var + ["rho"] * self.n_corr
                + ["marginal"] * self.n_marg)


@dataclass(frozen=True)
class FitResult:
    """Point estimates with asymptotic uncertainty and fit metadata."""

    model: VartaModel
    names: tuple[str, ...]
    estimates: np.ndarray
    se: np.ndarray
    tvalues: np.ndarray
    loglik: float
    converged: bool
    n_iter: int
    gradient_norm: float
    message: str = ""
    se_warning: str | None = None

    def to_dict(self) -> dict:
        return {
            "model": self.model.to_dict(),
            "loglik": self.loglik,
            "converged": bool(self.converged),
            "n_iter": int(self.n_iter),
            "gradient_norm": self.gradient_norm,
            "se_warning": self.se_warning,
            "parameters": [
                {
                    "name": name,
                    "estimate": float(est),
                    "se": None if np.isnan(s) else float(s),
                    "tvalue": None if np.isnan(t) else float(t),
                }
                for name, est, s, t in zip(
                    self.names, self.estimates, self.se, self.tvalues
                )
            ],
        }

    def format_table(self) -> str:
        packing = ParamPacking.from_model(self.model)
        groups = packing.groups()
        width = max(len(n) for n in self.names) + 2
        header = f"{'':{width}}{'Estimate':>12}{'St.err':>12}{'t-value':>12}"
        rule = "-" * len(header)
        lines = [header, rule, "Multivariate relationships".center(len(header)), rule]

        def row(i):
            se = f"{self.se[i]:12.4f}" if np.isfinite(self.se[i]) else f"{'--':>12}"
            tv = (f"{self.tvalues[i]:12.3f}"
                  if np.isfinite(self.tvalues[i]) else f"{'--':>12}")
            return f"{self.names[i]:{width}}{self.estimates[i]:12.4f}{se}{tv}"

        for i, g in enumerate(groups):
            if g == "A":
                lines.append(row(i))
        lines.append(rule)
        for i, g in enumerate(groups):
            if g == "rho":
                lines.append(row(i))
        if packing.n_marg:
            lines.append(rule)
            lines.append("Marginal distribution parameters".center(len(header)))
            lines.append(rule)
            for i, g in enumerate(groups):
                if g == "marginal":
                    lines.append(row(i))
        lines.append(rule)
        lines.append(f"log-likelihood {self.loglik:.4f}   "
                     f"converged {self.converged}   iterations {self.n_iter}")
        return "\n".join(lines)


def initial_values(data: TimeSeriesData, k: int,
                   families: list[str]) -> VartaModel:
    """Starting model: marginal fits, a latent-scale least-squares VAR,
    and the plain sample correlation of the latentized series.

    The least-squares lag matrices are shrunk toward zero until the
    companion spectral radius is at most 0.98 and the implied innovation
    covariance is positive definite.
    """
    if len(families) != data.p:
        raise DataValidationError(
            f"{len(families)} families for {data.p} columns"
        )
    if k < 1:
        raise DataValidationError("order k must be >= 1")
    if data.n <= 10 * data.p:
        raise DataValidationError(
            f"need n > 10 p = {10 * data.p} observations, got {data.n}"
        )
    marginals = tuple(
        fit_marginal(f, data.values[:, i]) for i, f in enumerate(families)
    )
    for i, m in enumerate(marginals):
        m.validate_data(data.values[:, i], name=data.names[i])

    probe = VartaModel(
        var=VarParams(A=np.zeros((k, data.p, data.p)),
                      sigma=CorrelationMatrix.identity(data.p)),
        marginals=marginals,
    )
    z = latentize(probe, data)

    n, p = z.shape
    lagged = np.hstack([z[k - i:n - i] for i in range(1, k + 1)])
    coef, *_ = np.linalg.lstsq(lagged, z[k:], rcond=None)
    a = np.stack([coef[(i - 1) * p:i * p].T for i in range(1, k + 1)])

    corr_mat = np.corrcoef(z, rowvar=False)
    if p == 1:
        corr_mat = np.array([[1.0]])
    sigma = _nearest_valid_correlation(corr_mat)

    a = _shrink_to_stationary(a, sigma)
    return VartaModel(var=VarParams(A=a, sigma=sigma), marginals=marginals)


def _nearest_valid_correlation(mat: np.ndarray) -> CorrelationMatrix:
    mat = 0.5 * (mat + mat.T)
    np.fill_diagonal(mat, 1.0)
    for _ in range(60):
        try:
            return CorrelationMatrix(mat)
        except (DataValidationError, NotPositiveDefiniteError):
            mat = 0.95 * mat
            np.fill_diagonal(mat, 1.0)
    raise NumericalError("could not repair the initial correlation estimate")


def _shrink_to_stationary(a: np.ndarray, sigma: CorrelationMatrix) -> np.ndarray:
    for _ in range(200):
        vp = VarParams(A=a, sigma=sigma)
        sr = spectral_radius(companion(vp))
        if sr <= 0.98:
            try:
                derive_omega(vp)
                return a
            except (NonStationaryError, NotPositiveDefiniteError):
                pass
        a = 0.95 * a
    raise NumericalError("could not find a stationary starting point")


class _Objective:
    """Negative log-likelihood over the unconstrained vector.

    The latent matrix and Jacobian sum depend only on the marginal block
    of the vector, so they are cached keyed on it: finite-difference
    loops that perturb VAR/correlation coordinates (the majority) reuse
    them and pay only for the Gaussian part.
    """

    def __init__(self, packing: ParamPacking, data: TimeSeriesData, kind: str):
        self.packing = packing
        self.values = data.values
        self.kind = ("exact" if packing.k == 1 else "conditional") \
            if kind == "auto" else kind
        self._head = packing.n_var + packing.n_corr
        self._key: bytes | None = None
        self._z: np.ndarray | None = None
        self._jac_sum = 0.0

    def _marginal_parts(self, x: np.ndarray) -> tuple[np.ndarray, float]:
        key = x[self._head:].tobytes()
        if key != self._key:
            margs = self.packing.unpack_marginals(x)
            z, jac = _latent_and_jacobian(margs, self.values)
            skip = 0 if self.kind == "exact" else self.packing.k
            self._key, self._z = key, z
            self._jac_sum = float(jac[skip:].sum())
        return self._z, self._jac_sum

    def __call__(self, x: np.ndarray) -> float:
        try:
            var = self.packing.unpack_var(x)
            z, jac_sum = self._marginal_parts(x)
            return -(gaussian_loglik(var, z, self.kind) + jac_sum)
        except (DataValidationError, NumericalError, FloatingPointError,
                OverflowError):
            return -BARRIER_LOGLIK


def _objective_factory(packing: ParamPacking, data: TimeSeriesData, kind: str):
    return _Objective(packing, data, kind)


def fit(data: TimeSeriesData, k: int, families: list[str], *,
        likelihood_kind: str = "auto", max_iter: int = 500,
        gtol: float = 1e-6, ftol: float = 1e-10,
        compute_se: bool = True) -> FitResult:
    """Maximize the log-likelihood by L-BFGS over the unconstrained space.

    Gradients are central finite differences (relative step 1e-6); the
    search stops when the projected-gradient max-norm falls below ``gtol``
    or the relative objective change falls below ``ftol``.  On an
    unsuccessful first attempt a single restart from a deterministically
    perturbed starting point is tried and the better endpoint kept.
    """
    model0 = initial_values(data, k, families)
    validate_data(model0, data)
    packing = ParamPacking.from_model(model0)
    x0 = packing.pack(model0)
    negloglik = _objective_factory(packing, data, likelihood_kind)

    def grad(x):
        return central_diff_grad(negloglik, x)

    def run(x_start):
        return minimize(
            negloglik, x_start, jac=grad, method="L-BFGS-B",
            options={"maxiter": max_iter, "ftol": ftol, "gtol": gtol,
                     "maxcor": 20},
        )

    res = run(x0)
    if not res.success:
        bump = 0.05 * np.where(np.arange(x0.size) % 2 == 0, 1.0, -1.0)
        res2 = run(x0 * 0.9 + bump)
        if (res2.success and not res.success) or res2.fun < res.fun:
            res = res2

    xhat = res.x
    model = packing.unpack(xhat)
    grad_at_opt = grad(xhat)
    estimates = packing.natural(model)

    se = np.full(packing.n_params, np.nan)
    se_warning = None
    if compute_se:
        se, se_warning = _standard_errors(negloglik, packing, xhat)
    with np.errstate(invalid="ignore", divide="ignore"):
        tvalues = estimates / se

    return FitResult(
        model=model,
        names=tuple(packing.names()),
        estimates=estimates,
        se=se,
        tvalues=tvalues,
        loglik=float(-res.fun),
        converged=bool(res.success),
        n_iter=int(res.nit),
        gradient_norm=float(np.max(np.abs(grad_at_opt))),
        message=str(res.message),
        se_warning=se_warning,
    )


def _standard_errors(negloglik, packing: ParamPacking,
                     xhat: np.ndarray) -> tuple[np.ndarray, str | None]:
    """Observed information -> natural-space standard errors."""
    info = central_diff_hessian(negloglik, xhat, rel_step=1e-4)
    jac = _unpack_jacobian(packing, xhat)
    try:
        lower = cholesky_lower(info)
    except (NotPositiveDefiniteError, DataValidationError):
        warnings.warn("observed information is not positive definite; "
                      "standard errors are undefined", stacklevel=2)
        return np.full(packing.n_params, np.nan), "information matrix not PD"
    inv_info = np.linalg.inv(lower.T) @ np.linalg.inv(lower)
    cov_nat = jac @ inv_info @ jac.T
    diag = np.diag(cov_nat).copy()
    warning = None
    if np.any(diag <= 0):
        warning = "nonpositive variance for some parameters"
        diag[diag <= 0] = np.nan
    return np.sqrt(diag), warning


def _unpack_jacobian(packing: ParamPacking, x: np.ndarray,
                     rel_step: float = 1e-6) -> np.ndarray:
    """d natural / d unconstrained, by central differences."""
    m = packing.n_params
    jac = np.empty((m, m))
    for i in range(m):
        h = rel_step * max(1.0, abs(x[i]))
        xp, xm = x.copy(), x.copy()
        xp[i] += h
        xm[i] -= h
        jac[:, i] = (
            packing.natural_from_unconstrained(xp)
            - packing.natural_from_unconstrained(xm)
        ) / (2.0 * h)
    return jac


def standard_errors(model: VartaModel, data: TimeSeriesData,
                    likelihood_kind: str = "auto") -> np.ndarray:
    """Asymptotic standard errors of all parameters at the given model.

    NaN entries (with a warning) when the observed information is not
    positive definite.
    """
    validate_data(model, data)
    packing = ParamPacking.from_model(model)
    negloglik = _objective_factory(packing, data, likelihood_kind)
    se, _ = _standard_errors(negloglik, packing, packing.pack(model))
    return se


def confidence_intervals(fr: FitResult, level: float = 0.95) -> np.ndarray:
    """Per-parameter (lo, hi) at the given level, natural space."""
    if not (0.0 < level < 1.0):
        raise DataValidationError("confidence level must be in (0, 1)")
    half = normal_quantile(0.5 * (1.0 + level)) * fr.se
    return np.column_stack([fr.estimates - half, fr.estimates + half])
