"""Marginal distribution families and their latent-Gaussian transforms.

Each family provides the CDF, quantile, log density, the monotone map
``to_latent`` (data scale -> standard normal scale), its inverse
``from_latent``, and ``log_jacobian_term``, the per-observation log
derivative of the latent transform entering the likelihood's change of
variables:

    log_jacobian_term(x) = log f(x) - log phi(to_latent(x))

All functions vectorize over ``x``.  Instances are immutable and safe to
share across threads or processes.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import ClassVar

import numpy as np
from scipy.optimize import brentq

from .errors import DataValidationError
from .gaussian import (
    clamp_probability,
    log_normal_pdf,
    normal_cdf,
    normal_quantile,
)

EULER_GAMMA = 0.57721566490153286


@dataclass(frozen=True)
class Marginal:
    """Base class; concrete families override the distribution methods."""

    family: ClassVar[str] = ""

    # -- distribution interface -------------------------------------------
    def cdf(self, x):
        raise NotImplementedError

    def quantile(self, u):
        raise NotImplementedError

    def log_pdf(self, x):
        raise NotImplementedError

    def sf(self, x):
        """Survival function 1 - F(x); overridden where the complement
        can be computed without cancellation."""
        return 1.0 - self.cdf(x)

    def isf(self, v):
        """Inverse survival function."""
        return self.quantile(1.0 - np.asarray(v, dtype=float))

    def to_latent(self, x):
        """z = quantile_of_normal(F(x)); strictly increasing in x.

        Points in the upper half go through the survival function so the
        tail keeps full relative precision (1 - F loses resolution near 1).
        """
        u = np.asarray(self.cdf(x), dtype=float)
        upper = u > 0.5
        tail = np.where(upper, np.asarray(self.sf(x), dtype=float), u)
        z = normal_quantile(clamp_probability(tail))
        out = np.where(upper, -z, z)
        return float(out) if np.ndim(x) == 0 else out

    def from_latent(self, z):
        """x = F^{-1}(Phi(z)); inverse of to_latent."""
        z_arr = np.asarray(z, dtype=float)
        u = normal_cdf(-np.abs(z_arr))
        out = np.where(z_arr > 0, self.isf(u), self.quantile(u))
        return float(out) if np.ndim(z) == 0 else out

    def log_jacobian_term(self, x):
        return self.log_pdf(x) - log_normal_pdf(self.to_latent(x))

    # -- parameter interface (for ML fitting) ------------------------------
    @property
    def n_params(self) -> int:
        return len(self.param_names())

    def param_names(self) -> list[str]:
        return []

    def params(self) -> np.ndarray:
        return np.empty(0)

    def with_params(self, values) -> "Marginal":
        if len(np.atleast_1d(values)) != 0:
            raise DataValidationError(f"{self.family} marginal takes no parameters")
        return self

    # -- data validation ----------------------------------------------------
    def validate_data(self, x, name: str = "series"):
        """Raise DataValidationError when any entry leaves the support."""
        x = np.asarray(x, dtype=float)
        if not np.all(np.isfinite(x)):
            t = int(np.flatnonzero(~np.isfinite(x))[0])
            raise DataValidationError(f"{name}: non-finite value at row {t + 1}")

    def to_dict(self) -> dict:
        raise NotImplementedError


def _where_support(x, inside, values):
    out = np.full(np.shape(values), -np.inf)
    np.copyto(out, values, where=inside)
    return out


@dataclass(frozen=True)
class WeibullMarginal(Marginal):
    """Weibull with shape alpha > 0 and scale lam > 0, support x > 0.

    F(x) = 1 - exp(-(x/lam)^alpha)
    f(x) = (alpha/lam) (x/lam)^(alpha-1) exp(-(x/lam)^alpha)
    """

    shape: float
    scale: float
    family: ClassVar[str] = "weibull"

    def __post_init__(self):
        if not (self.shape > 0 and np.isfinite(self.shape)):
            raise DataValidationError(f"weibull shape must be > 0, got {self.shape}")
        if not (self.scale > 0 and np.isfinite(self.scale)):
            raise DataValidationError(f"weibull scale must be > 0, got {self.scale}")

    def cdf(self, x):
        x_arr = np.asarray(x, dtype=float)
        with np.errstate(invalid="ignore"):
            u = -np.expm1(-((np.maximum(x_arr, 0.0) / self.scale) ** self.shape))
        out = np.where(x_arr > 0.0, u, 0.0)
        return float(out) if np.ndim(x) == 0 else out

    def quantile(self, u):
        u_arr = np.asarray(u, dtype=float)
        if np.any(u_arr <= 0.0) or np.any(u_arr >= 1.0):
            raise DataValidationError("quantile requires u strictly in (0, 1)")
        out = self.scale * (-np.log1p(-u_arr)) ** (1.0 / self.shape)
        return float(out) if np.ndim(u) == 0 else out

    def sf(self, x):
        x_arr = np.asarray(x, dtype=float)
        with np.errstate(invalid="ignore"):
            v = np.exp(-((np.maximum(x_arr, 0.0) / self.scale) ** self.shape))
        out = np.where(x_arr > 0.0, v, 1.0)
        return float(out) if np.ndim(x) == 0 else out

    def isf(self, v):
        v_arr = np.asarray(v, dtype=float)
        if np.any(v_arr <= 0.0) or np.any(v_arr >= 1.0):
            raise DataValidationError("isf requires v strictly in (0, 1)")
        out = self.scale * (-np.log(v_arr)) ** (1.0 / self.shape)
        return float(out) if np.ndim(v) == 0 else out

    def log_pdf(self, x):
        x_arr = np.asarray(x, dtype=float)
        inside = x_arr > 0.0
        r = np.where(inside, x_arr, 1.0) / self.scale
        with np.errstate(divide="ignore"):
            val = (np.log(self.shape / self.scale)
                   + (self.shape - 1.0) * np.log(r)
                   - r ** self.shape)
        out = np.where(inside, val, -np.inf)
        return float(out) if np.ndim(x) == 0 else out

    def mean(self) -> float:
        from scipy.special import gamma
        return self.scale * float(gamma(1.0 + 1.0 / self.shape))

    def param_names(self) -> list[str]:
        return ["alpha", "lambda"]

    def params(self) -> np.ndarray:
        return np.array([self.shape, self.scale])

    def with_params(self, values) -> "WeibullMarginal":
        shape, scale = np.asarray(values, dtype=float)
        return WeibullMarginal(shape=float(shape), scale=float(scale))

    def validate_data(self, x, name: str = "series"):
        super().validate_data(x, name)
        x = np.asarray(x, dtype=float)
        if np.any(x <= 0.0):
            t = int(np.flatnonzero(x <= 0.0)[0])
            raise DataValidationError(
                f"{name}: value {x.flat[t]} at row {t + 1} is outside the "
                "weibull support (must be > 0)"
            )

    def to_dict(self) -> dict:
        return {"family": "weibull", "shape": self.shape, "scale": self.scale}

    @classmethod
    def fit(cls, x) -> "WeibullMarginal":
        """Univariate maximum likelihood, method-of-moments fallback.

        ML solves the profile score for the shape by bracketed root
        finding; the scale then has a closed form.  If bracketing fails
        (degenerate samples), falls back to matching the first two moments
        of log(x), which is exact under the Gumbel representation of
        log-Weibull data.
        """
        x = np.asarray(x, dtype=float)
        if x.size < 2 or np.any(x <= 0):
            raise DataValidationError("weibull fit requires >= 2 positive values")
        logx = np.log(x)
        mean_logx = logx.mean()
        y = x / x.max()  # rescale before powering to avoid overflow

        def score(alpha):
            w = y ** alpha
            return 1.0 / alpha + mean_logx - (w @ logx) / w.sum()

        try:
            lo, hi = 1e-2, 1.0
            while score(hi) > 0 and hi < 1e3:
                hi *= 2.0
            alpha = brentq(score, lo, hi, xtol=1e-12, rtol=1e-12)
            lam = float(np.mean(y ** alpha) ** (1.0 / alpha) * x.max())
            return cls(shape=float(alpha), scale=lam)
        except (ValueError, RuntimeError):
            sd_logx = logx.std()
            if sd_logx <= 0:
                raise DataValidationError("weibull fit needs non-constant data")
            alpha = np.pi / (np.sqrt(6.0) * sd_logx)
            lam = float(np.exp(mean_logx + EULER_GAMMA / alpha))
            return cls(shape=float(alpha), scale=lam)


@dataclass(frozen=True)
class GaussianMarginal(Marginal):
    """Normal with mean mu and standard deviation sd > 0.

    The latent transform is the affine standardization, so the Jacobian
    term is the constant -log(sd); it vanishes for the standard normal.
    """

    mean: float = 0.0
    sd: float = 1.0
    family: ClassVar[str] = "gaussian"

    def __post_init__(self):
        if not (self.sd > 0 and np.isfinite(self.sd)):
            raise DataValidationError(f"gaussian sd must be > 0, got {self.sd}")
        if not np.isfinite(self.mean):
            raise DataValidationError("gaussian mean must be finite")

    def cdf(self, x):
        x_arr = np.asarray(x, dtype=float)
        out = normal_cdf((x_arr - self.mean) / self.sd)
        return float(out) if np.ndim(x) == 0 else out

    def quantile(self, u):
        return self.mean + self.sd * normal_quantile(u)

    def log_pdf(self, x):
        x_arr = np.asarray(x, dtype=float)
        out = log_normal_pdf((x_arr - self.mean) / self.sd) - np.log(self.sd)
        return float(out) if np.ndim(x) == 0 else out

    def to_latent(self, x):
        x_arr = np.asarray(x, dtype=float)
        out = (x_arr - self.mean) / self.sd
        return float(out) if np.ndim(x) == 0 else out

    def from_latent(self, z):
        z_arr = np.asarray(z, dtype=float)
        out = self.mean + self.sd * z_arr
        return float(out) if np.ndim(z) == 0 else out

    def log_jacobian_term(self, x):
        out = np.full(np.shape(x), -np.log(self.sd))
        return float(out) if np.ndim(x) == 0 else out

    def param_names(self) -> list[str]:
        return ["mu", "sigma"]

    def params(self) -> np.ndarray:
        return np.array([self.mean, self.sd])

    def with_params(self, values) -> "GaussianMarginal":
        mean, sd = np.asarray(values, dtype=float)
        return GaussianMarginal(mean=float(mean), sd=float(sd))

    def to_dict(self) -> dict:
        return {"family": "gaussian", "mean": self.mean, "sd": self.sd}

    @classmethod
    def fit(cls, x) -> "GaussianMarginal":
        x = np.asarray(x, dtype=float)
        sd = float(x.std())
        if sd <= 0:
            raise DataValidationError("gaussian fit needs non-constant data")
        return cls(mean=float(x.mean()), sd=sd)


@dataclass(frozen=True)
class EmpiricalMarginal(Marginal):
    """Nonparametric marginal from a reference sample.

    The CDF assigns plotting position r/(n+1) to the r-th order statistic
    and interpolates linearly between them, so it is strictly increasing
    on [min, max] and stays strictly inside (0, 1) there.  The quantile
    function inverts the interpolation.

    This marginal is treated as fixed (parameter-free) during likelihood
    optimization; its Jacobian term is a constant dropped from the
    likelihood, so series with empirical marginals contribute through the
    Gaussian part only.
    """

    values: np.ndarray
    family: ClassVar[str] = "empirical"
    _positions: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        v = np.sort(np.asarray(self.values, dtype=float))
        if v.size < 10:
            raise DataValidationError(
                f"empirical marginal needs >= 10 support points, got {v.size}"
            )
        if not np.all(np.isfinite(v)):
            raise DataValidationError("empirical support points must be finite")
        if np.any(np.diff(v) <= 0):
            raise DataValidationError(
                "empirical support points must be distinct (ties break the "
                "strictly increasing CDF; jitter the data if needed)"
            )
        v.setflags(write=False)
        object.__setattr__(self, "values", v)
        pos = np.arange(1, v.size + 1) / (v.size + 1.0)
        pos.setflags(write=False)
        object.__setattr__(self, "_positions", pos)

    def cdf(self, x):
        x_arr = np.asarray(x, dtype=float)
        out = np.interp(x_arr, self.values, self._positions)
        return float(out) if np.ndim(x) == 0 else out

    def quantile(self, u):
        u_arr = np.asarray(u, dtype=float)
        if np.any(u_arr <= 0.0) or np.any(u_arr >= 1.0):
            raise DataValidationError("quantile requires u strictly in (0, 1)")
        out = np.interp(u_arr, self._positions, self.values)
        return float(out) if np.ndim(u) == 0 else out

    def log_pdf(self, x):
        """Log of the piecewise-constant interpolation density."""
        x_arr = np.atleast_1d(np.asarray(x, dtype=float))
        idx = np.clip(np.searchsorted(self.values, x_arr, side="right"), 1,
                      self.values.size - 1)
        gap = self.values[idx] - self.values[idx - 1]
        dens = (self._positions[idx] - self._positions[idx - 1]) / gap
        out = np.where(
            (x_arr >= self.values[0]) & (x_arr <= self.values[-1]),
            np.log(dens), -np.inf,
        )
        return float(out[0]) if np.ndim(x) == 0 else out

    def log_jacobian_term(self, x):
        # Parameter-free by convention: constant terms do not move the
        # likelihood maximizer, so the contribution is dropped entirely.
        out = np.zeros(np.shape(x))
        return 0.0 if np.ndim(x) == 0 else out

    def validate_data(self, x, name: str = "series"):
        super().validate_data(x, name)
        x = np.asarray(x, dtype=float)
        bad = (x < self.values[0]) | (x > self.values[-1])
        if np.any(bad):
            t = int(np.flatnonzero(bad)[0])
            raise DataValidationError(
                f"{name}: value {x.flat[t]} at row {t + 1} is outside the "
                "empirical support range"
            )

    def to_dict(self) -> dict:
        return {"family": "empirical", "values": self.values.tolist()}

    @classmethod
    def fit(cls, x) -> "EmpiricalMarginal":
        return cls(values=np.asarray(x, dtype=float))


_FAMILIES = {
    "weibull": WeibullMarginal,
    "gaussian": GaussianMarginal,
    "empirical": EmpiricalMarginal,
}


def marginal_from_dict(d: dict) -> Marginal:
    """Build a marginal from its JSON representation."""
    if "family" not in d:
        raise DataValidationError("marginal spec is missing the 'family' field")
    family = d["family"]
    try:
        if family == "weibull":
            return WeibullMarginal(shape=float(d["shape"]), scale=float(d["scale"]))
        if family == "gaussian":
            return GaussianMarginal(mean=float(d["mean"]), sd=float(d["sd"]))
        if family == "empirical":
            return EmpiricalMarginal(values=np.asarray(d["values"], dtype=float))
    except KeyError as exc:
        raise DataValidationError(
            f"marginal spec for family '{family}' is missing field {exc}"
        ) from None
    raise DataValidationError(
        f"unknown marginal family '{family}' (expected one of {sorted(_FAMILIES)})"
    )


def fit_marginal(family: str, x) -> Marginal:
    """Univariate fit of the named family to a data column."""
    if family not in _FAMILIES:
        raise DataValidationError(
            f"unknown marginal family '{family}' (expected one of {sorted(_FAMILIES)})"
        )
    return _FAMILIES[family].fit(x)
