"""Scalar and multivariate Gaussian primitives.

Everything here is a pure function of its inputs (or an immutable value
object), so the module is safe for concurrent use.  Scalar functions accept
floats or ndarrays and vectorize elementwise.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import special

from .errors import DataValidationError, NotPositiveDefiniteError

LOG_2PI = float(np.log(2.0 * np.pi))

# Probabilities fed into the inverse normal CDF are kept strictly inside
# (0, 1): composing quantile(cdf(.)) across modules must never see 0 or 1.
PROB_CLAMP = 1e-15


def clamp_probability(u):
    """Clip probabilities into [PROB_CLAMP, 1 - PROB_CLAMP]."""
    return np.clip(u, PROB_CLAMP, 1.0 - PROB_CLAMP)


def _maybe_scalar(x, arr):
    return float(arr) if np.isscalar(x) or np.ndim(x) == 0 else arr


def normal_cdf(z):
    """Standard normal CDF.

    Computed through erfc for full relative accuracy in the lower tail,
    then clamped away from exactly 0 and 1 (see PROB_CLAMP).
    """
    z_arr = np.asarray(z, dtype=float)
    u = 0.5 * special.erfc(-z_arr / np.sqrt(2.0))
    return _maybe_scalar(z, clamp_probability(u))


def normal_pdf(z):
    """Standard normal density."""
    z_arr = np.asarray(z, dtype=float)
    return _maybe_scalar(z, np.exp(-0.5 * z_arr * z_arr) / np.sqrt(2.0 * np.pi))


def log_normal_pdf(z):
    """Log of the standard normal density."""
    z_arr = np.asarray(z, dtype=float)
    return _maybe_scalar(z, -0.5 * (z_arr * z_arr + LOG_2PI))


# Coefficients of Acklam's rational approximation to the normal quantile.
_ACKLAM_A = (-3.969683028665376e+01, 2.209460984245205e+02,
             -2.759285104469687e+02, 1.383577518672690e+02,
             -3.066479806614716e+01, 2.506628277459239e+00)
_ACKLAM_B = (-5.447609879822406e+01, 1.615858368580409e+02,
             -1.556989798598866e+02, 6.680131188771972e+01,
             -1.328068155288572e+01)
_ACKLAM_C = (-7.784894002430293e-03, -3.223964580411365e-01,
             -2.400758277161838e+00, -2.549732539343734e+00,
             4.374664141464968e+00, 2.938163982698783e+00)
_ACKLAM_D = (7.784695709041462e-03, 3.224671290700398e-01,
             2.445134137142996e+00, 3.754408661907416e+00)
_ACKLAM_SPLIT = 0.02425


def _acklam_tail(q):
    c, d = _ACKLAM_C, _ACKLAM_D
    num = ((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]
    den = (((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0
    return num / den


def _acklam(u):
    """Rational approximation to the normal quantile, |error| ~ 1e-9."""
    a, b = _ACKLAM_A, _ACKLAM_B
    # Central formula evaluated everywhere (cheap, no masking), tails
    # patched afterwards; typical likelihood workloads have few or no
    # tail points.
    q = u - 0.5
    r = q * q
    num = ((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]
    den = ((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0
    z = q * num / den

    lo = u < _ACKLAM_SPLIT
    if np.any(lo):
        z[lo] = _acklam_tail(np.sqrt(-2.0 * np.log(u[lo])))
    hi = u > 1.0 - _ACKLAM_SPLIT
    if np.any(hi):
        z[hi] = -_acklam_tail(np.sqrt(-2.0 * np.log(1.0 - u[hi])))
    return z


def normal_quantile(u):
    """Inverse standard normal CDF for u strictly inside (0, 1).

    Acklam's rational approximation refined by one Newton step against the
    erfc-based CDF.  The upper half is folded onto the lower by symmetry
    (1 - u is exact there), so both the approximation and the refinement
    work where erfc has full relative precision; the result is accurate
    to ~1e-14 in z across the whole domain, keeping optimizer noise out
    of repeated quantile(cdf(.)) compositions.
    """
    u_arr = np.asarray(u, dtype=float)
    if np.any(u_arr <= 0.0) or np.any(u_arr >= 1.0):
        raise DataValidationError("normal_quantile requires u strictly in (0, 1)")
    scalar = np.isscalar(u) or np.ndim(u) == 0
    u_arr = np.atleast_1d(np.asarray(u_arr, dtype=float))

    flip = u_arr > 0.5
    uu = np.where(flip, 1.0 - u_arr, u_arr)
    z = _acklam(uu)
    # Newton step z <- z - (Phi(z) - uu) / phi(z); z <= 0 here, where the
    # erfc-based CDF keeps full relative precision.  Skipped in the far
    # tail where 1/phi(z) overflows (u below ~1e-300, outside the clamp
    # policy anyway).
    with np.errstate(over="ignore", invalid="ignore"):
        cdf = 0.5 * special.erfc(-z / np.sqrt(2.0))
        step = (cdf - uu) * np.sqrt(2.0 * np.pi) * np.exp(0.5 * z * z)
        z = z - np.where(np.abs(z) < 37.0, step, 0.0)
    z = np.where(flip, -z, z)
    return float(z[0]) if scalar else z


def cholesky_lower(a: np.ndarray) -> np.ndarray:
    """Lower-triangular L with L L' = a.

    Raises NotPositiveDefiniteError with the failing pivot index when the
    input is not positive definite.
    """
    a = np.asarray(a, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise DataValidationError(f"expected a square matrix, got shape {a.shape}")
    scale = max(1.0, float(np.max(np.abs(a))))
    if np.max(np.abs(a - a.T)) > 1e-8 * scale:
        raise DataValidationError("matrix is not symmetric")
    try:
        return np.linalg.cholesky(a)
    except np.linalg.LinAlgError:
        pass
    # Rerun a plain right-looking factorization to locate the failing pivot.
    m = a.copy()
    n = m.shape[0]
    for j in range(n):
        d = m[j, j] - m[j, :j] @ m[j, :j]
        if d <= 0.0 or not np.isfinite(d):
            raise NotPositiveDefiniteError(
                f"matrix is not positive definite (pivot {j})", pivot=j
            )
        m[j, j] = np.sqrt(d)
        if j + 1 < n:
            m[j + 1:, j] = (m[j + 1:, j] - m[j + 1:, :j] @ m[j, :j]) / m[j, j]
    return np.tril(m)


def mvn_logpdf(x: np.ndarray, mean: np.ndarray, cov: np.ndarray) -> float:
    """Multivariate normal log density, via the Cholesky factor of cov."""
    x = np.asarray(x, dtype=float)
    mean = np.asarray(mean, dtype=float)
    lower = cholesky_lower(cov)
    y = np.linalg.solve(lower, x - mean)
    log_det = 2.0 * np.sum(np.log(np.diag(lower)))
    return float(-0.5 * (x.size * LOG_2PI + log_det + y @ y))


def mvn_logpdf_rows(resid: np.ndarray, lower: np.ndarray) -> float:
    """Sum of N(0, LL') log densities over the rows of ``resid``.

    ``lower`` is the Cholesky factor of the common covariance; used on the
    likelihood hot path where the factor is computed once per evaluation.
    """
    n, p = resid.shape
    y = np.linalg.solve(lower, resid.T)
    log_det = 2.0 * np.sum(np.log(np.diag(lower)))
    return float(-0.5 * (n * (p * LOG_2PI + log_det) + np.sum(y * y)))


@dataclass(frozen=True)
class CorrelationMatrix:
    """A unit-diagonal, symmetric, positive definite matrix.

    ``rho`` orders the strict upper triangle row-major:
    (1,2), (1,3), ..., (1,p), (2,3), ...
    """

    matrix: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=float)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise DataValidationError(f"correlation matrix must be square, got {m.shape}")
        if np.max(np.abs(np.diag(m) - 1.0)) > 1e-10:
            raise DataValidationError("correlation matrix diagonal must be 1")
        if np.max(np.abs(m - m.T)) > 1e-10:
            raise DataValidationError("correlation matrix must be symmetric")
        m = 0.5 * (m + m.T)
        np.fill_diagonal(m, 1.0)
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)
        cholesky_lower(m)  # raises if not positive definite

    @property
    def p(self) -> int:
        return self.matrix.shape[0]

    @property
    def rho(self) -> np.ndarray:
        iu = np.triu_indices(self.p, k=1)
        return self.matrix[iu]

    @classmethod
    def from_rho(cls, rho, p: int) -> "CorrelationMatrix":
        rho = np.asarray(rho, dtype=float)
        if rho.size != p * (p - 1) // 2:
            raise DataValidationError(
                f"rho must have length p(p-1)/2 = {p * (p - 1) // 2}, got {rho.size}"
            )
        m = np.eye(p)
        iu = np.triu_indices(p, k=1)
        m[iu] = rho
        m[(iu[1], iu[0])] = rho
        return cls(m)

    @classmethod
    def identity(cls, p: int) -> "CorrelationMatrix":
        return cls(np.eye(p))


def _angles_to_cholesky(angles: np.ndarray, p: int) -> np.ndarray:
    """Rows of the Cholesky factor from spherical angles in (0, pi)."""
    lower = np.zeros((p, p))
    lower[0, 0] = 1.0
    pos = 0
    for i in range(1, p):
        row_angles = angles[pos:pos + i]
        pos += i
        sin_prod = 1.0
        for j in range(i):
            lower[i, j] = np.cos(row_angles[j]) * sin_prod
            sin_prod *= np.sin(row_angles[j])
        lower[i, i] = sin_prod
    return lower


def _cholesky_to_angles(lower: np.ndarray) -> np.ndarray:
    p = lower.shape[0]
    angles = np.empty(p * (p - 1) // 2)
    pos = 0
    for i in range(1, p):
        sin_prod = 1.0
        for j in range(i):
            c = np.clip(lower[i, j] / sin_prod, -1.0, 1.0)
            theta = np.arccos(c)
            angles[pos] = theta
            pos += 1
            sin_prod *= np.sin(theta)
    return angles


def corr_to_unconstrained(corr: CorrelationMatrix) -> np.ndarray:
    """Map a correlation matrix to an unconstrained real vector.

    Spherical angles of the Cholesky rows, pushed through the logit of
    theta/pi.  The identity matrix maps to the zero vector, and every
    finite vector maps back to a valid matrix, which keeps likelihood
    searches over the correlation unconstrained.
    """
    angles = _cholesky_to_angles(cholesky_lower(corr.matrix))
    angles = np.clip(angles, 1e-12, np.pi - 1e-12)
    return np.log(angles / (np.pi - angles))


def unconstrained_to_corr(v: np.ndarray, p: int) -> CorrelationMatrix:
    """Inverse of corr_to_unconstrained; total on finite inputs."""
    v = np.asarray(v, dtype=float)
    if v.size != p * (p - 1) // 2:
        raise DataValidationError(
            f"expected length p(p-1)/2 = {p * (p - 1) // 2}, got {v.size}"
        )
    angles = np.pi * special.expit(v)
    lower = _angles_to_cholesky(angles, p)
    return CorrelationMatrix(lower @ lower.T)
