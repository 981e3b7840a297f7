"""Latent VAR parameter algebra under the unit-variance constraint.

The latent process is a zero-mean VAR(k) whose stationary covariance has
unit diagonal, so the innovation covariance is not free: given the lag
matrices and the stationary correlation it is derived here.  For one lag
the derivation is a single matrix identity; for more lags it goes through
the companion form and the block-Toeplitz stacked covariance.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import (
    DataValidationError,
    NonStationaryError,
    NotPositiveDefiniteError,
    NumericalError,
    OmegaNotPDError,
)
from .gaussian import CorrelationMatrix, cholesky_lower


@dataclass(frozen=True)
class VarParams:
    """Lag matrices A (k, p, p) plus the stationary correlation.

    Construction validates shapes only; stationarity and the positive
    definiteness of the implied innovation covariance are checked where
    they matter (`validate`, `derive_omega`), so that candidate parameter
    values appearing during optimization can be represented and rejected
    with a penalty instead of an exception.
    """

    A: np.ndarray
    sigma: CorrelationMatrix

    def __post_init__(self):
        a = np.asarray(self.A, dtype=float)
        if a.ndim == 2:
            a = a[None, :, :]
        if a.ndim != 3 or a.shape[1] != a.shape[2]:
            raise DataValidationError(
                f"A must be a (k, p, p) stack of square matrices, got {a.shape}"
            )
        if a.shape[1] != self.sigma.p:
            raise DataValidationError(
                f"A dimension {a.shape[1]} does not match correlation dimension "
                f"{self.sigma.p}"
            )
        if not np.all(np.isfinite(a)):
            raise DataValidationError("A must be finite")
        a = a.copy()
        a.setflags(write=False)
        object.__setattr__(self, "A", a)

    @property
    def p(self) -> int:
        return self.A.shape[1]

    @property
    def k(self) -> int:
        return self.A.shape[0]

    def validate(self) -> None:
        """Raise unless the parameters define a valid stationary process."""
        if spectral_radius(companion(self)) >= 1.0:
            raise NonStationaryError(
                "companion matrix has spectral radius >= 1"
            )
        derive_omega(self)  # raises OmegaNotPDError when invalid

    def to_dict(self) -> dict:
        return {
            "p": self.p,
            "k": self.k,
            "A": [ai.tolist() for ai in self.A],
            "rho": self.sigma.rho.tolist(),
        }


def companion(vp: VarParams) -> np.ndarray:
    """kp x kp companion matrix: lag blocks on top, identities below."""
    p, k = vp.p, vp.k
    if k == 1:
        return vp.A[0].copy()
    b = np.zeros((k * p, k * p))
    for i in range(k):
        b[:p, i * p:(i + 1) * p] = vp.A[i]
    idx = np.arange((k - 1) * p)
    b[p + idx, idx] = 1.0
    return b


def spectral_radius(b: np.ndarray) -> float:
    """Largest eigenvalue modulus of a square matrix."""
    b = np.asarray(b, dtype=float)
    if b.ndim != 2 or b.shape[0] != b.shape[1]:
        raise DataValidationError(f"expected a square matrix, got shape {b.shape}")
    try:
        return float(np.max(np.abs(np.linalg.eigvals(b))))
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"eigenvalue iteration failed: {exc}") from exc


def _commutation_matrix(p: int) -> np.ndarray:
    """K with K vec(M) = vec(M') for p x p matrices, column-major vec."""
    k = np.zeros((p * p, p * p))
    for i in range(p):
        for j in range(p):
            k[i + j * p, j + i * p] = 1.0
    return k


def solve_autocov(vp: VarParams) -> list[np.ndarray]:
    """Autocovariances Gamma_0..Gamma_{k-1} of the stationary latent VAR.

    Gamma_0 is the given correlation matrix; the higher lags solve the
    stacked linear system from Gamma_s = sum_i A_i Gamma_{s-i} (with
    Gamma_{-j} = Gamma_j'), vectorized over the (k-1) p^2 unknowns.
    """
    p, k = vp.p, vp.k
    gamma0 = vp.sigma.matrix
    if k == 1:
        return [gamma0]

    n_unknown = (k - 1) * p * p
    eye_pp = np.eye(p * p)
    km = _commutation_matrix(p)
    coef = np.zeros((n_unknown, n_unknown))
    rhs = np.zeros(n_unknown)

    def kron_a(lag: int) -> np.ndarray:
        # vec(A_lag @ G) = (I kron A_lag) vec(G)
        return np.kron(np.eye(p), vp.A[lag - 1])

    for s in range(1, k):
        row = slice((s - 1) * p * p, s * p * p)
        block = np.zeros((p * p, n_unknown))
        block[:, row] += eye_pp
        for m in range(1, k):
            col = slice((m - 1) * p * p, m * p * p)
            if 1 <= s - m <= k:
                block[:, col] -= kron_a(s - m)
            if s + m <= k:
                block[:, col] -= kron_a(s + m) @ km
        coef[row] = block
        rhs[row] = kron_a(s) @ gamma0.ravel(order="F")

    try:
        sol = np.linalg.solve(coef, rhs)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(
            "the autocovariance system is singular for these parameters"
        ) from exc
    gammas = [gamma0]
    for s in range(1, k):
        gammas.append(sol[(s - 1) * p * p:s * p * p].reshape((p, p), order="F"))
    return gammas


def companion_covariance(vp: VarParams) -> np.ndarray:
    """Block-Toeplitz stacked covariance of (Z_t, ..., Z_{t-k+1})."""
    p, k = vp.p, vp.k
    gammas = solve_autocov(vp)
    sk = np.zeros((k * p, k * p))
    for i in range(k):
        for j in range(k):
            g = gammas[j - i] if j >= i else gammas[i - j].T
            sk[i * p:(i + 1) * p, j * p:(j + 1) * p] = g
    return 0.5 * (sk + sk.T)


def derive_omega(vp: VarParams) -> np.ndarray:
    """Innovation covariance implied by unit stationary variances.

    k = 1:  Omega = Sigma - A Sigma A'.
    k >= 2: the upper-left p x p block of S_k - B S_k B' in companion form.
    Raises NonStationaryError / OmegaNotPDError, which optimizers map to a
    penalty value.
    """
    if spectral_radius(companion(vp)) >= 1.0:
        raise NonStationaryError("companion matrix has spectral radius >= 1")
    p = vp.p
    if vp.k == 1:
        a, sig = vp.A[0], vp.sigma.matrix
        omega = sig - a @ sig @ a.T
    else:
        sk = companion_covariance(vp)
        b = companion(vp)
        theta = sk - b @ sk @ b.T
        omega = theta[:p, :p]
    omega = 0.5 * (omega + omega.T)
    try:
        cholesky_lower(omega)
    except NotPositiveDefiniteError as exc:
        raise OmegaNotPDError(
            "implied innovation covariance is not positive definite",
            pivot=exc.pivot,
        ) from exc
    return omega


def omega_expansion(vp: VarParams) -> np.ndarray:
    """Innovation covariance written out as the explicit double sum.

    Omega = Gamma_0 - sum_i sum_j A_i Gamma_{j-i} A_j', the expansion of
    the companion-form block extraction; kept as an independent
    cross-check of derive_omega.
    """
    gammas = solve_autocov(vp)

    def gamma(s: int) -> np.ndarray:
        return gammas[s] if s >= 0 else gammas[-s].T

    k = vp.k
    acc = np.zeros((vp.p, vp.p))
    for i in range(1, k + 1):
        for j in range(1, k + 1):
            acc += vp.A[i - 1] @ gamma(j - i) @ vp.A[j - 1].T
    return gammas[0] - acc
