import numpy as np
import pytest

from varta.errors import DataValidationError, NonStationaryError, OmegaNotPDError
from varta.gaussian import CorrelationMatrix
from varta.simulation import RngSpec, simulate_latent
from varta.var_model import (
    VarParams,
    companion,
    companion_covariance,
    derive_omega,
    omega_expansion,
    solve_autocov,
    spectral_radius,
)

TRIVARIATE_A = np.array([
    [0.7, 0.2, 0.1],
    [0.3, 0.5, 0.2],
    [0.1, 0.7, -0.2],
])
TRIVARIATE_SIGMA = CorrelationMatrix.from_rho([0.5, 0.3, 0.7], 3)


def _random_stationary(rng, p, k, target_radius=0.6):
    """Random VarParams with a valid (PD) derived innovation covariance."""
    while True:
        a = rng.standard_normal((k, p, p)) * 0.4
        vp = VarParams(A=a, sigma=_random_corr(rng, p))
        sr = spectral_radius(companion(vp))
        if sr >= 1e-6:
            scale = target_radius / sr
            a = np.stack([a[i] * scale ** (i + 1) for i in range(k)])
            vp = VarParams(A=a, sigma=vp.sigma)
        try:
            derive_omega(vp)
            return vp
        except (NonStationaryError, OmegaNotPDError):
            continue


def _random_corr(rng, p):
    raw = rng.standard_normal((p + 5, p))
    c = np.corrcoef(raw, rowvar=False)
    return CorrelationMatrix(0.9 * c + 0.1 * np.eye(p))


class TestCompanion:
    def test_single_lag_is_the_matrix(self):
        vp = VarParams(A=TRIVARIATE_A, sigma=TRIVARIATE_SIGMA)
        assert np.array_equal(companion(vp), TRIVARIATE_A)

    def test_scalar_ar2(self):
        vp = VarParams(
            A=np.array([[[0.5]], [[0.2]]]),
            sigma=CorrelationMatrix.identity(1),
        )
        assert np.array_equal(companion(vp), [[0.5, 0.2], [1.0, 0.0]])

    def test_block_structure_positionally(self):
        rng = np.random.default_rng(0)
        p, k = 2, 2
        a = rng.standard_normal((k, p, p)) * 0.3
        vp = VarParams(A=a, sigma=CorrelationMatrix.identity(p))
        b = companion(vp)
        assert b.shape == (k * p, k * p)
        for lag in range(k):
            for i in range(p):
                for j in range(p):
                    assert b[i, lag * p + j] == a[lag, i, j]
        assert np.array_equal(b[p:, :p], np.eye(p))
        assert np.array_equal(b[p:, p:], np.zeros((p, p)))


class TestSpectralRadius:
    def test_diagonal(self):
        assert spectral_radius(np.diag([0.5, -0.2])) == pytest.approx(0.5)

    def test_zero_matrix(self):
        assert spectral_radius(np.zeros((3, 3))) == 0.0

    def test_trivariate_via_characteristic_polynomial(self):
        # oracle: roots of det(lambda I - A) from the polynomial coefficients
        coeffs = np.poly(TRIVARIATE_A)
        oracle = np.max(np.abs(np.roots(coeffs)))
        sr = spectral_radius(TRIVARIATE_A)
        assert sr == pytest.approx(oracle, abs=1e-8)
        assert 0.0 < sr < 1.0

    def test_rejects_nonsquare(self):
        with pytest.raises(DataValidationError):
            spectral_radius(np.zeros((2, 3)))


class TestSolveAutocov:
    def test_single_lag_returns_sigma_only(self):
        vp = VarParams(A=TRIVARIATE_A, sigma=TRIVARIATE_SIGMA)
        gammas = solve_autocov(vp)
        assert len(gammas) == 1
        assert np.array_equal(gammas[0], TRIVARIATE_SIGMA.matrix)

    def test_scalar_ar2_closed_form(self):
        # Gamma_1 = a1 / (1 - a2) for a univariate two-lag model
        vp = VarParams(
            A=np.array([[[0.5]], [[0.2]]]),
            sigma=CorrelationMatrix.identity(1),
        )
        gammas = solve_autocov(vp)
        assert gammas[1][0, 0] == pytest.approx(0.625, abs=1e-12)

    def test_yule_walker_residual(self):
        rng = np.random.default_rng(7)
        for k in (2, 3):
            vp = _random_stationary(rng, p=2, k=k)
            gammas = solve_autocov(vp)

            def gamma(s):
                return gammas[s] if s >= 0 else gammas[-s].T

            for s in range(1, k):
                pred = sum(vp.A[i - 1] @ gamma(s - i) for i in range(1, k + 1))
                assert np.max(np.abs(gammas[s] - pred)) <= 1e-9

    def test_matches_long_simulation(self):
        rng = np.random.default_rng(12)
        vp = _random_stationary(rng, p=2, k=2, target_radius=0.6)
        gammas = solve_autocov(vp)
        z = simulate_latent(vp, 1_000_000, RngSpec(seed=2024))
        # batch means: 100 batches give a clean standard error under
        # serial dependence
        batches = z.reshape(100, 10_000, 2)
        est = np.stack([
            (b[1:] - b.mean(0)).T @ (b[:-1] - b.mean(0)) / (b.shape[0] - 1)
            for b in batches
        ])
        mean_est = est.mean(axis=0)
        se = est.std(axis=0) / np.sqrt(len(batches))
        assert np.all(np.abs(mean_est - gammas[1]) <= 3.5 * se + 1e-3)


class TestDeriveOmega:
    def test_zero_coefficients(self):
        vp = VarParams(A=np.zeros((1, 3, 3)), sigma=TRIVARIATE_SIGMA)
        assert np.allclose(derive_omega(vp), TRIVARIATE_SIGMA.matrix, atol=1e-14)

    def test_scalar_one_minus_a_squared(self):
        vp = VarParams(A=np.array([[[0.5]]]), sigma=CorrelationMatrix.identity(1))
        assert derive_omega(vp)[0, 0] == pytest.approx(0.75, abs=1e-14)

    def test_trivariate_direct_arithmetic(self):
        vp = VarParams(A=TRIVARIATE_A, sigma=TRIVARIATE_SIGMA)
        sig = TRIVARIATE_SIGMA.matrix
        oracle = sig - TRIVARIATE_A @ sig @ TRIVARIATE_A.T
        assert np.max(np.abs(derive_omega(vp) - oracle)) <= 1e-12

    def test_fixed_point_identity(self):
        rng = np.random.default_rng(3)
        for _ in range(5):
            vp = _random_stationary(rng, p=3, k=1)
            sig = vp.sigma.matrix
            omega = derive_omega(vp)
            recon = vp.A[0] @ sig @ vp.A[0].T + omega
            assert np.max(np.abs(recon - sig)) <= 1e-10

    def test_nonstationary_rejected(self):
        vp = VarParams(A=np.array([[[1.05]]]), sigma=CorrelationMatrix.identity(1))
        with pytest.raises(NonStationaryError):
            derive_omega(vp)

    def test_omega_not_pd_rejected(self):
        a = np.array([[0.9, 0.5], [-0.5, 0.3]])
        vp = VarParams(A=a, sigma=CorrelationMatrix.identity(2))
        assert spectral_radius(companion(vp)) < 1.0
        with pytest.raises(OmegaNotPDError):
            derive_omega(vp)

    def test_expansion_cross_check(self):
        # the explicit double-sum form agrees with the companion-form
        # block extraction
        rng = np.random.default_rng(5)
        for k in (2, 3):
            for _ in range(5):
                vp = _random_stationary(rng, p=2, k=k)
                assert np.max(
                    np.abs(derive_omega(vp) - omega_expansion(vp))
                ) <= 1e-9


class TestCompanionCovariance:
    def test_single_lag_is_sigma(self):
        vp = VarParams(A=TRIVARIATE_A, sigma=TRIVARIATE_SIGMA)
        assert np.allclose(companion_covariance(vp), TRIVARIATE_SIGMA.matrix)

    def test_scalar_ar2_block_toeplitz(self):
        vp = VarParams(
            A=np.array([[[0.5]], [[0.2]]]),
            sigma=CorrelationMatrix.identity(1),
        )
        expected = np.array([[1.0, 0.625], [0.625, 1.0]])
        assert np.max(np.abs(companion_covariance(vp) - expected)) <= 1e-12

    def test_theta_block_consistency(self):
        rng = np.random.default_rng(9)
        vp = _random_stationary(rng, p=2, k=3)
        sk = companion_covariance(vp)
        b = companion(vp)
        theta = sk - b @ sk @ b.T
        p = vp.p
        assert np.max(np.abs(theta[:p, :p] - derive_omega(vp))) <= 1e-10
        # remaining blocks of theta vanish for a consistent autocovariance
        assert np.max(np.abs(theta[p:, :])) <= 1e-8


def test_unit_variance_closure():
    # the derived innovation covariance enforces unit stationary variances
    vp = VarParams(A=TRIVARIATE_A, sigma=TRIVARIATE_SIGMA)
    z = simulate_latent(vp, 1_000_000, RngSpec(seed=77))
    batches = z.reshape(100, 10_000, 3)
    per_batch_var = batches.var(axis=1)
    mean_var = per_batch_var.mean(axis=0)
    se = per_batch_var.std(axis=0) / np.sqrt(100)
    assert np.all(np.abs(mean_var - 1.0) <= 3.5 * se + 2e-3)


def test_varparams_shape_validation():
    with pytest.raises(DataValidationError):
        VarParams(A=np.zeros((2, 3)), sigma=CorrelationMatrix.identity(3))
    with pytest.raises(DataValidationError):
        VarParams(A=np.zeros((1, 2, 2)), sigma=CorrelationMatrix.identity(3))


def test_varparams_validate():
    vp = VarParams(A=TRIVARIATE_A, sigma=TRIVARIATE_SIGMA)
    vp.validate()
    bad = VarParams(A=np.array([[[1.2]]]), sigma=CorrelationMatrix.identity(1))
    with pytest.raises(NonStationaryError):
        bad.validate()
