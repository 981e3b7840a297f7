import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from varta.errors import DataValidationError, NotPositiveDefiniteError
from varta.gaussian import (
    CorrelationMatrix,
    cholesky_lower,
    clamp_probability,
    corr_to_unconstrained,
    log_normal_pdf,
    mvn_logpdf,
    mvn_logpdf_rows,
    normal_cdf,
    normal_pdf,
    normal_quantile,
    unconstrained_to_corr,
)

mpmath.mp.dps = 40


def phi_oracle(z: float) -> float:
    """High-precision normal CDF via the erf series."""
    return float(0.5 * (1 + mpmath.erf(mpmath.mpf(z) / mpmath.sqrt(2))))


def quantile_oracle(u: float) -> float:
    """Invert the erf-series CDF: z = sqrt(2) erfinv(2u - 1)."""
    return float(mpmath.sqrt(2) * mpmath.erfinv(2 * mpmath.mpf(u) - 1))


class TestNormalCdf:
    def test_zero_is_half(self):
        assert normal_cdf(0.0) == 0.5

    def test_known_quantile_point(self):
        # oracle: phi_oracle(1.959963985) = 0.9750000000268816
        assert normal_cdf(1.959963985) == pytest.approx(0.9750000000268816,
                                                        abs=1e-12)

    def test_far_left_tail(self):
        # oracle: phi_oracle(-5) = 2.866515718791939e-07
        assert normal_cdf(-5.0) == pytest.approx(2.866515718791939e-07,
                                                 rel=1e-9)

    def test_accuracy_grid(self):
        zs = np.linspace(-8.0, 8.0, 161)
        for z in zs:
            assert abs(normal_cdf(float(z)) - phi_oracle(float(z))) <= 1e-12

    def test_monotone(self):
        zs = np.linspace(-10, 10, 2001)
        us = normal_cdf(zs)
        assert np.all(np.diff(us) >= 0)

    def test_never_exactly_zero_or_one(self):
        for z in (-37.0, -20.0, 20.0, 37.0):
            u = normal_cdf(z)
            assert 0.0 < u < 1.0

    def test_clamp_policy(self):
        assert normal_cdf(-40.0) == 1e-15
        assert normal_cdf(40.0) == 1.0 - 1e-15


class TestNormalPdf:
    def test_at_zero(self):
        assert normal_pdf(0.0) == pytest.approx(0.3989422804014327, abs=1e-15)

    def test_at_one(self):
        # oracle: exp(-1/2)/sqrt(2*pi) at 40 digits
        assert normal_pdf(1.0) == pytest.approx(0.2419707245191433, abs=1e-15)

    def test_symmetry(self):
        for z in (0.3, 1.7, 4.2):
            assert normal_pdf(z) == normal_pdf(-z)

    def test_log_matches(self):
        zs = np.linspace(-5, 5, 41)
        assert np.allclose(np.exp(log_normal_pdf(zs)), normal_pdf(zs),
                           rtol=1e-14)


class TestNormalQuantile:
    def test_median(self):
        assert normal_quantile(0.5) == 0.0

    def test_known_value(self):
        # oracle: quantile_oracle(0.975) = 1.959963984540054
        assert normal_quantile(0.975) == pytest.approx(1.959963984540054,
                                                       abs=1e-12)

    def test_round_trip_through_cdf(self):
        assert normal_quantile(normal_cdf(2.3)) == pytest.approx(2.3, abs=1e-12)

    def test_round_trip_z_space(self):
        # Upper-tail z beyond ~5.6 is limited by float64 resolution of
        # probabilities near 1 (one ulp there is ~1.8e-8 in z), so the
        # 1e-9 guarantee holds where the representation allows it.
        for z in np.linspace(-6.0, 5.6, 117):
            assert abs(normal_quantile(normal_cdf(float(z))) - z) <= 1e-9
        for z in np.linspace(5.6, 6.0, 9):
            assert abs(normal_quantile(normal_cdf(float(z))) - z) <= 2e-8

    def test_round_trip_u_space(self):
        us = np.concatenate([
            np.geomspace(1e-12, 0.5, 300),
            1.0 - np.geomspace(1e-12, 0.5, 300),
        ])
        back = normal_cdf(normal_quantile(us))
        assert np.max(np.abs(back - us)) <= 1e-9

    def test_domain_errors(self):
        for u in (0.0, 1.0, -0.2, 1.3):
            with pytest.raises(DataValidationError):
                normal_quantile(u)

    @given(st.floats(min_value=1e-12, max_value=1 - 1e-12))
    @settings(max_examples=200)
    def test_quantile_matches_oracle(self, u):
        assert normal_quantile(u) == pytest.approx(quantile_oracle(u), abs=1e-9)


class TestMvnLogpdf:
    def test_standard_bivariate_origin(self):
        val = mvn_logpdf(np.zeros(2), np.zeros(2), np.eye(2))
        assert val == pytest.approx(-np.log(2 * np.pi), abs=1e-12)

    def test_shift_one_unit(self):
        val = mvn_logpdf(np.array([1.0, 0.0]), np.zeros(2), np.eye(2))
        assert val == pytest.approx(-np.log(2 * np.pi) - 0.5, abs=1e-12)

    def test_against_direct_formula(self):
        rng = np.random.default_rng(42)
        for _ in range(20):
            p = 3
            raw = rng.standard_normal((p, p))
            cov = raw @ raw.T + p * np.eye(p)
            x = rng.standard_normal(p)
            mean = rng.standard_normal(p)
            d = x - mean
            direct = -0.5 * (
                p * np.log(2 * np.pi)
                + np.log(np.linalg.det(cov))
                + d @ np.linalg.inv(cov) @ d
            )
            assert mvn_logpdf(x, mean, cov) == pytest.approx(direct, abs=1e-10)

    def test_diagonal_equals_sum_of_univariate(self):
        rng = np.random.default_rng(3)
        sds = np.array([0.5, 2.0, 1.3])
        x = rng.standard_normal(3)
        expected = sum(
            log_normal_pdf(x[i] / sds[i]) - np.log(sds[i]) for i in range(3)
        )
        assert mvn_logpdf(x, np.zeros(3), np.diag(sds**2)) == pytest.approx(
            expected, abs=1e-10
        )

    def test_rows_matches_loop(self):
        rng = np.random.default_rng(11)
        cov = np.array([[2.0, 0.6], [0.6, 1.0]])
        resid = rng.standard_normal((50, 2))
        total = mvn_logpdf_rows(resid, cholesky_lower(cov))
        loop = sum(mvn_logpdf(r, np.zeros(2), cov) for r in resid)
        assert total == pytest.approx(loop, rel=1e-12)

    def test_non_pd_raises(self):
        with pytest.raises(NotPositiveDefiniteError):
            mvn_logpdf(np.zeros(2), np.zeros(2),
                       np.array([[1.0, 2.0], [2.0, 1.0]]))


class TestCholesky:
    def test_identity(self):
        assert np.array_equal(cholesky_lower(np.eye(3)), np.eye(3))

    def test_hand_checked_2x2(self):
        lower = cholesky_lower(np.array([[4.0, 2.0], [2.0, 5.0]]))
        assert np.allclose(lower, [[2.0, 0.0], [1.0, 2.0]], atol=1e-14)

    def test_reconstruction_trivariate(self):
        sigma = CorrelationMatrix.from_rho([0.5, 0.3, 0.7], 3).matrix
        lower = cholesky_lower(sigma)
        assert np.max(np.abs(lower @ lower.T - sigma)) <= 1e-10
        assert np.all(np.tril(lower) == lower)

    def test_factor_round_trip(self):
        rng = np.random.default_rng(5)
        lower = np.tril(rng.standard_normal((4, 4)))
        np.fill_diagonal(lower, np.abs(np.diag(lower)) + 0.5)
        assert np.allclose(cholesky_lower(lower @ lower.T), lower, atol=1e-10)

    def test_failure_reports_pivot(self):
        bad = np.diag([1.0, 1.0, -1.0])
        with pytest.raises(NotPositiveDefiniteError) as excinfo:
            cholesky_lower(bad)
        assert excinfo.value.pivot == 2

    def test_asymmetric_rejected(self):
        with pytest.raises(DataValidationError):
            cholesky_lower(np.array([[1.0, 0.5], [0.1, 1.0]]))


class TestCorrelationParameterization:
    def test_identity_maps_to_zero(self):
        v = corr_to_unconstrained(CorrelationMatrix.identity(4))
        assert np.allclose(v, 0.0, atol=1e-12)
        back = unconstrained_to_corr(np.zeros(6), 4)
        assert np.allclose(back.matrix, np.eye(4), atol=1e-12)

    def test_trivariate_round_trip(self):
        corr = CorrelationMatrix.from_rho([0.5, 0.3, 0.7], 3)
        back = unconstrained_to_corr(corr_to_unconstrained(corr), 3)
        assert np.max(np.abs(back.matrix - corr.matrix)) <= 1e-10

    @given(st.lists(st.floats(-6, 6), min_size=10, max_size=10))
    @settings(max_examples=100)
    def test_total_map(self, vals):
        corr = unconstrained_to_corr(np.array(vals), 5)
        # construction succeeded => Cholesky succeeded => PD; check shape
        assert np.allclose(np.diag(corr.matrix), 1.0, atol=1e-12)
        assert np.max(np.abs(corr.matrix)) <= 1.0 + 1e-12

    @given(st.lists(st.floats(-3, 3), min_size=6, max_size=6))
    @settings(max_examples=100)
    def test_round_trip_random(self, vals):
        v = np.array(vals)
        corr = unconstrained_to_corr(v, 4)
        v_back = corr_to_unconstrained(corr)
        assert np.max(np.abs(v_back - v)) <= 1e-8

    def test_forward_rejects_non_pd(self):
        # non-PD unit-diagonal matrices cannot even be constructed, so the
        # forward map can never receive one
        mat = np.array([
            [1.0, 0.95, -0.95],
            [0.95, 1.0, 0.95],
            [-0.95, 0.95, 1.0],
        ])
        with pytest.raises(NotPositiveDefiniteError):
            CorrelationMatrix(mat)

    def test_rho_ordering_row_major_upper(self):
        corr = CorrelationMatrix.from_rho([0.1, 0.2, 0.3], 3)
        assert corr.matrix[0, 1] == 0.1
        assert corr.matrix[0, 2] == 0.2
        assert corr.matrix[1, 2] == 0.3


def test_clamp_probability_bounds():
    assert clamp_probability(0.0) == 1e-15
    assert clamp_probability(1.0) == 1.0 - 1e-15
    assert clamp_probability(0.3) == 0.3
