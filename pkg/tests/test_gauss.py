import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from screenlab.gauss import (DomainError, GaussianBelief, check_spd, gauss_hermite,
                             gauss_hermite_multivariate, lambda_coeff,
                             make_segments, std_normal_cdf, std_normal_log_cdf,
                             std_normal_pdf)


def _mp_cdf(z):
    """Independent high-precision oracle via mpmath's erfc."""
    import mpmath

    mpmath.mp.dps = 50
    return float(0.5 * mpmath.erfc(-mpmath.mpf(z) / mpmath.sqrt(2)))


class TestStdNormalCdf:
    def test_zero_is_half(self):
        assert std_normal_cdf(0.0) == pytest.approx(0.5, abs=1e-15)

    def test_far_left_underflows_to_zero(self):
        assert std_normal_cdf(-1e9) == 0.0

    def test_matches_high_precision_oracle(self):
        for z in np.concatenate([np.linspace(-38, 8, 231), [1.0]]):
            assert std_normal_cdf(z) == pytest.approx(_mp_cdf(z), abs=1e-12)

    def test_monotone(self):
        zs = np.linspace(-12, 12, 2001)
        vals = std_normal_cdf(zs)
        assert np.all(np.diff(vals) >= 0.0)

    def test_tail_bound_grid(self):
        for z in np.linspace(0.0, 40.0, 401):
            assert std_normal_cdf(-z) <= math.exp(-z * z / 2.0) + 1e-300

    def test_log_cdf_matches_in_far_tail(self):
        import mpmath

        mpmath.mp.dps = 50
        for z in (-5.0, -20.0, -100.0, -150.0):
            oracle = float(mpmath.log(0.5 * mpmath.erfc(-mpmath.mpf(z) / mpmath.sqrt(2))))
            assert std_normal_log_cdf(z) == pytest.approx(oracle, rel=1e-10)

    def test_nonfinite_rejected(self):
        with pytest.raises(DomainError):
            std_normal_cdf(float("nan"))
        with pytest.raises(DomainError):
            std_normal_cdf(float("inf"))

    def test_pdf_peak(self):
        assert std_normal_pdf(0.0) == pytest.approx(1.0 / math.sqrt(2 * math.pi),
                                                    abs=1e-15)


class TestLambdaCoeff:
    def test_two_goods_uncorrelated(self):
        j = np.eye(2)
        assert lambda_coeff(np.array([1.0, 1.0]), j) == pytest.approx(
            math.sqrt(2.0), abs=1e-12)

    def test_single_good_identity(self):
        assert lambda_coeff(np.array([1.0, 0.0]), np.eye(2)) == pytest.approx(
            1.0, abs=1e-15)

    def test_negative_correlation(self):
        j = np.array([[1.0, -0.5], [-0.5, 1.0]])
        # 1 + 1 - 2*0.5 = 1
        assert lambda_coeff(np.array([1.0, 1.0]), j) == pytest.approx(1.0, abs=1e-12)

    def test_correlated_formula(self):
        for rho in (-0.5, 0.0, 0.5):
            j = np.array([[1.0, rho], [rho, 1.0]])
            assert lambda_coeff(np.ones(2), j) == pytest.approx(
                math.sqrt(2.0 * (1.0 + rho)), abs=1e-12)

    def test_non_spd_rejected(self):
        with pytest.raises(DomainError):
            lambda_coeff(np.ones(2), np.array([[1.0, 2.0], [2.0, 1.0]]))

    def test_non_indicator_rejected(self):
        with pytest.raises(DomainError):
            lambda_coeff(np.array([0.5, 1.0]), np.eye(2))

    def test_subadditivity_1000_random_spd(self):
        rng = np.random.default_rng(12345)
        for _ in range(1000):
            m = int(rng.integers(2, 6))
            a = rng.standard_normal((m, m))
            j = a @ a.T + 1e-3 * np.eye(m)
            grand = lambda_coeff(np.ones(m), j)
            singles = sum(lambda_coeff(np.eye(m)[g], j) for g in range(m))
            assert grand < singles * (1.0 - 1e-10)


class TestGaussianBelief:
    def test_accepts_psd(self):
        GaussianBelief(mean=np.zeros(2), cov=np.eye(2))

    def test_rejects_negative_eigenvalue(self):
        with pytest.raises(DomainError):
            GaussianBelief(mean=np.zeros(2),
                           cov=np.array([[1.0, 0.0], [0.0, -0.1]]))

    def test_rejects_dimension_mismatch(self):
        with pytest.raises(DomainError):
            GaussianBelief(mean=np.zeros(3), cov=np.eye(2))


class TestMakeSegments:
    def test_identity_two_dim(self):
        seg = make_segments(np.eye(2))
        # A annihilates Sigma*1 = (1,1); proportional to (1,-1)
        assert abs(seg.a_matrix @ np.ones(2)) < 1e-12
        # grand variance preserved: 1' cond_cov 1 = 1' Sigma 1 = 2
        ones = np.ones(2)
        assert ones @ seg.cond_cov @ ones == pytest.approx(2.0, abs=1e-12)

    def test_neutrality_correlated(self):
        for rho in (-0.9, -0.5, 0.0, 0.5, 0.9):
            cov = np.array([[1.0, rho], [rho, 1.0]])
            seg = make_segments(cov)
            ones = np.ones(2)
            assert ones @ seg.cond_cov @ ones == pytest.approx(
                ones @ cov @ ones, rel=1e-10)

    def test_diag_1_4(self):
        cov = np.diag([1.0, 4.0])
        seg = make_segments(cov)
        assert np.max(np.abs(seg.a_matrix @ cov @ np.ones(2))) < 1e-12

    def test_invariants_random(self):
        rng = np.random.default_rng(7)
        for _ in range(50):
            m = int(rng.integers(2, 6))
            a = rng.standard_normal((m, m))
            cov = a @ a.T + 1e-3 * np.eye(m)
            seg = make_segments(cov)
            ones = np.ones(m)
            scale = np.abs(cov).max()
            assert seg.a_matrix.shape == (m - 1, m)
            assert np.linalg.matrix_rank(seg.a_matrix) == m - 1
            assert np.max(np.abs(seg.a_matrix @ cov @ ones)) < 1e-10 * scale
            # conditional law is supported on the segment lines
            assert np.max(np.abs(seg.cond_cov @ seg.a_matrix.T)) < 1e-9 * scale
            assert ones @ seg.cond_cov @ ones == pytest.approx(
                ones @ cov @ ones, rel=1e-10)
            # cond_cov is rank one along the direction Sigma*1
            d = seg.direction
            assert np.allclose(seg.cond_cov,
                               seg.tau_var * np.outer(d, d),
                               atol=1e-9 * scale)

    def test_conditional_mean_map(self):
        rng = np.random.default_rng(11)
        a = rng.standard_normal((3, 3))
        cov = a @ a.T + 0.1 * np.eye(3)
        mean = np.array([0.3, -0.2, 0.5])
        seg = make_segments(cov, mean=mean)
        # at z = A*mean the conditional mean is the unconditional mean
        z0 = seg.a_matrix @ mean
        assert np.allclose(seg.y_hat(z0), mean, atol=1e-10)
        # conditioning is consistent: A * y_hat(z) = z
        z = z0 + np.array([0.4, -1.1])
        assert np.allclose(seg.a_matrix @ seg.y_hat(z), z, atol=1e-10)

    def test_rejects_scalar(self):
        with pytest.raises(DomainError):
            make_segments(np.array([[1.0]]))


class TestGaussHermite:
    def test_order_one(self):
        nodes, weights = gauss_hermite(1)
        assert nodes == pytest.approx([0.0], abs=1e-15)
        assert weights == pytest.approx([1.0], abs=1e-15)

    def test_order_two(self):
        nodes, weights = gauss_hermite(2)
        assert sorted(nodes) == pytest.approx([-1.0, 1.0], abs=1e-12)
        assert weights == pytest.approx([0.5, 0.5], abs=1e-12)

    def test_moments_up_to_six(self):
        nodes, weights = gauss_hermite(20)
        expected = {0: 1.0, 1: 0.0, 2: 1.0, 3: 0.0, 4: 3.0, 5: 0.0, 6: 15.0}
        for k, val in expected.items():
            assert float(weights @ nodes ** k) == pytest.approx(val, abs=1e-10)

    def test_order_out_of_range(self):
        with pytest.raises(DomainError):
            gauss_hermite(0)
        with pytest.raises(DomainError):
            gauss_hermite(201)

    def test_multivariate_matches_moments(self):
        mean = np.array([0.5, -1.0])
        cov = np.array([[2.0, 0.6], [0.6, 1.0]])
        nodes, weights = gauss_hermite_multivariate(15, mean, cov)
        assert float(weights.sum()) == pytest.approx(1.0, abs=1e-12)
        emp_mean = weights @ nodes
        assert np.allclose(emp_mean, mean, atol=1e-10)
        centered = nodes - mean
        emp_cov = (weights[:, None] * centered).T @ centered
        assert np.allclose(emp_cov, cov, atol=1e-10)


@settings(max_examples=200, deadline=None)
@given(st.integers(min_value=0, max_value=10_000), st.integers(min_value=2, max_value=5))
def test_neutrality_property(seed, m):
    rng = np.random.default_rng(seed)
    a = rng.standard_normal((m, m))
    cov = a @ a.T + 1e-3 * np.eye(m)
    seg = make_segments(cov)
    ones = np.ones(m)
    assert ones @ seg.cond_cov @ ones == pytest.approx(ones @ cov @ ones, rel=1e-10)


def test_check_spd_rejects_asymmetric():
    with pytest.raises(DomainError):
        check_spd(np.array([[1.0, 0.5], [0.2, 1.0]]), "test")
