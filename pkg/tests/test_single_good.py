import math

import numpy as np
import pytest

from screenlab.gauss import DomainError
from screenlab.single_good import (GAMMA_XPHI, ScalarBelief, elasticity_ratio,
                                   gaussian_family, laplace_family,
                                   margin_decomposition,
                                   mean_nonpositive_upper_bound, optimal_price,
                                   optimal_price_gap, revenue_bounds,
                                   rule_of_thumb_price, tail_optimal_price)


def _grid_oracle_price(mu, sd, lo, hi, step):
    """Brute-force grid maximizer of p * P(value >= p)."""
    from scipy.stats import norm

    prices = np.arange(lo, hi, step)
    revenue = prices * norm.sf((prices - mu) / sd)
    return float(prices[np.argmax(revenue)])


class TestOptimalPrice:
    def test_matches_grid_oracle(self):
        mu, sd = 0.3, 0.05
        price, revenue = optimal_price(ScalarBelief(mean=mu, sd=sd))
        oracle = _grid_oracle_price(mu, sd, mu - 3 * sd, mu + 2 * sd, 1e-6 * sd)
        assert price == pytest.approx(oracle, abs=1e-6)
        from scipy.stats import norm

        assert revenue == pytest.approx(price * norm.sf((price - mu) / sd), rel=1e-12)

    def test_zero_mean(self):
        sd = 0.7
        price, revenue = optimal_price(ScalarBelief(mean=0.0, sd=sd))
        # price = sd * x0 with x0 maximizing x*(1-Phi(x))
        x0 = _grid_oracle_price(0.0, 1.0, 0.01, 3.0, 1e-6)
        assert price == pytest.approx(sd * x0, abs=1e-5 * sd)
        assert revenue <= math.sqrt(2.0 * math.pi) * sd

    def test_vanishing_uncertainty(self):
        price, revenue = optimal_price(ScalarBelief(mean=1.0, sd=1e-8))
        assert price == pytest.approx(1.0, abs=1e-5)
        assert revenue == pytest.approx(1.0, abs=1e-5)

    def test_normalized_price_cap(self):
        for mu in (0.1, 0.3, 1.0):
            for sd in (0.05, 0.5, 2.0):
                price, _ = optimal_price(ScalarBelief(mean=mu, sd=sd))
                assert (price - mu) / sd <= 1.0 + 1e-9

    def test_gap_form_is_stable_at_large_n(self):
        # mean - revenue computed without catastrophic cancellation
        belief = ScalarBelief(mean=0.3, sd=1e-6)
        price, revenue, gap = optimal_price_gap(belief)
        assert gap > 0.0
        assert gap == pytest.approx(belief.mean - revenue, rel=1e-6)


class TestRuleOfThumb:
    def test_formula(self):
        # theta* - sqrt(ln n) * sigma / sqrt(n), evaluated independently
        val = rule_of_thumb_price(1.0, 1.0, 55)
        assert val == pytest.approx(1.0 - math.sqrt(math.log(55.0) / 55.0), abs=1e-12)
        assert val == pytest.approx(0.73006, abs=1e-4)

    def test_limit(self):
        assert rule_of_thumb_price(1.0, 1.0, 10 ** 12) == pytest.approx(1.0, abs=1e-4)

    def test_sigma_zero_rejected(self):
        with pytest.raises(DomainError):
            rule_of_thumb_price(1.0, 0.0, 10)


class TestMarginDecomposition:
    def test_price_at_true_type(self):
        rep = margin_decomposition(0.3, 0.3, ScalarBelief(mean=0.3, sd=0.1))
        assert rep.intensive == pytest.approx(0.0, abs=1e-15)
        assert rep.extensive == pytest.approx(0.15, abs=1e-12)
        assert rep.cross == pytest.approx(0.0, abs=1e-15)

    def test_deep_discount(self):
        rep = margin_decomposition(0.3, 0.3 - 1.0, ScalarBelief(mean=0.3, sd=0.1))
        assert rep.extensive <= 0.3 * math.exp(-50.0)

    def test_identity_against_mpmath(self):
        import mpmath

        mpmath.mp.dps = 40
        theta, sd = 0.3, 0.1
        price, _ = optimal_price(ScalarBelief(mean=theta, sd=sd))
        rep = margin_decomposition(theta, price, ScalarBelief(mean=theta, sd=sd))
        cdf = float(0.5 * mpmath.erfc(-mpmath.mpf((price - theta) / sd)
                                      / mpmath.sqrt(2)))
        assert rep.intensive == pytest.approx(theta - price, abs=1e-15)
        assert rep.extensive == pytest.approx(theta * cdf, abs=1e-12)
        assert rep.cross == pytest.approx((theta - price) * cdf, abs=1e-12)
        assert rep.gap == pytest.approx(
            rep.intensive + rep.extensive - rep.cross, abs=1e-12)
        assert rep.revenue == pytest.approx(theta - rep.gap, abs=1e-12)

    def test_identity_random(self):
        rng = np.random.default_rng(3)
        for _ in range(200):
            theta = float(rng.uniform(0.05, 3.0))
            sd = float(rng.uniform(0.01, 2.0))
            price = float(theta + rng.uniform(-3.0, 1.0) * sd)
            rep = margin_decomposition(theta, price, ScalarBelief(mean=theta, sd=sd))
            assert abs(rep.gap - (rep.intensive + rep.extensive - rep.cross)) < 1e-12

    def test_requires_mean_equal_theta(self):
        with pytest.raises(DomainError):
            margin_decomposition(0.3, 0.25, ScalarBelief(mean=0.4, sd=0.1))


class TestRevenueBounds:
    def test_gamma_constant(self):
        assert GAMMA_XPHI == pytest.approx(0.241971, abs=1e-6)
        # maximum of x*phi(x) over a grid never exceeds the analytic value
        xs = np.linspace(0.0, 5.0, 100001)
        phi = np.exp(-xs ** 2 / 2.0) / math.sqrt(2.0 * math.pi)
        assert float(np.max(xs * phi)) <= GAMMA_XPHI + 1e-12

    def test_sandwich_45_point_grid(self):
        for mu in (0.1, 0.3, 1.0):
            for sigma in (0.5, 1.0, 2.0):
                for n in (10, 100, 1000, 10 ** 4, 10 ** 5, 10 ** 6):
                    lower, upper = revenue_bounds(mu, sigma, n)
                    _, revenue = optimal_price(
                        ScalarBelief(mean=mu, sd=sigma / math.sqrt(n)))
                    assert lower <= revenue <= upper

    def test_example_point(self):
        lower, upper = revenue_bounds(0.3, 1.0, 10 ** 4)
        _, revenue = optimal_price(ScalarBelief(mean=0.3, sd=0.01))
        assert lower <= revenue <= upper

    def test_negative_mean_rejected(self):
        with pytest.raises(DomainError):
            revenue_bounds(-0.1, 1.0, 100)

    def test_nonpositive_mean_bound(self):
        for n in (10, 1000):
            bound = mean_nonpositive_upper_bound(1.0, n)
            assert bound == pytest.approx(math.sqrt(2.0 * math.pi / n), abs=1e-15)
            _, revenue = optimal_price(ScalarBelief(mean=0.0, sd=1.0 / math.sqrt(n)))
            assert revenue <= bound


class TestRateLaw:
    def test_scaled_gap_bracket_and_trend(self):
        from screenlab.experiments import _trailing_decreases

        for theta in (0.3, 1.0, 3.0):
            for sigma in (0.5, 1.0):
                deviations = []
                for k in range(4, 13):
                    n = 10 ** k
                    _, _, gap = optimal_price_gap(
                        ScalarBelief(mean=theta, sd=sigma / math.sqrt(n)))
                    ratio = gap * math.sqrt(n / math.log(n)) / sigma
                    assert 0.0 < ratio < 2.0
                    deviations.append(abs(ratio - 1.0))
                # convergence trend: |ratio - 1| strictly decreasing over at
                # least four consecutive decades ending at the largest n (the
                # ratio can cross 1 early, making a global monotone demand
                # unattainable)
                assert _trailing_decreases(deviations) >= 4


class TestTailFamilies:
    def test_gaussian_family_matches_main_solver(self):
        family = gaussian_family()
        for n in (100, 10 ** 4, 10 ** 6):
            price, revenue, _ = tail_optimal_price(family, 1.0, n)
            p2, r2 = optimal_price(ScalarBelief(mean=1.0, sd=1.0 / math.sqrt(n)))
            assert price == pytest.approx(p2, abs=1e-8)
            assert revenue == pytest.approx(r2, abs=1e-8)

    def test_laplace_grid_oracle(self):
        family = laplace_family()
        n = 10 ** 4
        price, revenue, _ = tail_optimal_price(family, 1.0, n)
        gammas = np.arange(-2.0, 20.0, 1e-6)
        prices = 1.0 - gammas / math.sqrt(n)
        cdf = np.where(gammas >= 0.0, 0.5 * np.exp(-gammas),
                       1.0 - 0.5 * np.exp(gammas))
        rev = prices * (1.0 - cdf)
        k = int(np.argmax(rev))
        assert price == pytest.approx(float(prices[k]), abs=1e-6)

    def test_price_limit(self):
        for family in (gaussian_family(), laplace_family()):
            price, _, _ = tail_optimal_price(family, 1.0, 10 ** 12)
            assert price == pytest.approx(1.0, abs=1e-4)

    def test_left_tail_parametrization(self):
        # log F(-z) / (-alpha * z**beta) -> 1 on a test grid
        for family in (gaussian_family(), laplace_family()):
            for z in (20.0, 50.0, 100.0):
                ratio = float(family.log_cdf(-z)) / (
                    -family.alpha_minus * z ** family.beta_minus)
                assert ratio == pytest.approx(1.0, rel=0.1)

    def test_elasticity_laplace_exact(self):
        family = laplace_family()
        for gamma in (0.5, 1.0, 5.0, 50.0, 150.0):
            assert elasticity_ratio(family, gamma) == pytest.approx(
                1.0 / gamma, rel=1e-12)

    def test_elasticity_gaussian_mills(self):
        import mpmath

        mpmath.mp.dps = 40
        family = gaussian_family()
        gamma = 10.0
        oracle = float(
            (0.5 * mpmath.erfc(mpmath.mpf(gamma) / mpmath.sqrt(2)))
            / (gamma * mpmath.exp(-mpmath.mpf(gamma) ** 2 / 2)
               / mpmath.sqrt(2 * mpmath.pi)))
        val = elasticity_ratio(family, gamma)
        assert val == pytest.approx(oracle, rel=1e-9)
        # Mills ratio: close to 1/gamma^2 for large gamma
        assert val == pytest.approx(0.01, rel=0.05)

    def test_elasticity_gaussian_vanishes(self):
        family = gaussian_family()
        assert elasticity_ratio(family, 100.0) < 1e-3

    def test_elasticity_domain(self):
        with pytest.raises(DomainError):
            elasticity_ratio(gaussian_family(), 0.0)


def test_scalar_belief_validation():
    with pytest.raises(DomainError):
        ScalarBelief(mean=0.3, sd=0.0)
    with pytest.raises(DomainError):
        ScalarBelief(mean=float("nan"), sd=1.0)
