"""Single-good monopoly pricing under a scalar normal belief.

Optimal posted prices, explicit finite-sample revenue bounds, the
sqrt(ln n) price-shading rule, the intensive/extensive margin
decomposition of the revenue gap, and a generalization to other noise
tail families (evaluated in log space so the far tails stay usable).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy import optimize, special

from .gauss import DomainError, NumericError, std_normal_cdf, std_normal_log_cdf, std_normal_pdf

# Maximum of x * phi(x) over the reals, attained at x = 1 (solve
# phi(x) + x phi'(x) = phi(x)(1 - x^2) = 0).
GAMMA_XPHI = math.exp(-0.5) / math.sqrt(2.0 * math.pi)


@dataclass(frozen=True)
class ScalarBelief:
    """Normal belief over a scalar valuation: mean and standard deviation."""

    mean: float
    sd: float

    def __post_init__(self):
        if not (math.isfinite(self.mean) and math.isfinite(self.sd)):
            raise DomainError("ScalarBelief: mean and sd must be finite")
        if self.sd <= 0.0:
            raise DomainError("ScalarBelief: sd must be positive")


@dataclass(frozen=True)
class MarginReport:
    """Decomposition of the revenue gap at a true valuation theta*.

    gap = intensive + extensive - cross, where intensive = theta* - p,
    extensive = theta* * F(p) and cross = (theta* - p) * F(p), with F
    the belief cdf. revenue = theta* - gap.
    """

    price: float
    revenue: float
    intensive: float
    extensive: float
    cross: float
    gap: float


def _revenue_normalized(x, mu, sd):
    """Revenue at price mu + x*sd: (mu + x*sd) * P(value >= price)."""
    return (mu + x * sd) * std_normal_cdf(-np.asarray(x, dtype=float))


def _optimal_normalized_price(mu: float, sd: float) -> float:
    """Maximize (mu + x sd)(1 - Phi(x)) over x; returns the maximizer.

    Coarse grid scan over a bracket guaranteed to contain the global
    optimum, then bounded scalar refinement. The objective can be
    bimodal for mu near 0, hence the grid stage.
    """
    ratio = mu / sd
    # For mu > 0 the optimum satisfies |x*| <~ sqrt(2 ln(mu/sd)) + O(1);
    # for mu <= 0 the price is positive so x* > -mu/sd.
    lo = -(math.sqrt(2.0 * max(0.0, math.log(max(ratio, 1e-300)))) + 10.0)
    hi = max(5.0, -ratio + 10.0)
    lo = min(lo, max(0.0, -ratio) - 1.0)
    grid = np.linspace(lo, hi, 20001)
    vals = _revenue_normalized(grid, mu, sd)
    k = int(np.argmax(vals))
    a = grid[max(0, k - 1)]
    b = grid[min(len(grid) - 1, k + 1)]
    res = optimize.minimize_scalar(
        lambda x: -_revenue_normalized(x, mu, sd),
        bounds=(a, b), method="bounded",
        options={"xatol": 1e-13 * max(1.0, abs(grid[k]))},
    )
    x = float(res.x)
    if _revenue_normalized(x, mu, sd) < vals[k]:
        x = float(grid[k])
    return x


def optimal_price(belief: ScalarBelief):
    """Globally optimal posted price and its expected revenue."""
    x = _optimal_normalized_price(belief.mean, belief.sd)
    price = belief.mean + x * belief.sd
    revenue = float(_revenue_normalized(x, belief.mean, belief.sd))
    return price, revenue


def optimal_price_gap(belief: ScalarBelief):
    """(price, revenue, mean - revenue) with the gap in cancellation-free form.

    mean - revenue = -x*sd + (mean + x*sd) * Phi(x), which stays accurate
    when revenue is within 1e-10 of the mean.
    """
    mu, sd = belief.mean, belief.sd
    x = _optimal_normalized_price(mu, sd)
    price = mu + x * sd
    cdf = std_normal_cdf(x)
    revenue = price * (1.0 - cdf)
    gap = -x * sd + price * cdf
    return price, float(revenue), float(gap)


def rule_of_thumb_price(theta_star: float, sigma: float, n: int) -> float:
    """Price shaded below theta* by sqrt(ln n) * sigma / sqrt(n)."""
    if sigma <= 0.0:
        raise DomainError("rule_of_thumb_price: sigma must be positive")
    if n < 2:
        raise DomainError("rule_of_thumb_price: n must be >= 2")
    return theta_star - math.sqrt(math.log(n)) * sigma / math.sqrt(n)


def margin_decomposition(theta_star: float, price: float, belief: ScalarBelief) -> MarginReport:
    """Split theta* - revenue(price) into intensive/extensive/cross terms."""
    if abs(belief.mean - theta_star) > 1e-9 * max(1.0, abs(theta_star)):
        raise DomainError("margin_decomposition: belief.mean must equal theta_star")
    x = (price - belief.mean) / belief.sd
    cdf = std_normal_cdf(x)
    intensive = theta_star - price
    extensive = theta_star * cdf
    cross = (theta_star - price) * cdf
    gap = intensive + extensive - cross
    revenue = price * (1.0 - cdf)
    return MarginReport(price=price, revenue=float(revenue), intensive=float(intensive),
                        extensive=float(extensive), cross=float(cross), gap=float(gap))


def revenue_bounds(mu: float, sigma: float, n: int):
    """Explicit finite-sample (lower, upper) bounds on the optimal revenue
    for a N(mu, sigma^2/n) belief with mu >= 0."""
    if mu < 0.0:
        raise DomainError("revenue_bounds: mu must be >= 0 "
                          "(use mean_nonpositive_upper_bound instead)")
    if sigma <= 0.0:
        raise DomainError("revenue_bounds: sigma must be positive")
    if n < 2:
        raise DomainError("revenue_bounds: n must be >= 2")
    root_n = math.sqrt(n)
    shade = sigma * math.sqrt(math.log(n) / n)
    log_arg = mu / (sigma * math.sqrt(2.0 * math.pi) * (1.0 + GAMMA_XPHI))
    if log_arg <= 0.0:
        correction = 0.0
    else:
        correction = (sigma / root_n) * math.sqrt(2.0 * abs(math.log(log_arg)))
    upper = max(mu - shade + correction, (mu + sigma / root_n) / 2.0)
    lower = mu - shade - mu / math.sqrt(2.0 * math.pi * n * math.log(n))
    return lower, upper


def mean_nonpositive_upper_bound(sigma: float, n: int) -> float:
    """Revenue upper bound sqrt(2 pi / n) * sigma, valid whenever mu <= 0."""
    if sigma <= 0.0:
        raise DomainError("mean_nonpositive_upper_bound: sigma must be positive")
    if n < 1:
        raise DomainError("mean_nonpositive_upper_bound: n must be >= 1")
    return math.sqrt(2.0 * math.pi / n) * sigma


@dataclass(frozen=True)
class TailFamily:
    """A noise law with log-space tail evaluation.

    ``log_cdf``/``log_pdf`` must stay finite for arguments down to -200
    so that tail prices can be assessed without underflow. ``alpha_minus``
    and ``beta_minus`` parametrize the left-tail decay
    log F(-z) ~ -alpha_minus * z**beta_minus (analogously alpha_plus /
    beta_plus on the right).
    """

    name: str
    cdf: Callable[[float], float]
    pdf: Callable[[float], float]
    log_cdf: Callable[[float], float]
    log_pdf: Callable[[float], float]
    alpha_minus: float
    beta_minus: float
    alpha_plus: float
    beta_plus: float


def gaussian_family() -> TailFamily:
    return TailFamily(
        name="gaussian",
        cdf=std_normal_cdf,
        pdf=std_normal_pdf,
        log_cdf=std_normal_log_cdf,
        log_pdf=lambda z: -0.5 * z * z - 0.5 * math.log(2.0 * math.pi),
        alpha_minus=0.5, beta_minus=2.0, alpha_plus=0.5, beta_plus=2.0,
    )


def laplace_family() -> TailFamily:
    """Standard Laplace noise: F(-z) = exp(-z)/2 for z >= 0."""

    def cdf(z):
        z = np.asarray(z, dtype=float)
        out = np.where(z <= 0.0, 0.5 * np.exp(np.minimum(z, 0.0)),
                       1.0 - 0.5 * np.exp(-np.maximum(z, 0.0)))
        return float(out) if out.ndim == 0 else out

    def log_cdf(z):
        z = np.asarray(z, dtype=float)
        out = np.where(z <= 0.0, np.minimum(z, 0.0) - math.log(2.0),
                       np.log1p(-0.5 * np.exp(-np.maximum(z, 0.0))))
        return float(out) if out.ndim == 0 else out

    return TailFamily(
        name="laplace",
        cdf=cdf,
        pdf=lambda z: 0.5 * np.exp(-np.abs(z)),
        log_cdf=log_cdf,
        log_pdf=lambda z: -np.abs(z) - math.log(2.0),
        alpha_minus=1.0, beta_minus=1.0, alpha_plus=1.0, beta_plus=1.0,
    )


def tail_optimal_price(family: TailFamily, theta_star: float, n: int):
    """Optimal posted price when value = theta* + noise/sqrt(n).

    Maximizes p * (1 - F((p - theta*) sqrt(n))) by a bracketed scan over
    the normalized discount gamma = (theta* - p) sqrt(n), then scalar
    refinement. Returns (price, revenue, margin_report)."""
    if theta_star <= 0.0:
        raise DomainError("tail_optimal_price: theta_star must be positive")
    if n < 2:
        raise DomainError("tail_optimal_price: n must be >= 2")
    root_n = math.sqrt(n)

    def revenue_of_gamma(gamma):
        gamma = np.asarray(gamma, dtype=float)
        price = theta_star - gamma / root_n
        return price * (1.0 - family.cdf(-gamma))

    gamma_hi = min(theta_star * root_n, 200.0)
    grid = np.linspace(-10.0, gamma_hi, 40001)
    vals = revenue_of_gamma(grid)
    if not np.all(np.isfinite(vals)):
        raise NumericError("tail_optimal_price: objective not finite on bracket")
    k = int(np.argmax(vals))
    if k == 0 or k == len(grid) - 1:
        raise NumericError("tail_optimal_price: bracket exhausted")
    res = optimize.minimize_scalar(
        lambda g: -float(revenue_of_gamma(g)),
        bounds=(grid[k - 1], grid[k + 1]), method="bounded",
        options={"xatol": 1e-12 * max(1.0, abs(grid[k]))},
    )
    gamma = float(res.x)
    if revenue_of_gamma(gamma) < vals[k]:
        gamma = float(grid[k])
    price = theta_star - gamma / root_n
    cdf = float(family.cdf(-gamma))
    revenue = price * (1.0 - cdf)
    intensive = theta_star - price
    extensive = theta_star * cdf
    cross = intensive * cdf
    report = MarginReport(price=price, revenue=float(revenue), intensive=intensive,
                          extensive=extensive, cross=cross,
                          gap=intensive + extensive - cross)
    return price, float(revenue), report


def elasticity_ratio(family: TailFamily, gamma: float) -> float:
    """F(-gamma) / (gamma * f(-gamma)), computed in log space."""
    if gamma <= 0.0:
        raise DomainError("elasticity_ratio: gamma must be positive")
    return math.exp(float(family.log_cdf(-gamma)) - float(family.log_pdf(-gamma))) / gamma
