"""Multi-good revenue mechanisms under a precise Gaussian belief.

The seller believes valuations are theta ~ N(theta*, J/n) with additive
bundle values. This module computes first-best revenue, pure bundling,
separate sales, mixed bundling (a price per bundle, optimized), the
best single-bundle mechanism under production costs, and an upper bound
on the optimal (possibly stochastic) mechanism obtained by relaxing
incentive constraints to one-dimensional line segments of the type
space and solving each segment's screening problem.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Mapping, Optional, Sequence, Union

import numpy as np
from scipy import integrate, linalg, optimize

from .gauss import (DomainError, NumericError, check_spd, gauss_hermite,
                    gauss_hermite_multivariate, make_segments, std_normal_cdf,
                    std_normal_pdf)
from .onedim import (GaussianTypeDist, OneDimEnv, menu_revenue,
                     optimal_simple_mechanism, upper_envelope_lines)
from .single_good import ScalarBelief, optimal_price_gap

Bundle = frozenset


def all_bundles(n_goods: int):
    """All subsets of goods, empty bundle first, grand bundle last."""
    out = []
    for mask in range(2 ** n_goods):
        out.append(frozenset(g for g in range(n_goods) if mask >> g & 1))
    out.sort(key=lambda b: (len(b), tuple(sorted(b))))
    return out


def bundle_indicator(bundle: Bundle, n_goods: int) -> np.ndarray:
    ind = np.zeros(n_goods)
    for g in bundle:
        ind[g] = 1.0
    return ind


@dataclass(frozen=True)
class MultiGoodEnv:
    """True type theta*, scaled belief covariance J (cov = J/n), sample
    size n, and an optional production cost per bundle."""

    theta_star: np.ndarray
    inv_fisher: np.ndarray
    n: int
    cost: Optional[Union[Mapping, Callable]] = None

    def __post_init__(self):
        theta = np.atleast_1d(np.asarray(self.theta_star, dtype=float))
        j = check_spd(self.inv_fisher, "MultiGoodEnv.inv_fisher")
        if theta.shape[0] != j.shape[0]:
            raise DomainError("MultiGoodEnv: dimension mismatch")
        if np.any(theta <= 0.0):
            raise DomainError("MultiGoodEnv: theta_star must be positive")
        if self.n < 1:
            raise DomainError("MultiGoodEnv: n must be >= 1")
        object.__setattr__(self, "theta_star", theta)
        object.__setattr__(self, "inv_fisher", j)
        if self.cost is not None and abs(self.cost_of(frozenset())) > 0.0:
            raise DomainError("MultiGoodEnv: cost of the empty bundle must be 0")

    @property
    def n_goods(self) -> int:
        return self.theta_star.shape[0]

    @property
    def belief_cov(self) -> np.ndarray:
        return self.inv_fisher / self.n

    def cost_of(self, bundle: Bundle) -> float:
        if self.cost is None:
            return 0.0
        if callable(self.cost):
            return float(self.cost(bundle))
        # mapping: unlisted bundles are free to produce
        return float(self.cost.get(frozenset(bundle), 0.0))


@dataclass(frozen=True)
class PriceMenu:
    """Posted price per bundle; the empty bundle always costs 0."""

    prices: dict

    def __post_init__(self):
        prices = {frozenset(k): float(v) for k, v in self.prices.items()}
        prices[frozenset()] = 0.0
        object.__setattr__(self, "prices", prices)

    def price_of(self, bundle: Bundle) -> float:
        # unlisted bundles are not offered
        return self.prices.get(frozenset(bundle), math.inf)


@dataclass(frozen=True)
class RevenueBreakdown:
    revenue: float
    first_best: float
    gap: float
    scaled_gap: float


def _breakdown(revenue: float, first_best: float, n: int,
               gap: Optional[float] = None) -> RevenueBreakdown:
    if gap is None:
        gap = first_best - revenue
    scaled = gap * math.sqrt(n / math.log(n)) if n >= 2 else float("nan")
    return RevenueBreakdown(revenue=float(revenue), first_best=float(first_best),
                            gap=float(gap), scaled_gap=float(scaled))


def _expected_max_lines(intercepts, slopes, mean, sd) -> float:
    """E[max_k (a_k + s_k Z)] for Z ~ N(mean, sd) — exact via the upper
    envelope of the lines and truncated-normal first moments."""
    bounds, ids = upper_envelope_lines(intercepts, slopes)
    a = np.asarray(intercepts, dtype=float)[ids]
    s = np.asarray(slopes, dtype=float)[ids]
    zb = (bounds - mean) / sd
    cdf = np.concatenate(([0.0], std_normal_cdf(zb), [1.0])) if bounds.size else \
        np.array([0.0, 1.0])
    pdf = np.concatenate(([0.0], std_normal_pdf(zb), [0.0])) if bounds.size else \
        np.array([0.0, 0.0])
    probs = np.diff(cdf)
    # E[Z; interval] = mean*P(interval) - sd*(phi(upper) - phi(lower))
    seg_mean = mean * probs - sd * np.diff(pdf)
    return float(np.sum(a * probs + s * seg_mean))


def first_best(env: MultiGoodEnv, *, order: int = 40) -> float:
    """Full-information revenue.

    Without costs this is sum(theta*); with costs it is the expected
    best bundle surplus E[max_B (value(B) - cost(B))].  The last
    coordinate is integrated exactly conditional on the others (the max
    of affine functions of a scalar Gaussian), leaving a smooth outer
    integrand for tensor quadrature; a doubled-order check guards the
    outer part.
    """
    if env.cost is None:
        return float(env.theta_star.sum())
    bundles = all_bundles(env.n_goods)
    ind = np.stack([bundle_indicator(b, env.n_goods) for b in bundles])
    costs = np.array([env.cost_of(b) for b in bundles])
    d = env.n_goods
    cov = env.belief_cov
    if d == 1:
        return _expected_max_lines(-costs, ind[:, 0], float(env.theta_star[0]),
                                   math.sqrt(cov[0, 0]))
    # condition theta_d on theta_rest
    rest = slice(0, d - 1)
    crr = cov[rest, rest]
    crd = cov[:d - 1, d - 1]
    gain = linalg.solve(crr, crd, assume_a="pos")
    cond_sd = math.sqrt(cov[d - 1, d - 1] - crd @ gain)
    mu_rest = env.theta_star[:d - 1]
    if d == 2:
        # the outer integrand has kinks where the envelope's line set
        # changes with theta_1; adaptive quadrature handles them
        m1, sd1 = float(mu_rest[0]), math.sqrt(crr[0, 0])

        def g(t1):
            cond_mean = float(env.theta_star[1] + gain[0] * (t1 - m1))
            intercepts = ind[:, 0] * t1 - costs
            return (_expected_max_lines(intercepts, ind[:, 1], cond_mean, cond_sd)
                    * std_normal_pdf((t1 - m1) / sd1) / sd1)

        value, err = integrate.quad(g, m1 - 12.0 * sd1, m1 + 12.0 * sd1,
                                    limit=400, epsabs=1e-11, epsrel=1e-10)
        if err > 1e-7 * max(1.0, abs(value)):
            raise NumericError("first_best: quadrature did not converge")
        return float(value)

    def quad(o):
        nodes, weights = gauss_hermite_multivariate(o, mu_rest, crr)
        total = 0.0
        for node, w in zip(nodes, weights):
            cond_mean = float(env.theta_star[d - 1] + gain @ (node - mu_rest))
            intercepts = ind[:, :d - 1] @ node - costs
            total += w * _expected_max_lines(intercepts, ind[:, d - 1],
                                             cond_mean, cond_sd)
        return total

    v1, v2 = quad(order), quad(2 * order)
    if abs(v1 - v2) > 1e-4 * max(1.0, abs(v2)):
        raise NumericError("first_best: quadrature did not converge")
    return v2


def bundling_revenue(env: MultiGoodEnv):
    """Optimal single posted price for the grand bundle."""
    if env.cost is not None:
        raise DomainError("bundling_revenue: cost-free path only")
    ones = np.ones(env.n_goods)
    sd = math.sqrt(ones @ env.belief_cov @ ones)
    price, revenue, gap = optimal_price_gap(ScalarBelief(mean=float(env.theta_star.sum()),
                                                         sd=sd))
    return price, _breakdown(revenue, env.theta_star.sum(), env.n, gap=gap)


def separate_revenue(env: MultiGoodEnv):
    """Optimal independent posted price per good."""
    if env.cost is not None:
        raise DomainError("separate_revenue: cost-free path only")
    prices, revenue, gap = [], 0.0, 0.0
    for g in range(env.n_goods):
        sd = math.sqrt(env.belief_cov[g, g])
        p, r, gp = optimal_price_gap(ScalarBelief(mean=float(env.theta_star[g]), sd=sd))
        prices.append(p)
        revenue += r
        gap += gp
    return np.array(prices), _breakdown(revenue, env.theta_star.sum(), env.n, gap=gap)


# ---------------------------------------------------------------------------
# segment decomposition of the belief


@dataclass(frozen=True)
class SegmentContext:
    """Quadrature discretization of the belief into one-dim segments.

    Conditioning on z (the components of theta orthogonal, under the
    covariance, to the direction cov @ 1) leaves theta on a line
    y_hat(z) + tau * direction with tau ~ N(0, tau_sd^2). Bundle values
    on a segment are alpha0 + tau * beta with z-independent slopes beta.
    """

    bundles: tuple
    betas: np.ndarray        # (m,) slope per bundle, z-independent
    tau_sd: float
    z_nodes: np.ndarray      # (Q, k-1)
    z_weights: np.ndarray    # (Q,)
    alpha0_nodes: np.ndarray  # (Q, m) bundle-value intercepts per node

    @property
    def n_nodes(self) -> int:
        return self.z_weights.shape[0]


def segment_context(env: MultiGoodEnv, *, order: int = 61) -> SegmentContext:
    cov = env.belief_cov
    k = env.n_goods
    bundles = tuple(all_bundles(k))
    ind = np.stack([bundle_indicator(b, k) for b in bundles])  # (m, k)
    if k == 1:
        # one good: the "segment" is the whole line, one node
        direction = cov @ np.ones(1)
        tau_sd = math.sqrt(cov[0, 0] / direction[0] ** 2)
        return SegmentContext(bundles=bundles, betas=ind @ direction,
                              tau_sd=tau_sd, z_nodes=np.zeros((1, 0)),
                              z_weights=np.ones(1),
                              alpha0_nodes=(ind @ env.theta_star).reshape(1, -1))
    seg = make_segments(cov, mean=env.theta_star)
    tau_sd = math.sqrt(seg.tau_var)
    if k == 2:
        nodes1, weights1 = gauss_hermite(order)
        chol = math.sqrt(seg.z_cov[0, 0])
        z_nodes = (seg.z_mean[0] + chol * nodes1).reshape(-1, 1)
        z_weights = weights1
    else:
        o = max(9, int(round(10000 ** (1.0 / (k - 1)))))
        o = min(o, order)
        z_nodes, z_weights = gauss_hermite_multivariate(o, seg.z_mean, seg.z_cov)
    y = seg.mean[None, :] + (z_nodes - seg.z_mean[None, :]) @ seg.b_matrix.T
    return SegmentContext(bundles=bundles, betas=ind @ seg.direction,
                          tau_sd=tau_sd, z_nodes=z_nodes, z_weights=z_weights,
                          alpha0_nodes=y @ ind.T)


def _menu_price_vector(ctx: SegmentContext, menu: PriceMenu) -> np.ndarray:
    return np.array([menu.price_of(b) for b in ctx.bundles])


def menu_expected_revenue(env: MultiGoodEnv, menu: PriceMenu,
                          ctx: Optional[SegmentContext] = None) -> float:
    """Expected revenue of a bundle-price menu against the belief.

    Conditional on a segment the buyer's best response partitions the
    line into intervals (upper envelope of per-bundle utilities); the
    inner integral is exact via the normal cdf, the outer one uses the
    context's quadrature nodes.
    """
    if ctx is None:
        ctx = segment_context(env)
    prices = _menu_price_vector(ctx, menu)
    offered = np.isfinite(prices)
    p = prices[offered]
    betas = ctx.betas[offered]
    total = 0.0
    for qi in range(ctx.n_nodes):
        a = ctx.alpha0_nodes[qi][offered] - p
        bounds, ids = upper_envelope_lines(a, betas)
        cdf = std_normal_cdf(bounds / ctx.tau_sd) if bounds.size else np.array([])
        probs = np.diff(np.concatenate(([0.0], cdf, [1.0])))
        total += ctx.z_weights[qi] * float(np.sum(probs * p[ids]))
    return total


def mixed_bundling_revenue(env: MultiGoodEnv, *, order: int = 61,
                           n_restarts: int = 6):
    """Optimal bundle-price menu (one price per nonempty bundle).

    Nelder-Mead multi-start seeded at the pure-bundling and the
    separate-sales menus; the returned value is the best evaluated
    point, hence >= both seeds' revenues by construction.
    """
    if env.cost is not None:
        raise DomainError("mixed_bundling_revenue: cost-free path only")
    if env.n_goods > 3:
        raise DomainError("mixed_bundling_revenue: at most 3 goods")
    ctx = segment_context(env, order=order)
    nonempty = [b for b in ctx.bundles if b]
    prohibitive = float(env.theta_star.sum() + 50.0 * ctx.tau_sd
                        + 50.0 * math.sqrt(np.max(np.diag(env.belief_cov))))

    def menu_from_vector(x):
        return PriceMenu(prices={b: float(p) for b, p in zip(nonempty, x)})

    def objective(x):
        return -menu_expected_revenue(env, menu_from_vector(x), ctx)

    p_bd, _ = bundling_revenue(env)
    p_sep, _ = separate_revenue(env)
    grand = frozenset(range(env.n_goods))
    seed_bd = np.array([p_bd if b == grand else prohibitive for b in nonempty])
    seed_sep = np.array([sum(p_sep[g] for g in b) for b in nonempty])
    rng = np.random.default_rng(20240901)
    seeds = [seed_bd, seed_sep, 0.5 * (seed_bd + seed_sep)]
    base = seed_bd if objective(seed_bd) < objective(seed_sep) else seed_sep
    while len(seeds) < n_restarts:
        seeds.append(base * (1.0 + 0.05 * rng.standard_normal(base.shape)))

    best_x, best_f = None, np.inf
    for s in seeds:
        f0 = objective(s)
        if f0 < best_f:
            best_x, best_f = np.asarray(s, dtype=float), f0
        res = optimize.minimize(objective, s, method="Nelder-Mead",
                                options={"xatol": 1e-9, "fatol": 1e-12,
                                         "maxiter": 4000, "maxfev": 4000})
        if res.fun < best_f:
            best_x, best_f = res.x, float(res.fun)
    menu = menu_from_vector(best_x)
    return menu, _breakdown(-best_f, env.theta_star.sum(), env.n)


def single_bundle_revenue(env: MultiGoodEnv):
    """Best mechanism that offers exactly one bundle at one price.

    Profit of bundle B at price p is (p - cost(B)) * P(value(B) >= p);
    the inner problem reduces to a shifted single-good posted-price
    problem. Ties break toward smaller bundles.
    Returns (bundle, price, RevenueBreakdown with profit as revenue).
    """
    from .single_good import optimal_price

    fb = first_best(env)
    candidates = []
    for b in all_bundles(env.n_goods):
        if not b:
            continue
        ind = bundle_indicator(b, env.n_goods)
        mu = float(ind @ env.theta_star)
        sd = math.sqrt(ind @ env.belief_cov @ ind)
        c = env.cost_of(b)
        # (p - c) * P(value >= p) is the cost-shifted posted-price problem
        p_shift, profit = optimal_price(ScalarBelief(mean=mu - c, sd=sd))
        candidates.append((profit, b, p_shift + c))
    best_profit = max(p for p, _, _ in candidates)
    ties = [(len(b), tuple(sorted(b)), b, price) for p, b, price in candidates
            if p >= best_profit - 1e-12 * max(1.0, abs(best_profit))]
    _, _, bundle, price = min(ties)
    return bundle, price, _breakdown(best_profit, fb, env.n)


def relaxed_upper_bound(env: MultiGoodEnv, mixed_menu: Optional[PriceMenu] = None,
                        *, order: int = 61):
    """Upper bound on any IC-IR mechanism's revenue.

    Incentive constraints are relaxed to hold only within each line
    segment of the conditional decomposition; each segment's
    one-dimensional screening problem is solved (seeded with the global
    mixed-bundling menu so the result dominates it) and averaged over
    the segment quadrature. Returns (value, per-segment report list).
    """
    if env.cost is not None:
        raise DomainError("relaxed_upper_bound: cost-free path only")
    if env.n_goods > 3:
        raise DomainError("relaxed_upper_bound: at most 3 goods")
    ctx = segment_context(env, order=order)
    if mixed_menu is None:
        mixed_menu, _ = mixed_bundling_revenue(env, order=order)
    prices = _menu_price_vector(ctx, mixed_menu)
    type_dist = GaussianTypeDist(mean=0.0, sd=ctx.tau_sd)
    reports = []
    total = 0.0
    failures = 0
    for qi in range(ctx.n_nodes):
        seg_env = OneDimEnv(alpha0=ctx.alpha0_nodes[qi], beta=ctx.betas.copy(),
                            type_dist=type_dist, null_index=0)
        seed = [(li, float(prices[li])) for li in range(1, len(ctx.bundles))
                if math.isfinite(prices[li])]
        mech, value = optimal_simple_mechanism(seg_env, seed_menu=seed,
                                               n_random_starts=3, rng_seed=qi)
        if not mech.converged:
            failures += 1
        total += ctx.z_weights[qi] * value
        reports.append({"node": qi, "value": value, "converged": mech.converged})
    if failures / ctx.n_nodes > 0.01:
        raise NumericError("relaxed_upper_bound: segment solver failed on >1% of nodes")
    return float(total), reports
