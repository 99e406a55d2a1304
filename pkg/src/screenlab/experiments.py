"""Experiment harnesses: convergence curves, rate scans, margin scans,
the Monte Carlo estimate-then-price pipeline, and tail-family scans.

Each harness returns plain row dictionaries (fixed column order) and can
emit them as CSV with a JSON metadata sidecar.  Output is deterministic:
identical configuration and seed produce byte-identical files, and the
thread pool (capped by the ``SCREENLAB_THREADS`` environment variable)
reduces results in input order so scheduling cannot reorder rows.
"""

from __future__ import annotations

import csv
import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional, Sequence, Union

import numpy as np

from .gauss import DomainError, NumericError, check_spd, lambda_coeff, std_normal_cdf
from .mechanisms import (MultiGoodEnv, bundling_revenue, mixed_bundling_revenue,
                         relaxed_upper_bound, separate_revenue)
from .signals import (Box, EstimationError, SignalModel, empirical_fisher, mle,
                      sample)
from .single_good import (ScalarBelief, TailFamily, elasticity_ratio,
                          margin_decomposition, optimal_price, optimal_price_gap,
                          tail_optimal_price)

DEFAULT_N_GRID = (2, 5, 10, 20, 50, 100, 200, 500)
DEFAULT_RHO_LIST = (-0.5, 0.0, 0.5)
DEFAULT_DECADES = tuple(10 ** k for k in range(2, 11))
DEFAULT_THETA_STAR = (0.3, 0.3)


def worker_count() -> int:
    """Thread-pool size: SCREENLAB_THREADS if set, else cpu count capped at 8."""
    raw = os.environ.get("SCREENLAB_THREADS")
    if raw is not None:
        try:
            k = int(raw)
        except ValueError as exc:
            raise DomainError("SCREENLAB_THREADS must be an integer") from exc
        if k < 1:
            raise DomainError("SCREENLAB_THREADS must be >= 1")
        return k
    return min(os.cpu_count() or 1, 8)


def _parallel_map(fn, items):
    """Map preserving input order; pool size from worker_count()."""
    workers = worker_count()
    if workers == 1 or len(items) <= 1:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def _fmt(value) -> str:
    if isinstance(value, bool):
        return "1" if value else "0"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, float):
        return f"{value:.12g}"
    return str(value)


def write_csv(path, columns: Sequence[str], rows: Sequence[dict]) -> None:
    """Fixed column order, 12 significant digits, locale-independent."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(columns)
        for row in rows:
            writer.writerow([_fmt(row[c]) for c in columns])


def write_meta(path, meta: dict) -> None:
    with open(path, "w") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
        fh.write("\n")


# ---------------------------------------------------------------------------
# convergence curves over the two-good correlated environment


@dataclass(frozen=True)
class ConvergenceCurve:
    """Revenue/gap series over a signal-count grid for one environment."""

    rho: float
    n_grid: tuple
    columns: dict
    flags: tuple

    def __post_init__(self):
        n = np.asarray(self.n_grid)
        if n.size == 0 or np.any(np.diff(n) <= 0):
            raise DomainError("ConvergenceCurve: n_grid must be increasing")
        for name, series in self.columns.items():
            if len(series) != n.size:
                raise DomainError(f"ConvergenceCurve: column {name} misaligned")


def two_good_env(rho: float, n: int, theta_star=DEFAULT_THETA_STAR) -> MultiGoodEnv:
    """Two goods, unit marginal posterior variances, correlation rho."""
    if not -1.0 < rho < 1.0:
        raise DomainError("two_good_env: rho must lie in (-1, 1)")
    j = np.array([[1.0, rho], [rho, 1.0]])
    return MultiGoodEnv(theta_star=np.asarray(theta_star, dtype=float),
                        inv_fisher=j, n=n)


FIGURE1_COLUMNS = (
    "rho", "n", "r_fb", "r_sep", "r_bd", "r_mix", "r_sb_upper",
    "gap_sep", "gap_bd", "gap_mix",
    "scaled_gap_sep", "scaled_gap_bd", "scaled_gap_mix",
    "chain_ok", "flags",
)


def _figure1_point(args):
    rho, n, order, chain_tol = args
    env = two_good_env(rho, n)
    _, bd = bundling_revenue(env)
    _, sep = separate_revenue(env)
    menu, mix = mixed_bundling_revenue(env, order=order)
    flags = []
    try:
        upper, reports = relaxed_upper_bound(env, menu, order=order)
        if any(not r["converged"] for r in reports):
            flags.append("segment_unconverged")
    except NumericError:
        upper = float("nan")
        flags.append("relaxed_failed")
    fb = bd.first_best
    chain_ok = (max(bd.revenue, sep.revenue) <= mix.revenue + chain_tol
                and (math.isnan(upper) or mix.revenue <= upper + chain_tol))
    if not chain_ok:
        flags.append("chain_violation")
    return {
        "rho": rho, "n": n, "r_fb": fb,
        "r_sep": sep.revenue, "r_bd": bd.revenue, "r_mix": mix.revenue,
        "r_sb_upper": upper,
        "gap_sep": sep.gap, "gap_bd": bd.gap, "gap_mix": mix.gap,
        "scaled_gap_sep": sep.scaled_gap, "scaled_gap_bd": bd.scaled_gap,
        "scaled_gap_mix": mix.scaled_gap,
        "chain_ok": chain_ok, "flags": "|".join(flags),
    }


def figure1_curves(rho_list=DEFAULT_RHO_LIST, n_grid=DEFAULT_N_GRID, *,
                   order: int = 61, chain_tol: float = 1e-9):
    """Revenue curves per correlation: posted-price mechanisms, the
    optimal bundle menu, and the segment-relaxation upper bound.

    Solver trouble marks the row (``flags`` column) and the run
    continues.  Returns (curves, rows): one ConvergenceCurve per rho and
    the flat row list in (rho, n) order.
    """
    rho_list = tuple(float(r) for r in rho_list)
    n_grid = tuple(int(n) for n in n_grid)
    if not rho_list or not n_grid:
        raise DomainError("figure1_curves: empty grid")
    tasks = [(rho, n, order, chain_tol) for rho in rho_list for n in n_grid]
    rows = _parallel_map(_figure1_point, tasks)
    curves = []
    for rho in rho_list:
        sub = [r for r in rows if r["rho"] == rho]
        columns = {c: tuple(r[c] for r in sub)
                   for c in FIGURE1_COLUMNS if c not in ("rho", "n", "flags")}
        flags = tuple(r["flags"] for r in sub)
        curves.append(ConvergenceCurve(rho=rho, n_grid=n_grid,
                                       columns=columns, flags=flags))
    return curves, rows


# ---------------------------------------------------------------------------
# rate scans (closed-form posted-price path)

RATES_COLUMNS = ("n", "gap_bd", "ratio_bd", "gap_sep", "ratio_sep",
                 "ratio_bd_gap_to_one", "ratio_sep_gap_to_one")


def rate_scan(theta_star=DEFAULT_THETA_STAR, inv_fisher=None,
              n_decades=DEFAULT_DECADES):
    """Scaled revenue gaps against their limit coefficients.

    For each n: the grand-bundle and per-good posted-price gaps times
    sqrt(n/ln n), divided by the respective limit coefficients
    lambda(grand) and sum_g lambda({g}).  Returns (rows, trend) where
    trend records whether |ratio - 1| strictly decreases across decades.
    """
    theta = np.asarray(theta_star, dtype=float)
    j = np.eye(theta.size) if inv_fisher is None else check_spd(inv_fisher, "inv_fisher")
    n_decades = tuple(int(n) for n in n_decades)
    if any(n < 100 or n > 10 ** 12 for n in n_decades):
        raise DomainError("rate_scan: decades must lie in [1e2, 1e12]")
    ones = np.ones(theta.size)
    lam_grand = lambda_coeff(ones, j)
    lam_sep = sum(lambda_coeff(np.eye(theta.size)[g], j) for g in range(theta.size))
    rows = []
    for n in n_decades:
        scale = math.sqrt(n / math.log(n))
        sd_grand = math.sqrt(ones @ j @ ones / n)
        _, _, gap_bd = optimal_price_gap(ScalarBelief(mean=float(theta.sum()),
                                                      sd=sd_grand))
        gap_sep = 0.0
        for g in range(theta.size):
            _, _, gp = optimal_price_gap(ScalarBelief(mean=float(theta[g]),
                                                      sd=math.sqrt(j[g, g] / n)))
            gap_sep += gp
        ratio_bd = gap_bd * scale / lam_grand
        ratio_sep = gap_sep * scale / lam_sep
        rows.append({"n": n, "gap_bd": gap_bd, "ratio_bd": ratio_bd,
                     "gap_sep": gap_sep, "ratio_sep": ratio_sep,
                     "ratio_bd_gap_to_one": abs(ratio_bd - 1.0),
                     "ratio_sep_gap_to_one": abs(ratio_sep - 1.0)})
    trend = {
        "bd_trend_ok": _trend_toward([r["ratio_bd_gap_to_one"] for r in rows]),
        "sep_trend_ok": _trend_toward([r["ratio_sep_gap_to_one"] for r in rows]),
        "lambda_grand": lam_grand, "lambda_sep_sum": lam_sep,
    }
    return rows, trend


def _trailing_decreases(xs) -> int:
    """Length of the strictly decreasing run ending at the last entry."""
    run = 0
    for a, b in zip(reversed(xs[:-1]), reversed(xs[1:])):
        if b < a:
            run += 1
        else:
            break
    return run


def _trend_toward(xs, min_run: int = 4) -> bool:
    """Convergence heuristic: the sequence ends with at least ``min_run``
    consecutive strict decreases (asymptotic statements cannot be tested
    pointwise; early entries may overshoot)."""
    return _trailing_decreases(xs) >= min_run


def loglog_slope(ns, gaps) -> float:
    """Least-squares slope of log(gap) against log(n)."""
    ns = np.asarray(ns, dtype=float)
    gaps = np.asarray(gaps, dtype=float)
    if np.any(gaps <= 0.0):
        raise DomainError("loglog_slope: gaps must be positive")
    return float(np.polyfit(np.log(ns), np.log(gaps), 1)[0])


# ---------------------------------------------------------------------------
# margin scans

MARGIN_DELTAS = (0.5, 0.9, 0.99, 1.0)


def margin_scan(theta_star: float, sigma: float, n_decades=DEFAULT_DECADES,
                deltas=MARGIN_DELTAS):
    """Price-shading versus rejection losses across belief precisions.

    Per n: the optimal price's margin split and its rejection/shading
    ratio; plus, for each underpricing factor delta, the rejection loss
    at price theta* - delta*sqrt(ln n)*sigma/sqrt(n) divided by
    sqrt(ln n / n).
    """
    if theta_star <= 0.0:
        raise DomainError("margin_scan: theta_star must be positive")
    if sigma <= 0.0:
        raise DomainError("margin_scan: sigma must be positive")
    deltas = tuple(float(d) for d in deltas)
    columns = ["n", "price", "intensive", "extensive", "ext_over_int"]
    columns += [f"scaled_ext_delta_{d:g}" for d in deltas]
    rows = []
    for n in (int(n) for n in n_decades):
        belief = ScalarBelief(mean=theta_star, sd=sigma / math.sqrt(n))
        price, _ = optimal_price(belief)
        rep = margin_decomposition(theta_star, price, belief)
        row = {"n": n, "price": price, "intensive": rep.intensive,
               "extensive": rep.extensive,
               "ext_over_int": rep.extensive / rep.intensive}
        root_ln = math.sqrt(math.log(n))
        for d in deltas:
            # rejection probability at the underpriced posted price is
            # Phi(-delta*sqrt(ln n)) regardless of sigma
            ext = theta_star * std_normal_cdf(-d * root_ln)
            row[f"scaled_ext_delta_{d:g}"] = ext / math.sqrt(math.log(n) / n)
        rows.append(row)
    return rows, columns


# ---------------------------------------------------------------------------
# Monte Carlo estimate-then-price pipeline


@dataclass(frozen=True)
class PointPrior:
    theta: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "theta",
                           np.atleast_1d(np.asarray(self.theta, dtype=float)))

    def draw(self, rng) -> np.ndarray:
        return self.theta.copy()


@dataclass(frozen=True)
class UniformPrior:
    box: Box

    def draw(self, rng) -> np.ndarray:
        return self.box.lower + rng.random(self.box.lower.shape) * (
            self.box.upper - self.box.lower)


@dataclass(frozen=True)
class ProductBetaPrior:
    """Independent Beta(a, b) marginals rescaled onto the box."""

    box: Box
    a: float = 2.0
    b: float = 2.0

    def draw(self, rng) -> np.ndarray:
        u = rng.beta(self.a, self.b, size=self.box.lower.shape)
        return self.box.lower + u * (self.box.upper - self.box.lower)


Prior = Union[PointPrior, UniformPrior, ProductBetaPrior]


@dataclass(frozen=True)
class MonteCarloConfig:
    """Configuration of the estimate-then-price Monte Carlo run."""

    model: SignalModel
    prior: Prior
    n_list: tuple
    replications: int
    seed: int
    box: Optional[Box] = None  # estimation box; defaults to the prior's

    def __post_init__(self):
        object.__setattr__(self, "n_list", tuple(int(n) for n in self.n_list))
        if self.replications < 1:
            raise DomainError("MonteCarloConfig: replications must be >= 1")
        if any(n < 2 for n in self.n_list):
            raise DomainError("MonteCarloConfig: counts must be >= 2")

    def estimation_box(self) -> Box:
        if self.box is not None:
            return self.box
        if isinstance(self.prior, PointPrior):
            half = np.maximum(np.abs(self.prior.theta), 1.0)
            return Box(lower=self.prior.theta - half, upper=self.prior.theta + half)
        return self.prior.box.inflate(0.2)


MLE_PRICING_COLUMNS = ("n", "mean_revenue", "mean_gap", "scaled_gap",
                       "sale_freq", "se_revenue", "se_sale_freq",
                       "mle_failures")


def mle_pricing_experiment(config: MonteCarloConfig):
    """Estimate the valuation vector from signals, shade the grand-bundle
    price by sqrt(ln n / n) times the estimated posterior spread, and
    record realized sales and revenue.

    Per replication: draw theta from the prior, draw n signal records,
    compute the box-constrained MLE and the empirical information matrix
    at it, post price sum(theta_hat) - sqrt(ln n/n)*lambda_hat, and
    record whether the buyer (valuation sum(theta)) accepts.  Reports
    per n the mean gap to E[sum(theta)], the gap scaled by
    sqrt(n/ln n), the sale frequency, and Monte Carlo standard errors.
    An MLE failure rate above 1% aborts the run.
    """
    model, prior = config.model, config.prior
    box = config.estimation_box()
    ones = np.ones(model.dim)
    root = np.random.SeedSequence(config.seed)
    cell_seeds = root.spawn(len(config.n_list))
    rows = []
    for n, cell in zip(config.n_list, cell_seeds):
        rep_seeds = cell.generate_state(2 * config.replications, dtype=np.uint64)
        shade = math.sqrt(math.log(n) / n)
        revenues = np.empty(config.replications)
        sales = np.empty(config.replications)
        gaps_fb = np.empty(config.replications)
        failures = 0
        for i in range(config.replications):
            rng = np.random.default_rng(int(rep_seeds[2 * i]))
            theta = prior.draw(rng)
            data = sample(model, theta, n, int(rep_seeds[2 * i + 1]))
            try:
                theta_hat = mle(model, data, box)
            except EstimationError as err:
                failures += 1
                theta_hat = err.best_iterate
            info = empirical_fisher(model, data, theta_hat).matrix
            lam_hat = lambda_coeff(ones, np.linalg.inv(info))
            price = float(ones @ theta_hat) - shade * lam_hat
            sold = price <= float(ones @ theta) + 1e-12
            sales[i] = 1.0 if sold else 0.0
            revenues[i] = price if sold else 0.0
            gaps_fb[i] = float(ones @ theta)
        if failures > 0.01 * config.replications:
            raise NumericError("mle_pricing_experiment: MLE failure rate above 1%")
        mean_rev = float(revenues.mean())
        mean_fb = float(gaps_fb.mean())
        gap = mean_fb - mean_rev
        se_rev = float(revenues.std(ddof=1) / math.sqrt(config.replications))
        sale_freq = float(sales.mean())
        se_sale = float(sales.std(ddof=1) / math.sqrt(config.replications))
        rows.append({"n": n, "mean_revenue": mean_rev, "mean_gap": gap,
                     "scaled_gap": gap * math.sqrt(n / math.log(n)),
                     "sale_freq": sale_freq, "se_revenue": se_rev,
                     "se_sale_freq": se_sale, "mle_failures": failures})
    return rows


# ---------------------------------------------------------------------------
# tail-family scans

TAILS_COLUMNS = ("n", "price", "gap", "scaled_ratio", "gamma_star",
                 "ext_over_int", "elasticity_ratio")


def tail_rate_scan(family: TailFamily, theta_star: float,
                   n_decades=DEFAULT_DECADES):
    """Optimal-price gap against the tail-driven rate for a noise family.

    Per n: the gap divided by (ln n / (2 alpha-))^(1/beta-) / sqrt(n),
    the optimal normalized discount gamma*, the rejection/shading margin
    ratio, and the hazard-based elasticity ratio at gamma*.  The trend
    dict flags whether |scaled ratio - 1| decreases across decades and
    whether the two margin statistics agree within 20% at the largest n.
    """
    rows = []
    for n in (int(n) for n in n_decades):
        price, _, rep = tail_optimal_price(family, theta_star, n)
        rate = ((math.log(n) / (2.0 * family.alpha_minus))
                ** (1.0 / family.beta_minus)) / math.sqrt(n)
        gamma = (theta_star - price) * math.sqrt(n)
        rows.append({"n": n, "price": price, "gap": rep.gap,
                     "scaled_ratio": rep.gap / rate,
                     "gamma_star": gamma,
                     "ext_over_int": rep.extensive / rep.intensive,
                     "elasticity_ratio": elasticity_ratio(family, gamma)})
    last = rows[-1]
    trend = {
        "ratio_trend_ok": _trend_toward(
            [abs(r["scaled_ratio"] - 1.0) for r in rows]),
        "margins_match_last": abs(last["ext_over_int"] / last["elasticity_ratio"]
                                  - 1.0) <= 0.2,
    }
    return rows, trend
