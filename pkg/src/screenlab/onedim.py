"""One-dimensional screening over a finite set of allocations.

Types live on a line; allocation ``l`` gives the buyer utility
``alpha0[l] + tau * beta[l]``. The module computes the concave value
function H (best lottery utility-intercept at a given utility-slope) via
the upper hull of the points (beta_l, alpha0_l), the type-independent
base lottery, the value of convex piecewise-linear indirect utilities,
an optimizer over step indirect utilities (deterministic menus plus at
most the base lottery), and an exact finite-type LP oracle used to audit
the optimizer.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence, Union

import numpy as np
from scipy import optimize

from .gauss import DomainError, NumericError, std_normal_cdf


# ---------------------------------------------------------------------------
# type distributions


@dataclass(frozen=True)
class GaussianTypeDist:
    """Normal distribution of the scalar type."""

    mean: float
    sd: float

    def __post_init__(self):
        if self.sd <= 0.0 or not math.isfinite(self.sd) or not math.isfinite(self.mean):
            raise DomainError("GaussianTypeDist: invalid parameters")

    def cdf(self, t):
        return std_normal_cdf((np.asarray(t, dtype=float) - self.mean) / self.sd)

    def support(self):
        """Effective compact support used for breakpoint searches."""
        return self.mean - 8.0 * self.sd, self.mean + 8.0 * self.sd

    def sample(self, rng, n):
        return rng.normal(self.mean, self.sd, size=n)


@dataclass(frozen=True)
class DiscreteTypeDist:
    """Finitely supported type distribution (sorted atoms + weights)."""

    points: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        pts = np.atleast_1d(np.asarray(self.points, dtype=float))
        w = np.atleast_1d(np.asarray(self.weights, dtype=float))
        if pts.shape != w.shape or pts.ndim != 1:
            raise DomainError("DiscreteTypeDist: points/weights shape mismatch")
        if np.any(w < 0.0) or abs(w.sum() - 1.0) > 1e-10:
            raise DomainError("DiscreteTypeDist: weights must form a probability vector")
        order = np.argsort(pts, kind="stable")
        object.__setattr__(self, "points", pts[order])
        object.__setattr__(self, "weights", w[order])
        object.__setattr__(self, "_cumw", np.cumsum(w[order]))

    def cdf(self, t):
        t = np.asarray(t, dtype=float)
        idx = np.searchsorted(self.points, t, side="right")
        cum = np.concatenate(([0.0], self._cumw))
        out = cum[idx]
        return float(out) if out.ndim == 0 else out

    def support(self):
        return float(self.points[0]), float(self.points[-1])

    def sample(self, rng, n):
        return rng.choice(self.points, size=n, p=self.weights / self.weights.sum())


TypeDist = Union[GaussianTypeDist, DiscreteTypeDist]


# ---------------------------------------------------------------------------
# environment and envelope


@dataclass(frozen=True)
class OneDimEnv:
    """Allocation intercepts/slopes plus a scalar type distribution."""

    alpha0: np.ndarray
    beta: np.ndarray
    type_dist: TypeDist
    null_index: int = 0

    def __post_init__(self):
        a = np.atleast_1d(np.asarray(self.alpha0, dtype=float))
        b = np.atleast_1d(np.asarray(self.beta, dtype=float))
        if a.shape != b.shape or a.ndim != 1 or a.shape[0] < 1:
            raise DomainError("OneDimEnv: alpha0/beta must be equal-length vectors")
        ni = int(self.null_index)
        if not (0 <= ni < a.shape[0]):
            raise DomainError("OneDimEnv: null_index out of range")
        if a[ni] != 0.0 or b[ni] != 0.0:
            raise DomainError("OneDimEnv: null allocation must have alpha0 = beta = 0")
        object.__setattr__(self, "alpha0", a)
        object.__setattr__(self, "beta", b)
        object.__setattr__(self, "null_index", ni)

    @property
    def m(self) -> int:
        return self.alpha0.shape[0]


@dataclass(frozen=True)
class PiecewiseLinearEnvelope:
    """Concave upper hull of the points (beta_l, alpha0_l).

    ``vertex_x``/``vertex_y`` are the hull vertices in increasing x
    (slope) order with their allocation indices; ``breakpoints_z`` are
    the decreasing dual breakpoints (the slopes of H between consecutive
    vertices, which are also the kinks of the dual support function
    G(z) = max_l alpha0_l - z beta_l).
    """

    vertex_x: np.ndarray
    vertex_y: np.ndarray
    active_indices: np.ndarray
    breakpoints_z: np.ndarray

    def g_value(self, z):
        """G(z) = max over hull vertices of alpha0 - z * beta."""
        z = np.asarray(z, dtype=float)
        vals = self.vertex_y[None, :] - np.atleast_1d(z)[:, None] * self.vertex_x[None, :]
        out = vals.max(axis=1)
        return float(out[0]) if z.ndim == 0 else out

    def h(self, x):
        """Concave interpolation through the hull vertices."""
        x = np.asarray(x, dtype=float)
        lo, hi = self.vertex_x[0], self.vertex_x[-1]
        tol = 1e-9 * max(1.0, abs(lo), abs(hi))
        if np.any(x < lo - tol) or np.any(x > hi + tol):
            raise DomainError("h: slope outside the achievable range")
        out = np.interp(np.clip(x, lo, hi), self.vertex_x, self.vertex_y)
        return float(out) if out.ndim == 0 else out


def dual_envelope(env: OneDimEnv) -> PiecewiseLinearEnvelope:
    """Upper concave hull of (beta_l, alpha0_l) by a monotone chain."""
    x, y = env.beta, env.alpha0
    # Sort by x ascending; ties keep the highest y, then the lowest index.
    order = np.lexsort((np.arange(env.m), -y, x))
    keep_x, keep_y, keep_i = [], [], []
    for idx in order:
        if keep_x and abs(x[idx] - keep_x[-1]) <= 1e-14 * max(1.0, abs(x[idx])):
            continue  # duplicate slope dominated by the earlier (higher-y) point
        keep_x.append(float(x[idx]))
        keep_y.append(float(y[idx]))
        keep_i.append(int(idx))
    hull = []  # list of positions into keep_*
    for pos in range(len(keep_x)):
        while len(hull) >= 2:
            x1, y1 = keep_x[hull[-2]], keep_y[hull[-2]]
            x2, y2 = keep_x[hull[-1]], keep_y[hull[-1]]
            x3, y3 = keep_x[pos], keep_y[pos]
            # Drop the middle point unless it lies strictly above the chord.
            if (y2 - y1) * (x3 - x2) > (y3 - y2) * (x2 - x1) + 1e-15 * max(
                    1.0, abs(y3 - y1)) * max(1.0, x3 - x1):
                break
            hull.pop()
        hull.append(pos)
    vx = np.array([keep_x[p] for p in hull])
    vy = np.array([keep_y[p] for p in hull])
    vi = np.array([keep_i[p] for p in hull], dtype=int)
    if len(vx) >= 2:
        breakpoints_z = (vy[1:] - vy[:-1]) / (vx[1:] - vx[:-1])
    else:
        breakpoints_z = np.array([])
    return PiecewiseLinearEnvelope(vertex_x=vx, vertex_y=vy,
                                   active_indices=vi, breakpoints_z=breakpoints_z)


def h_value(env: OneDimEnv, x) -> float:
    """Best lottery intercept alpha0 . q subject to beta . q = x."""
    return dual_envelope(env).h(x)


@dataclass(frozen=True)
class Lottery:
    """Probability vector over the environment's allocations."""

    probs: np.ndarray

    def __post_init__(self):
        p = np.atleast_1d(np.asarray(self.probs, dtype=float))
        if np.any(p < -1e-12) or abs(p.sum() - 1.0) > 1e-12:
            raise DomainError("Lottery: probs must be a probability vector")
        object.__setattr__(self, "probs", np.clip(p, 0.0, None))

    @property
    def support(self) -> np.ndarray:
        return np.flatnonzero(self.probs > 1e-12)


def lottery_at_slope(env: OneDimEnv, envelope: PiecewiseLinearEnvelope,
                     slope: float) -> Lottery:
    """A hull-optimal lottery with beta . q = slope (support size <= 2).

    Prefers a deterministic allocation when the slope sits on a vertex.
    """
    vx, vi = envelope.vertex_x, envelope.active_indices
    tol = 1e-10 * max(1.0, abs(vx).max())
    probs = np.zeros(env.m)
    exact = np.flatnonzero(np.abs(vx - slope) <= tol)
    if exact.size:
        probs[vi[exact[0]]] = 1.0
        return Lottery(probs=probs)
    k = int(np.searchsorted(vx, slope)) - 1
    k = min(max(k, 0), len(vx) - 2)
    w = (vx[k + 1] - slope) / (vx[k + 1] - vx[k])
    probs[vi[k]] = w
    probs[vi[k + 1]] += 1.0 - w
    return Lottery(probs=probs)


def base_lottery(env: OneDimEnv):
    """Best type-independent lottery: argmax alpha0 . q s.t. beta . q = 0."""
    envelope = dual_envelope(env)
    if envelope.vertex_x[0] > 1e-12 or envelope.vertex_x[-1] < -1e-12:
        raise DomainError("base_lottery: 0 outside the slope range "
                          "(null allocation missing?)")
    lot = lottery_at_slope(env, envelope, 0.0)
    value = float(envelope.h(0.0))
    if abs(value) <= 1e-12:
        # Tie toward the pure null allocation for reproducible menus.
        probs = np.zeros(env.m)
        probs[env.null_index] = 1.0
        lot = Lottery(probs=probs)
        value = 0.0
    return lot, value


# ---------------------------------------------------------------------------
# step indirect utilities


@dataclass(frozen=True)
class StepUtility:
    """Convex piecewise-linear indirect utility with min value 0.

    ``slopes`` has one more entry than ``breakpoints``; piece ``i``
    covers (breakpoints[i-1], breakpoints[i]]. The zero level sits on
    the piece whose slope is 0 (or at the support edge when every slope
    has the same sign).
    """

    slopes: np.ndarray
    breakpoints: np.ndarray
    anchor: float  # a type at which V = 0

    def __post_init__(self):
        s = np.atleast_1d(np.asarray(self.slopes, dtype=float))
        b = np.atleast_1d(np.asarray(self.breakpoints, dtype=float)) \
            if np.size(self.breakpoints) else np.array([])
        if s.shape[0] != b.shape[0] + 1:
            raise DomainError("StepUtility: need len(slopes) == len(breakpoints) + 1")
        if np.any(np.diff(s) < -1e-12):
            raise DomainError("StepUtility: slopes must be nondecreasing (convexity)")
        if b.size and np.any(np.diff(b) < -1e-12):
            raise DomainError("StepUtility: breakpoints must be nondecreasing")
        object.__setattr__(self, "slopes", s)
        object.__setattr__(self, "breakpoints", np.sort(b) if b.size else b)

    def value_at(self, tau):
        tau = np.asarray(tau, dtype=float)
        knots = np.concatenate(([self.anchor], self.breakpoints))
        knots = np.sort(knots)
        # integrate the slope step function from the anchor
        out = np.zeros(np.atleast_1d(tau).shape)
        flat_tau = np.atleast_1d(tau)
        for i, t in enumerate(flat_tau):
            lo, hi = (self.anchor, t) if t >= self.anchor else (t, self.anchor)
            sgn = 1.0 if t >= self.anchor else -1.0
            pts = np.concatenate(([lo], self.breakpoints[(self.breakpoints > lo)
                                                         & (self.breakpoints < hi)], [hi]))
            mids = 0.5 * (pts[1:] + pts[:-1])
            slopes = self.slopes[np.searchsorted(self.breakpoints, mids, side="left")]
            out[i] = sgn * float(np.sum(slopes * np.diff(pts)))
        out = np.maximum(out, 0.0)
        return float(out[0]) if tau.ndim == 0 else out.reshape(tau.shape)

    def slope_at(self, tau):
        tau = np.asarray(tau, dtype=float)
        idx = np.searchsorted(self.breakpoints, tau, side="left") \
            if self.breakpoints.size else np.zeros(np.shape(tau), dtype=int)
        out = self.slopes[idx]
        return float(out) if tau.ndim == 0 else out


def _anchor_piece(slopes: np.ndarray, support):
    """Index of the piece carrying the zero of V, plus its anchor mode.

    Returns (i0, mode) with mode 'flat' (slope zero on the piece),
    'lo' (all slopes positive; V zero at the support lower edge) or
    'hi' (all slopes negative; zero at the upper edge)."""
    zero = np.flatnonzero(np.abs(slopes) <= 1e-14)
    if zero.size:
        return int(zero[0]), "flat"
    if slopes[0] > 0.0:
        return 0, "lo"
    if slopes[-1] < 0.0:
        return len(slopes) - 1, "hi"
    # sign change without an exact zero slope: anchor at the breakpoint
    # between the last negative and first positive slope
    return int(np.flatnonzero(slopes > 0.0)[0]), "kink"


def _value_batch(env: OneDimEnv, envelope: PiecewiseLinearEnvelope,
                 slopes: np.ndarray, breaks: np.ndarray) -> np.ndarray:
    """Expected designer value of step utilities, vectorized over rows.

    ``breaks`` has shape (C, K-1) with rows sorted ascending; returns a
    length-C vector of E[H(V'(tau)) + tau V'(tau) - V(tau)].
    """
    breaks = np.atleast_2d(breaks)
    c, km1 = breaks.shape
    k = km1 + 1
    if k != slopes.shape[0]:
        raise DomainError("_value_batch: slopes/breaks shape mismatch")
    h_of_s = envelope.h(np.clip(slopes, envelope.vertex_x[0], envelope.vertex_x[-1]))
    h_of_s = np.atleast_1d(h_of_s)
    lo, hi = env.type_dist.support()
    i0, mode = _anchor_piece(slopes, (lo, hi))

    cdf = env.type_dist.cdf(breaks) if km1 else np.zeros((c, 0))
    cdf = np.atleast_2d(cdf)
    probs = np.diff(np.concatenate([np.zeros((c, 1)), cdf, np.ones((c, 1))], axis=1),
                    axis=1)

    # V at the interior boundaries, zero at/around the anchor piece.
    vb = np.zeros((c, km1))
    if mode == "lo":
        base = np.full(c, lo)  # V(lo) = 0
        run = slopes[0] * (breaks[:, 0] - base) if km1 else None
        if km1:
            vb[:, 0] = run
    elif mode == "hi":
        base = np.full(c, hi)
        if km1:
            vb[:, -1] = slopes[-1] * (breaks[:, -1] - base)
    # forward from the anchor piece
    if mode in ("flat", "kink", "lo"):
        start = i0 if mode != "lo" else 1
        for j in range(max(start, 1), km1):
            vb[:, j] = vb[:, j - 1] + slopes[j] * (breaks[:, j] - breaks[:, j - 1])
        if mode in ("flat", "kink") and i0 - 1 >= 0:
            # backward below the anchor
            for j in range(i0 - 1, 0, -1):
                vb[:, j - 1] = vb[:, j] - slopes[j] * (breaks[:, j] - breaks[:, j - 1])
    if mode == "hi":
        for j in range(km1 - 1, 0, -1):
            vb[:, j - 1] = vb[:, j] - slopes[j] * (breaks[:, j] - breaks[:, j - 1])

    # Per-piece constant tau * V'(tau) - V(tau), evaluated at a finite
    # reference point of each piece.
    value = np.zeros(c)
    for i in range(k):
        if i > i0 or (mode == "lo" and i > 0):
            ref = breaks[:, i - 1]
            vref = vb[:, i - 1]
        elif i < i0:
            ref = breaks[:, i]
            vref = vb[:, i]
        else:  # anchor piece
            if mode == "flat":
                value += probs[:, i] * h_of_s[i]
                continue
            if mode == "lo":
                ref = np.full(c, lo)
                vref = np.zeros(c)
            elif mode == "hi":
                ref = np.full(c, hi)
                vref = np.zeros(c)
            else:  # kink: V = 0 at breakpoint i0-1
                ref = breaks[:, i0 - 1] if i0 - 1 >= 0 else np.full(c, lo)
                vref = np.zeros(c)
        value += probs[:, i] * (h_of_s[i] + slopes[i] * ref - vref)
    return value


def value_from_indirect_utility(env: OneDimEnv, v: StepUtility) -> float:
    """Expected designer value E[H(V') + tau V' - V] of a step utility."""
    envelope = dual_envelope(env)
    lo_x, hi_x = envelope.vertex_x[0], envelope.vertex_x[-1]
    tol = 1e-9 * max(1.0, abs(lo_x), abs(hi_x))
    if np.any(v.slopes < lo_x - tol) or np.any(v.slopes > hi_x + tol):
        raise DomainError("value_from_indirect_utility: slope outside [beta_min, beta_max]")
    breaks = v.breakpoints.reshape(1, -1) if v.breakpoints.size \
        else np.zeros((1, 0))
    return float(_value_batch(env, envelope, v.slopes, breaks)[0])


# ---------------------------------------------------------------------------
# menus


MenuItem = tuple  # (allocation: int | Lottery, price: float)


def _menu_lines(env: OneDimEnv, menu: Sequence[MenuItem]):
    """Utility intercept/slope/price arrays of a menu, null option included."""
    a, b, t = [0.0], [0.0], [0.0]
    for alloc, price in menu:
        q = np.zeros(env.m)
        if isinstance(alloc, Lottery):
            q = alloc.probs
        else:
            q[int(alloc)] = 1.0
        a.append(float(env.alpha0 @ q - price))
        b.append(float(env.beta @ q))
        t.append(float(price))
    return np.array(a), np.array(b), np.array(t)


def upper_envelope_lines(intercepts, slopes):
    """Upper envelope of lines a + s*tau.

    Returns (boundaries, piece_ids): piece ``i`` (line piece_ids[i]) is
    maximal on (boundaries[i-1], boundaries[i]) with boundaries of
    length len(piece_ids) - 1, pieces ordered by increasing slope.
    """
    a = np.asarray(intercepts, dtype=float)
    s = np.asarray(slopes, dtype=float)
    order = np.lexsort((-a, s))
    ids = []
    bounds = []
    for j in order:
        while ids:
            if abs(s[j] - s[ids[-1]]) <= 1e-15 * max(1.0, abs(s[j])):
                break  # same slope, lower intercept: dominated
            # intersection with the current top line
            x = (a[ids[-1]] - a[j]) / (s[j] - s[ids[-1]])
            if bounds and x <= bounds[-1] + 0.0:
                ids.pop()
                bounds.pop()
                continue
            ids.append(j)
            bounds.append(x)
            break
        else:
            ids.append(j)
    return np.array(bounds), np.array(ids, dtype=int)


def menu_revenue(env: OneDimEnv, menu: Sequence[MenuItem]) -> float:
    """Expected revenue of a posted menu under the env's type law.

    The buyer best-responds (outside option included); indifferences are
    resolved toward the higher price.
    """
    a, b, t = _menu_lines(env, menu)
    if isinstance(env.type_dist, DiscreteTypeDist):
        pts = env.type_dist.points
        util = a[None, :] + pts[:, None] * b[None, :]
        best = util.max(axis=1)
        tie = util >= best[:, None] - 1e-12 * np.maximum(1.0, np.abs(best))[:, None]
        pick_t = np.where(tie, t[None, :], -np.inf).max(axis=1)
        return float(np.sum(env.type_dist.weights * pick_t))
    bounds, ids = upper_envelope_lines(a, b)
    cdf = env.type_dist.cdf(bounds) if bounds.size else np.array([])
    probs = np.diff(np.concatenate(([0.0], cdf, [1.0])))
    return float(np.sum(probs * t[ids]))


# ---------------------------------------------------------------------------
# optimal step mechanisms


@dataclass(frozen=True)
class SimpleMechanism:
    """Menu of deterministic allocations (plus at most the base lottery)
    with its convex step indirect utility."""

    menu: tuple
    indirect_utility: StepUtility
    converged: bool = True


def _reconstruct(env, envelope, slopes, breaks, value_terms_probs=None):
    """Menu (allocation, price) per positive-probability piece of V."""
    v = StepUtility(slopes=slopes, breakpoints=breaks,
                    anchor=_step_anchor(env, slopes, breaks))
    menu = []
    seen = set()
    for i, s in enumerate(slopes):
        lot = lottery_at_slope(env, envelope, float(s))
        if abs(s) <= 1e-14:
            lot, _ = base_lottery(env)
        sup = lot.support
        alloc = int(sup[0]) if sup.size == 1 else lot
        lo_b = breaks[i - 1] if i > 0 else None
        ref = lo_b if lo_b is not None else (breaks[i] if i < len(breaks) else v.anchor)
        price = float(envelope.h(np.clip(s, envelope.vertex_x[0], envelope.vertex_x[-1]))
                      + s * ref - v.value_at(ref))
        key = (alloc if isinstance(alloc, int) else "b0", round(price, 12))
        if key in seen:
            continue
        seen.add(key)
        menu.append((alloc, price))
    return SimpleMechanism(menu=tuple(menu), indirect_utility=v)


def _step_anchor(env, slopes, breaks):
    lo, hi = env.type_dist.support()
    i0, mode = _anchor_piece(np.asarray(slopes, dtype=float), (lo, hi))
    breaks = np.asarray(breaks, dtype=float)
    if mode == "lo":
        return lo
    if mode == "hi":
        return hi
    if mode == "kink":
        return float(breaks[i0 - 1]) if i0 - 1 >= 0 else lo
    # flat: any point of the zero-slope piece
    left = breaks[i0 - 1] if i0 - 1 >= 0 else lo
    right = breaks[i0] if i0 < len(breaks) else hi
    return float(0.5 * (left + right))


def optimal_simple_mechanism(env: OneDimEnv, seed_menu: Optional[Sequence[MenuItem]] = None,
                             *, n_random_starts: int = 5, rng_seed: int = 0,
                             max_refinements: int = 3):
    """Best mechanism over step indirect utilities.

    Slopes start from the hull vertex slopes plus 0; breakpoint
    locations are optimized by multi-start coordinate descent.
    Midpoint slopes (lotteries between hull allocations) are then
    inserted as long as they improve the value — on atomic type
    distributions intermediate lotteries can be strictly better. When a
    seed menu is supplied the reported value is floored at that menu's
    exact expected revenue. Returns (mechanism, value).
    """
    envelope = dual_envelope(env)
    lo, hi = env.type_dist.support()
    discrete = isinstance(env.type_dist, DiscreteTypeDist)
    rng = np.random.default_rng(rng_seed)

    # on atomic supports a break one ulp below the lowest atom puts every
    # type on the upper piece (the all-types-served menus)
    lo_s = np.nextafter(lo, -np.inf) if discrete else lo

    def solve(slopes):
        k = slopes.shape[0]

        def value_of(breaks_matrix):
            return _value_batch(env, envelope, slopes, breaks_matrix)

        def descend(breaks):
            breaks = np.clip(np.sort(np.asarray(breaks, dtype=float)), lo_s, hi)
            if k == 1:
                return breaks, float(value_of(breaks.reshape(1, 0))[0])
            best = float(value_of(breaks.reshape(1, -1))[0])
            for _ in range(80):
                improved = False
                for j in range(k - 1):
                    left = breaks[j - 1] if j > 0 else lo_s
                    right = breaks[j + 1] if j + 1 < k - 1 else hi
                    if discrete:
                        pts = env.type_dist.points
                        cands = pts[(pts >= left) & (pts <= right)]
                        # a breakpoint exactly at an atom excludes it from
                        # the upper piece; one ulp below includes it (the
                        # boundary type's tie broken toward the designer)
                        cands = np.unique(np.concatenate(
                            [cands, np.nextafter(cands, -np.inf),
                             [left, right, breaks[j]]]))
                        cands = cands[(cands >= left) & (cands <= right)]
                    else:
                        cands = np.array([breaks[j]])
                        a, b = left, right
                        for _ in range(4):
                            grid = np.linspace(a, b, 65)
                            cand = np.unique(np.concatenate([grid, cands]))
                            mat = np.repeat(breaks.reshape(1, -1), cand.size,
                                            axis=0)
                            mat[:, j] = cand
                            vals = value_of(mat)
                            kbest = int(np.argmax(vals))
                            lo_i = max(kbest - 1, 0)
                            hi_i = min(kbest + 1, cand.size - 1)
                            a, b = cand[lo_i], cand[hi_i]
                            cands = np.array([cand[kbest]])
                        cands = np.unique(np.concatenate([cands, [breaks[j]]]))
                    mat = np.repeat(breaks.reshape(1, -1), cands.size, axis=0)
                    mat[:, j] = cands
                    vals = value_of(mat)
                    kbest = int(np.argmax(vals))
                    if vals[kbest] > best + 1e-14 * max(1.0, abs(best)):
                        best = float(vals[kbest])
                        breaks = mat[kbest].copy()
                        breaks = np.sort(breaks)
                        improved = True
                if not improved:
                    break
            return breaks, best

        starts = [np.linspace(lo, hi, k + 1)[1:-1] if k > 1 else np.zeros(0)]
        mid = 0.5 * (lo + hi)
        starts.append(np.full(max(k - 1, 0), mid))
        if seed_menu is not None and k > 1:
            starts.append(_seed_breaks(env, seed_menu, slopes, lo, hi))
        for _ in range(n_random_starts):
            starts.append(np.sort(rng.uniform(lo, hi, size=max(k - 1, 0))))

        best_breaks, best_val = None, -np.inf
        for s0 in starts:
            br, val = descend(s0)
            if val > best_val:
                best_breaks, best_val = br, val
        return best_breaks, best_val

    def collapse(slopes):
        slopes = np.sort(np.unique(slopes))
        keep = [slopes[0]]
        for s in slopes[1:]:
            if s - keep[-1] > 1e-13 * max(1.0, abs(s)):
                keep.append(s)
        return np.array(keep)

    slopes = collapse(np.concatenate([envelope.vertex_x, [0.0]]))
    best_breaks, best_val = solve(slopes)
    for _ in range(max_refinements):
        refined = collapse(np.concatenate(
            [slopes, 0.5 * (slopes[:-1] + slopes[1:])]))
        if refined.shape == slopes.shape:
            break
        br, val = solve(refined)
        if val <= best_val + 1e-9 * max(1.0, abs(best_val)):
            break
        slopes, best_breaks, best_val = refined, br, val

    mech = _reconstruct(env, envelope, slopes, np.asarray(best_breaks, dtype=float))
    converged = True
    if seed_menu is not None:
        floor = menu_revenue(env, seed_menu)
        if floor > best_val:
            # stagnation counts only when the seed wins by a real margin
            converged = floor <= best_val + 1e-9 * max(1.0, abs(floor))
            best_val = floor
            mech = SimpleMechanism(menu=tuple(seed_menu),
                                   indirect_utility=mech.indirect_utility,
                                   converged=converged)
    return mech, float(best_val)


def _seed_breaks(env, seed_menu, slopes, lo, hi):
    """Breakpoint initialization from a menu's indirect utility."""
    a, b, _ = _menu_lines(env, seed_menu)
    bounds, ids = upper_envelope_lines(a, b)
    # derivative of the menu's V as a step function over tau
    breaks = np.zeros(len(slopes) - 1)
    for j in range(len(slopes) - 1):
        target = 0.5 * (slopes[j] + slopes[j + 1])
        # first boundary after which the menu slope exceeds target
        pos = hi
        for i, line in enumerate(ids):
            if b[line] > target:
                pos = bounds[i - 1] if i > 0 else lo
                break
        breaks[j] = min(max(pos, lo), hi)
    return np.sort(breaks)


def audit_ic_ir(env: OneDimEnv, mechanism: SimpleMechanism, taus) -> float:
    """Worst IC/IR violation of a mechanism's menu on an audit grid.

    For each audit type, the utility of the piece assigned by the
    indirect utility must be within tolerance of the best menu utility,
    and nonnegative. Returns the maximum violation (0 if none).
    """
    taus = np.asarray(taus, dtype=float)
    a, b, t = _menu_lines(env, mechanism.menu)
    util = a[None, :] + taus[:, None] * b[None, :]
    best = util.max(axis=1)
    v = mechanism.indirect_utility.value_at(taus)
    ic = np.max(np.abs(best - np.maximum(v, 0.0)))
    ir = max(0.0, float(-best.min()))
    return float(max(ic, ir))


# ---------------------------------------------------------------------------
# discrete LP oracle


def discrete_lp_oracle(env: OneDimEnv, points, weights, *, tol: float = 1e-9) -> float:
    """Exact optimum of the finite-type screening LP.

    Variables are a lottery q(tau) and transfer t(tau) per grid type;
    constraints are IR everywhere and IC (initially adjacent pairs only,
    then a full pairwise audit with cutting-plane re-solves). Maximizes
    expected transfers.
    """
    from scipy.optimize import linprog
    from scipy.sparse import lil_matrix

    pts = np.atleast_1d(np.asarray(points, dtype=float))
    w = np.atleast_1d(np.asarray(weights, dtype=float))
    if pts.shape != w.shape or np.any(w < 0) or abs(w.sum() - 1.0) > 1e-8:
        raise DomainError("discrete_lp_oracle: weights must be a probability vector")
    order = np.argsort(pts)
    pts, w = pts[order], w[order]
    n, m = pts.shape[0], env.m
    alpha = env.alpha0[None, :] + pts[:, None] * env.beta[None, :]  # (n, m)

    nvar = n * m + n

    def qcols(j):
        return slice(j * m, (j + 1) * m)

    c = np.zeros(nvar)
    c[n * m:] = -w  # maximize sum w t

    a_eq = lil_matrix((n, nvar))
    for j in range(n):
        a_eq[j, qcols(j)] = 1.0
    b_eq = np.ones(n)

    pairs = [(j, j + 1) for j in range(n - 1)] + [(j + 1, j) for j in range(n - 1)]

    def build_ub(pair_list):
        rows = len(pair_list) + n
        a_ub = lil_matrix((rows, nvar))
        b_ub = np.zeros(rows)
        for r, (j, jp) in enumerate(pair_list):
            # alpha_j . q_j - t_j >= alpha_j . q_jp - t_jp
            a_ub[r, qcols(j)] = -alpha[j]
            a_ub[r, n * m + j] = 1.0
            a_ub[r, qcols(jp)] = alpha[j]
            a_ub[r, n * m + jp] = -1.0
        for j in range(n):  # IR
            a_ub[len(pair_list) + j, qcols(j)] = -alpha[j]
            a_ub[len(pair_list) + j, n * m + j] = 1.0
        return a_ub.tocsr(), b_ub

    bounds = [(0.0, 1.0)] * (n * m) + [(None, None)] * n
    scale = max(1.0, np.abs(alpha).max())
    for _ in range(12):
        a_ub, b_ub = build_ub(pairs)
        res = linprog(c, A_ub=a_ub, b_ub=b_ub, A_eq=a_eq, b_eq=b_eq,
                      bounds=bounds, method="highs")
        if not res.success:
            raise NumericError(f"discrete_lp_oracle: LP solver failed ({res.message})")
        q = res.x[: n * m].reshape(n, m)
        t = res.x[n * m:]
        own = np.einsum("jm,jm->j", alpha, q) - t
        cross = alpha @ q.T - t[None, :]  # (j, jp): type j taking jp's item
        viol = cross - own[:, None]
        worst = np.unravel_index(np.argmax(viol), viol.shape)
        if viol[worst] <= tol * scale:
            return float(-res.fun)
        # add the most violated constraints per misreporting type
        extra = set(pairs)
        for j in range(n):
            jp = int(np.argmax(viol[j]))
            if viol[j, jp] > tol * scale:
                extra.add((j, jp))
        pairs = sorted(extra)
    raise NumericError("discrete_lp_oracle: cutting-plane loop did not close")
