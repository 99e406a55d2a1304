"""Signal models: conditional densities, Fisher information, sampling, MLE.

Two model variants are supported:

* ``GaussianLocation(cov)`` — signals x ~ N(theta, cov);
* ``LogisticPurchase(beta, ref_prices)`` — per-good purchase indicators
  with P(x_g = 1) = logistic(beta * (theta_g - ref_price_g)).

Both have concave log-likelihoods, so the box-constrained MLE computed
by projected Newton is globally optimal.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Union

import numpy as np
from scipy import linalg

from .gauss import DomainError, check_spd


@dataclass(frozen=True)
class GaussianLocation:
    """Signals are theta plus centered Gaussian noise with known covariance."""

    cov: np.ndarray

    def __post_init__(self):
        cov = check_spd(self.cov, "GaussianLocation.cov")
        object.__setattr__(self, "cov", cov)
        object.__setattr__(self, "_prec", linalg.inv(cov))

    @property
    def dim(self) -> int:
        return self.cov.shape[0]

    @property
    def precision(self) -> np.ndarray:
        return self._prec


@dataclass(frozen=True)
class LogisticPurchase:
    """Independent Bernoulli purchase indicators at fixed reference prices."""

    beta: float
    ref_prices: np.ndarray

    def __post_init__(self):
        if not (math.isfinite(self.beta) and self.beta > 0.0):
            raise DomainError("LogisticPurchase: beta must be positive")
        prices = np.atleast_1d(np.asarray(self.ref_prices, dtype=float))
        if prices.ndim != 1 or not np.all(np.isfinite(prices)) or np.any(prices <= 0.0):
            raise DomainError("LogisticPurchase: ref_prices must be positive reals")
        object.__setattr__(self, "ref_prices", prices)

    @property
    def dim(self) -> int:
        return self.ref_prices.shape[0]

    def purchase_prob(self, theta) -> np.ndarray:
        """P(x_g = 1 | theta) per good."""
        theta = np.asarray(theta, dtype=float)
        from scipy.special import expit
        return expit(self.beta * (theta - self.ref_prices))


SignalModel = Union[GaussianLocation, LogisticPurchase]


@dataclass(frozen=True)
class SignalDataset:
    """An i.i.d. batch of signal records, one row per draw."""

    records: np.ndarray

    def __post_init__(self):
        rec = np.atleast_2d(np.asarray(self.records, dtype=float))
        if rec.shape[0] < 1:
            raise DomainError("SignalDataset: need at least one record")
        object.__setattr__(self, "records", rec)

    @property
    def n(self) -> int:
        return self.records.shape[0]

    @property
    def dim(self) -> int:
        return self.records.shape[1]

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow([f"x{g}" for g in range(self.dim)])
            for row in self.records:
                writer.writerow([f"{v:.17g}" for v in row])

    @classmethod
    def from_csv(cls, path) -> "SignalDataset":
        data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
        return cls(records=data)


@dataclass(frozen=True)
class FisherMatrix:
    """Information matrix: expected ('exact') or sample ('empirical')
    negative Hessian of the log signal density."""

    matrix: np.ndarray
    kind: str

    def __post_init__(self):
        mat = np.asarray(self.matrix, dtype=float)
        if self.kind not in ("exact", "empirical"):
            raise DomainError("FisherMatrix: kind must be 'exact' or 'empirical'")
        if not np.allclose(mat, mat.T, rtol=0.0, atol=1e-10 * max(1.0, np.abs(mat).max())):
            raise DomainError("FisherMatrix: matrix must be symmetric")
        if self.kind == "exact":
            check_spd(mat, "FisherMatrix(exact)")
        object.__setattr__(self, "matrix", mat)


def _check_theta(model: SignalModel, theta) -> np.ndarray:
    theta = np.atleast_1d(np.asarray(theta, dtype=float))
    if theta.shape[0] != model.dim:
        raise DomainError("theta dimension does not match the model")
    if not np.all(np.isfinite(theta)):
        raise DomainError("theta must be finite")
    return theta


def log_density(model: SignalModel, x, theta) -> float:
    """Log density of one signal record given theta."""
    theta = _check_theta(model, theta)
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if x.shape[0] != model.dim:
        raise DomainError("log_density: signal dimension mismatch")
    if isinstance(model, GaussianLocation):
        diff = x - theta
        _, logdet = np.linalg.slogdet(model.cov)
        return float(-0.5 * (diff @ model.precision @ diff)
                     - 0.5 * (model.dim * math.log(2.0 * math.pi) + logdet))
    # Logistic purchase: per good, log(p) if bought else log(1 - p),
    # written via log(1 + e^t) = logaddexp(0, t) for stability.
    t = model.beta * (theta - model.ref_prices)
    return float(np.sum(x * t - np.logaddexp(0.0, t)))


def fisher(model: SignalModel, theta) -> FisherMatrix:
    """Exact Fisher information at theta."""
    theta = _check_theta(model, theta)
    if isinstance(model, GaussianLocation):
        return FisherMatrix(matrix=model.precision.copy(), kind="exact")
    p = model.purchase_prob(theta)
    return FisherMatrix(matrix=np.diag(model.beta ** 2 * p * (1.0 - p)), kind="exact")


def empirical_fisher(model: SignalModel, data: SignalDataset, theta) -> FisherMatrix:
    """Sample average of negative log-density Hessians at theta.

    Both variants have record-independent Hessians, so this coincides
    with the exact Fisher matrix evaluated at the same theta; it is kept
    separate because downstream pricing is defined in terms of the
    sample quantity.
    """
    theta = _check_theta(model, theta)
    if data.n < 1:
        raise DomainError("empirical_fisher: empty dataset")
    if data.dim != model.dim:
        raise DomainError("empirical_fisher: dataset dimension mismatch")
    if isinstance(model, GaussianLocation):
        return FisherMatrix(matrix=model.precision.copy(), kind="empirical")
    p = model.purchase_prob(theta)
    return FisherMatrix(matrix=np.diag(model.beta ** 2 * p * (1.0 - p)), kind="empirical")


def sample(model: SignalModel, theta, n: int, seed: int) -> SignalDataset:
    """Draw n i.i.d. signal records; deterministic given seed."""
    theta = _check_theta(model, theta)
    if n < 1:
        raise DomainError("sample: n must be >= 1")
    rng = np.random.default_rng(seed)
    if isinstance(model, GaussianLocation):
        records = rng.multivariate_normal(theta, model.cov, size=n,
                                          method="cholesky")
    else:
        p = model.purchase_prob(theta)
        records = (rng.random((n, model.dim)) < p).astype(float)
    return SignalDataset(records=records)


@dataclass(frozen=True)
class Box:
    """Axis-aligned compact rectangle of admissible valuations."""

    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        lo = np.atleast_1d(np.asarray(self.lower, dtype=float))
        hi = np.atleast_1d(np.asarray(self.upper, dtype=float))
        if lo.shape != hi.shape or np.any(lo > hi):
            raise DomainError("Box: lower must be <= upper componentwise")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    def clip(self, theta) -> np.ndarray:
        return np.clip(theta, self.lower, self.upper)

    def inflate(self, frac: float) -> "Box":
        pad = frac * (self.upper - self.lower)
        return Box(lower=self.lower - pad, upper=self.upper + pad)


class EstimationError(RuntimeError):
    """MLE iteration cap reached; carries the best iterate found."""

    def __init__(self, message, best_iterate):
        super().__init__(message)
        self.best_iterate = best_iterate


def _loglik_grad_hess(model: SignalModel, data: SignalDataset, theta):
    if isinstance(model, GaussianLocation):
        xbar = data.records.mean(axis=0)
        prec = model.precision
        diffs = data.records - theta
        ll = -0.5 * float(np.einsum("ij,jk,ik->", diffs, prec, diffs))
        grad = data.n * (prec @ (xbar - theta))
        hess = -data.n * prec
        return ll, grad, hess
    q = data.records.mean(axis=0)
    t = model.beta * (theta - model.ref_prices)
    from scipy.special import expit
    p = expit(t)
    ll = data.n * float(np.sum(q * t - np.logaddexp(0.0, t)))
    grad = data.n * model.beta * (q - p)
    hess = -data.n * np.diag(model.beta ** 2 * p * (1.0 - p))
    return ll, grad, hess


def mle(model: SignalModel, data: SignalDataset, box: Box, *,
        max_iter: int = 200) -> np.ndarray:
    """Box-constrained maximum-likelihood estimate.

    Projected Newton with backtracking; the log-likelihood is concave
    for both model variants, so the returned point is the global
    constrained optimum up to the iteration tolerance.
    """
    if data.dim != model.dim or box.lower.shape[0] != model.dim:
        raise DomainError("mle: dimension mismatch")
    theta = box.clip(0.5 * (box.lower + box.upper))
    if isinstance(model, GaussianLocation):
        theta = box.clip(data.records.mean(axis=0))
    ll, grad, hess = _loglik_grad_hess(model, data, theta)
    for _ in range(max_iter):
        # Newton direction, regularized if the Hessian is near-singular
        # (logistic with frequencies at 0/1 flattens out).
        h = -hess + 1e-12 * data.n * np.eye(model.dim)
        step = linalg.solve(h, grad, assume_a="pos")
        t = 1.0
        improved = False
        for _ in range(60):
            cand = box.clip(theta + t * step)
            ll_new = _loglik_grad_hess(model, data, cand)[0]
            if ll_new >= ll - 1e-14 * max(1.0, abs(ll)):
                improved = ll_new > ll
                theta, ll = cand, ll_new
                break
            t *= 0.5
        _, grad, hess = _loglik_grad_hess(model, data, theta)
        # Projected-gradient optimality: zero out components pushing
        # outside the box at its faces.
        pg = grad.copy()
        at_lo = theta <= box.lower + 1e-14
        at_hi = theta >= box.upper - 1e-14
        pg[at_lo & (pg < 0.0)] = 0.0
        pg[at_hi & (pg > 0.0)] = 0.0
        # With concavity, a small projected gradient certifies
        # near-optimality of the constrained problem.
        if np.linalg.norm(pg) <= 1e-8 or (not improved and np.linalg.norm(pg) <= 1e-7):
            return theta
    raise EstimationError("mle: iteration cap reached", theta)
