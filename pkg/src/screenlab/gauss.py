"""Gaussian primitives.

Scalar normal cdf/pdf helpers, the bundle rate coefficient
``lambda_coeff`` (posterior standard deviation of a bundle's valuation,
scaled by sqrt(n)), quadrature nodes for standard-normal expectations,
and the conditional decomposition of a multivariate normal onto the
family of line segments parallel to ``cov @ 1``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import linalg, special


class DomainError(ValueError):
    """Raised when an input violates a documented precondition."""


class NumericError(RuntimeError):
    """Raised when a numerical routine fails to reach its tolerance."""


def std_normal_cdf(z):
    """Standard normal cdf, accurate in the far left tail.

    Accepts scalars or arrays; rejects non-finite input.
    """
    z = np.asarray(z, dtype=float)
    if not np.all(np.isfinite(z)):
        raise DomainError("std_normal_cdf: input must be finite")
    out = special.ndtr(z)
    return float(out) if out.ndim == 0 else out


def std_normal_log_cdf(z):
    """log of the standard normal cdf (usable down to z ~ -1e4)."""
    z = np.asarray(z, dtype=float)
    if not np.all(np.isfinite(z)):
        raise DomainError("std_normal_log_cdf: input must be finite")
    out = special.log_ndtr(z)
    return float(out) if out.ndim == 0 else out


def std_normal_pdf(z):
    z = np.asarray(z, dtype=float)
    out = np.exp(-0.5 * z * z) / np.sqrt(2.0 * np.pi)
    return float(out) if out.ndim == 0 else out


def _as_square(mat, name):
    mat = np.asarray(mat, dtype=float)
    if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
        raise DomainError(f"{name}: expected a square matrix, got shape {mat.shape}")
    if not np.all(np.isfinite(mat)):
        raise DomainError(f"{name}: matrix entries must be finite")
    return mat


def check_spd(mat, name="matrix"):
    """Validate symmetry and strict positive definiteness.

    Eigenvalues below ``1e-12 * trace`` count as degenerate and are
    rejected rather than regularized.
    """
    mat = _as_square(mat, name)
    if not np.allclose(mat, mat.T, rtol=0.0, atol=1e-10 * max(1.0, np.abs(mat).max())):
        raise DomainError(f"{name}: matrix is not symmetric")
    eigvals = linalg.eigvalsh(mat)
    if eigvals[0] <= 1e-12 * np.trace(mat):
        raise DomainError(f"{name}: matrix is not positive definite "
                          f"(min eigenvalue {eigvals[0]:.3e})")
    return mat


@dataclass(frozen=True)
class GaussianBelief:
    """Multivariate normal belief over valuations: mean and covariance."""

    mean: np.ndarray
    cov: np.ndarray

    def __post_init__(self):
        mean = np.atleast_1d(np.asarray(self.mean, dtype=float))
        cov = _as_square(self.cov, "GaussianBelief.cov")
        if mean.shape[0] != cov.shape[0]:
            raise DomainError("GaussianBelief: mean and cov dimensions disagree")
        if not np.allclose(cov, cov.T, rtol=0.0,
                           atol=1e-10 * max(1.0, np.abs(cov).max())):
            raise DomainError("GaussianBelief: cov is not symmetric")
        eigvals = linalg.eigvalsh(cov)
        if eigvals[0] < -1e-10 * max(np.trace(cov), 1e-300):
            raise DomainError("GaussianBelief: cov is not positive semidefinite")
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "cov", cov)

    @property
    def dim(self) -> int:
        return self.mean.shape[0]


def lambda_coeff(bundle_indicator, inv_fisher) -> float:
    """sqrt(1_B' J 1_B): the rate coefficient of bundle B under J.

    ``bundle_indicator`` is a 0/1 vector selecting the goods in the
    bundle; ``inv_fisher`` must be symmetric positive definite.
    """
    ind = np.asarray(bundle_indicator, dtype=float)
    if ind.ndim != 1:
        raise DomainError("lambda_coeff: indicator must be a vector")
    if not np.all((ind == 0.0) | (ind == 1.0)):
        raise DomainError("lambda_coeff: indicator entries must be 0 or 1")
    j = check_spd(inv_fisher, "lambda_coeff.inv_fisher")
    if j.shape[0] != ind.shape[0]:
        raise DomainError("lambda_coeff: dimension mismatch")
    return float(np.sqrt(ind @ j @ ind))


@dataclass(frozen=True)
class SegmentDecomposition:
    """Conditional decomposition of N(mean, cov) onto lines along cov @ 1.

    ``a_matrix`` has orthonormal rows spanning the complement of the
    direction ``cov @ 1``; conditioning on z = A theta leaves a
    one-dimensional law supported on the line through ``y_hat(z)`` with
    direction ``direction``.
    """

    a_matrix: np.ndarray
    b_matrix: np.ndarray
    cond_cov: np.ndarray
    direction: np.ndarray
    z_mean: np.ndarray
    z_cov: np.ndarray
    mean: np.ndarray = field(repr=False, default=None)

    @property
    def dim(self) -> int:
        return self.a_matrix.shape[1]

    def y_hat(self, z) -> np.ndarray:
        """Conditional mean of theta given A theta = z."""
        z = np.atleast_1d(np.asarray(z, dtype=float))
        return self.mean + self.b_matrix @ (z - self.z_mean)

    @property
    def tau_var(self) -> float:
        """Variance of the segment coordinate tau in theta = y_hat(z) + tau * direction."""
        d = self.direction
        ones = np.ones(self.dim)
        denom = float(ones @ d) ** 2
        if denom <= 0.0:
            raise NumericError("SegmentDecomposition: degenerate direction")
        return float(ones @ self.cond_cov @ ones) / denom


def make_segments(cov, mean=None) -> SegmentDecomposition:
    """Build the line-segment conditional decomposition for an SPD covariance."""
    cov = check_spd(cov, "make_segments.cov")
    m = cov.shape[0]
    if m < 2:
        raise DomainError("make_segments: dimension must be >= 2")
    if mean is None:
        mean = np.zeros(m)
    mean = np.atleast_1d(np.asarray(mean, dtype=float))
    if mean.shape[0] != m:
        raise DomainError("make_segments: mean dimension mismatch")

    direction = cov @ np.ones(m)
    # Orthonormal complement of the direction; SPD cov guarantees
    # direction != 0 because 1' cov 1 > 0.
    a_matrix = linalg.null_space(direction.reshape(1, -1)).T
    if a_matrix.shape != (m - 1, m):
        raise NumericError("make_segments: complement basis has wrong rank")

    mid = a_matrix @ cov @ a_matrix.T
    try:
        mid_inv = linalg.inv(mid)
    except linalg.LinAlgError as exc:  # pragma: no cover - cannot occur for SPD cov
        raise NumericError("make_segments: singular A cov A'") from exc
    b_matrix = cov @ a_matrix.T @ mid_inv
    cond_cov = cov - b_matrix @ a_matrix @ cov
    return SegmentDecomposition(
        a_matrix=a_matrix,
        b_matrix=b_matrix,
        cond_cov=cond_cov,
        direction=direction,
        z_mean=a_matrix @ mean,
        z_cov=mid,
        mean=mean,
    )


def gauss_hermite(order: int):
    """Nodes and weights for expectations against the standard normal.

    Weights sum to 1; a polynomial of degree <= 2*order - 1 integrates
    exactly.
    """
    if not isinstance(order, (int, np.integer)) or isinstance(order, bool):
        raise DomainError("gauss_hermite: order must be an integer")
    if order < 1 or order > 200:
        raise DomainError("gauss_hermite: order must be in [1, 200]")
    nodes, weights = np.polynomial.hermite_e.hermegauss(int(order))
    weights = weights / weights.sum()
    return nodes, weights


def gauss_hermite_multivariate(order: int, mean, cov):
    """Tensor-product nodes/weights for E[f(X)], X ~ N(mean, cov).

    Returns nodes of shape (order**d, d) and weights summing to 1.
    """
    mean = np.atleast_1d(np.asarray(mean, dtype=float))
    cov = check_spd(cov, "gauss_hermite_multivariate.cov")
    d = mean.shape[0]
    nodes1, weights1 = gauss_hermite(order)
    grids = np.meshgrid(*([nodes1] * d), indexing="ij")
    pts = np.stack([g.ravel() for g in grids], axis=-1)
    wgrids = np.meshgrid(*([weights1] * d), indexing="ij")
    weights = np.ones(pts.shape[0])
    for w in wgrids:
        weights = weights * w.ravel()
    chol = linalg.cholesky(cov, lower=True)
    return mean + pts @ chol.T, weights
