"""Dense Gaussian primitives for small state and measurement spaces.

Everything here is a pure function of its inputs. Covariances are factored
with a Cholesky decomposition; a factorization that fails is retried once
with ``JITTER`` added to the diagonal before giving up.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_triangular

from .errors import DimensionError, SingularCovariance

JITTER = 1e-9
LOG_2PI = math.log(2.0 * math.pi)


@dataclass(frozen=True)
class GaussianBelief:
    """N(mean, cov) over a target state."""

    mean: np.ndarray
    cov: np.ndarray

    def __post_init__(self):
        mean = np.atleast_1d(np.asarray(self.mean, dtype=np.float64))
        cov = np.atleast_2d(np.asarray(self.cov, dtype=np.float64))
        if mean.ndim != 1 or cov.shape != (mean.size, mean.size):
            raise DimensionError(f"mean {mean.shape} and cov {cov.shape} disagree")
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "cov", cov)

    @property
    def dim(self) -> int:
        return self.mean.size

    def marginal(self, idx) -> "GaussianBelief":
        idx = np.asarray(idx)
        return GaussianBelief(self.mean[idx], self.cov[np.ix_(idx, idx)])


def cholesky(cov, jitter: float = JITTER) -> np.ndarray:
    """Lower Cholesky factor of ``cov``, retrying with diagonal jitter."""
    cov = np.atleast_2d(np.asarray(cov, dtype=np.float64))
    try:
        return np.linalg.cholesky(cov)
    except np.linalg.LinAlgError:
        pass
    if jitter > 0:
        try:
            return np.linalg.cholesky(cov + jitter * np.eye(cov.shape[0]))
        except np.linalg.LinAlgError:
            pass
    raise SingularCovariance(f"covariance is not positive definite:\n{cov}")


def logdet(cov, jitter: float = JITTER) -> float:
    L = cholesky(cov, jitter)
    return 2.0 * float(np.sum(np.log(np.diag(L))))


def _whiten(d, L):
    # L^{-1} d for a single vector (m,) or a batch (n, m)
    d = np.asarray(d, dtype=np.float64)
    if d.ndim == 1:
        return solve_triangular(L, d, lower=True)
    return solve_triangular(L, d.T, lower=True).T


def mahalanobis(d, cov, jitter: float = JITTER):
    """sqrt(d^T cov^{-1} d); ``d`` may be a batch of row vectors."""
    d = np.atleast_1d(np.asarray(d, dtype=np.float64))
    L = cholesky(cov, jitter)
    if d.shape[-1] != L.shape[0]:
        raise DimensionError(f"vector of length {d.shape[-1]} against {L.shape[0]}-dim covariance")
    z = _whiten(d, L)
    return np.sqrt(np.sum(z * z, axis=-1)) if z.ndim > 1 else float(np.sqrt(z @ z))


def log_pdf(x, b: GaussianBelief, jitter: float = JITTER):
    """Log density of ``b`` at ``x`` (a point or an (n, m) batch)."""
    x = np.atleast_1d(np.asarray(x, dtype=np.float64))
    if x.shape[-1] != b.dim:
        raise DimensionError(f"point of length {x.shape[-1]} against {b.dim}-dim belief")
    L = cholesky(b.cov, jitter)
    z = _whiten(x - b.mean, L)
    half_logdet = float(np.sum(np.log(np.diag(L))))
    quad = np.sum(z * z, axis=-1)
    out = -0.5 * (b.dim * LOG_2PI + quad) - half_logdet
    return out if np.ndim(out) else float(out)


def pdf(x, b: GaussianBelief, jitter: float = JITTER):
    return np.exp(log_pdf(x, b, jitter))


def sample(b: GaussianBelief, rng: np.random.Generator, size=None, jitter: float = JITTER):
    """Draw ``mean + L z``. With ``jitter=0`` a zero covariance yields the mean."""
    if jitter == 0 and not np.any(b.cov):
        L = np.zeros_like(b.cov)
    else:
        L = cholesky(b.cov, jitter)
    if size is None:
        return b.mean + L @ rng.standard_normal(b.dim)
    z = rng.standard_normal((size, b.dim))
    return b.mean + z @ L.T


def kl_divergence(a: GaussianBelief, b: GaussianBelief, jitter: float = JITTER) -> float:
    """KL(a || b) in closed form."""
    if a.dim != b.dim:
        raise DimensionError(f"dimension mismatch {a.dim} vs {b.dim}")
    Lb = cholesky(b.cov, jitter)
    La = cholesky(a.cov, jitter)
    M = solve_triangular(Lb, La, lower=True)
    z = solve_triangular(Lb, b.mean - a.mean, lower=True)
    ld_a = 2.0 * np.sum(np.log(np.diag(La)))
    ld_b = 2.0 * np.sum(np.log(np.diag(Lb)))
    return float(0.5 * (np.sum(M * M) + z @ z - a.dim + ld_b - ld_a))


def moment_match(a: GaussianBelief, b: GaussianBelief) -> GaussianBelief:
    """Single Gaussian with the first two moments of the mixture 0.5a + 0.5b."""
    delta = a.mean - b.mean
    mean = 0.5 * (a.mean + b.mean)
    cov = 0.5 * (a.cov + b.cov) + 0.25 * np.outer(delta, delta)
    return GaussianBelief(mean, 0.5 * (cov + cov.T))


def js_divergence(
    a: GaussianBelief,
    b: GaussianBelief,
    method: str = "moment_matched",
    n: int = 10_000,
    seed: int = 0,
) -> float:
    """Jensen-Shannon divergence between two Gaussian beliefs.

    ``moment_matched`` replaces the equal-weight mixture by its moment-matched
    Gaussian, which is deterministic and closed form but no longer bounded by
    ln 2. ``monte_carlo`` estimates the true divergence from ``n`` seeded
    draws per component.
    """
    if a.dim != b.dim:
        raise DimensionError(f"dimension mismatch {a.dim} vs {b.dim}")
    if method == "moment_matched":
        m = moment_match(a, b)
        return 0.5 * kl_divergence(a, m) + 0.5 * kl_divergence(b, m)
    if method == "monte_carlo":
        rng = np.random.default_rng(seed)
        total = 0.0
        for p, q in ((a, b), (b, a)):
            xs = sample(p, rng, size=n)
            lp = log_pdf(xs, p)
            lq = log_pdf(xs, q)
            lm = np.logaddexp(lp, lq) - math.log(2.0)
            total += 0.5 * float(np.mean(lp - lm))
        return total
    raise ValueError(f"unknown JSD method {method!r}")
