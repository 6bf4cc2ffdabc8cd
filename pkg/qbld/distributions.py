"""Kernels for every law the QBLD samplers touch.

Asymmetric Laplace AL(mu, sigma, p), univariate truncated normal, GIG with index
1/2, inverse gamma and multivariate normal. All functions broadcast over numpy
arrays; the samplers take a `RandomStream` explicitly.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Tuple, Union

import numpy as np
from scipy import special

from .errors import DomainError, NumericalError
from .rng import RandomStream

ArrayLike = Union[float, np.ndarray]

# standardized lower bound above which the truncated normal switches to
# exponential-proposal rejection
TAIL_SWITCH = 5.0
LAMBDA_FLOOR = 1e-12


def validate_quantile(p: float, name: str = "p") -> float:
    p = float(p)
    if not (0.0 < p < 1.0) or math.isnan(p):
        raise DomainError(f"{name} must lie in the open interval (0, 1), got {p}")
    return p


@dataclass(frozen=True)
class MixtureConstants:
    theta: float
    tau: float

    @property
    def tau2(self) -> float:
        return self.tau * self.tau


@dataclass(frozen=True)
class AlParams:
    mu: float = 0.0
    sigma: float = 1.0
    p: float = 0.5

    def __post_init__(self):
        validate_quantile(self.p)
        if not self.sigma > 0:
            raise DomainError(f"sigma must be > 0, got {self.sigma}")

    @property
    def mean(self) -> float:
        p = self.p
        return self.mu + self.sigma * (1 - 2 * p) / (p * (1 - p))

    @property
    def variance(self) -> float:
        p = self.p
        return self.sigma ** 2 * (1 - 2 * p + 2 * p * p) / (p * p * (1 - p) ** 2)


def mixture_constants(p: float) -> MixtureConstants:
    p = validate_quantile(p)
    return MixtureConstants(
        theta=(1 - 2 * p) / (p * (1 - p)),
        tau=math.sqrt(2 / (p * (1 - p))),
    )


# ---------------- asymmetric Laplace

def check_loss(u: ArrayLike, p: float) -> ArrayLike:
    """rho_p(u) = u * (p - 1{u < 0})."""
    p = validate_quantile(p)
    u = np.asarray(u, dtype=float)
    out = u * (p - (u < 0))
    return out if out.ndim else float(out)


def al_log_density(y: ArrayLike, params: AlParams) -> ArrayLike:
    p, sigma = params.p, params.sigma
    u = (np.asarray(y, dtype=float) - params.mu) / sigma
    out = math.log(p * (1 - p) / sigma) - u * (p - (u < 0))
    return out if np.ndim(out) else float(out)


def al_density(y: ArrayLike, params: AlParams) -> ArrayLike:
    out = np.exp(al_log_density(y, params))
    return out if np.ndim(out) else float(out)


def al_cdf(y: ArrayLike, params: AlParams) -> ArrayLike:
    p, sigma = params.p, params.sigma
    u = (np.asarray(y, dtype=float) - params.mu) / sigma
    # evaluate each branch only where it applies, so exp never overflows
    left = p * np.exp((1 - p) * np.minimum(u, 0.0))
    right = 1.0 - (1 - p) * np.exp(-p * np.maximum(u, 0.0))
    out = np.where(u <= 0, left, right)
    return out if out.ndim else float(out)


def al_quantile(q: ArrayLike, params: AlParams) -> ArrayLike:
    p, sigma = params.p, params.sigma
    q = np.asarray(q, dtype=float)
    if np.any(~((q > 0) & (q < 1))):
        raise DomainError("quantile argument must lie in (0, 1)")
    qs = np.minimum(q, p)
    ql = np.maximum(q, p)
    left = np.log(qs / p) / (1 - p)
    right = -np.log((1 - ql) / (1 - p)) / p
    out = params.mu + sigma * np.where(q <= p, left, right)
    return out if out.ndim else float(out)


def sample_al(params: AlParams, rng: RandomStream, size=None) -> ArrayLike:
    """Inverse-CDF draw; one uniform per variate."""
    u = rng.uniform(size=size)
    # uniform() can return exactly 0
    u = np.where(u <= 0.0, np.nextafter(0.0, 1.0), u)
    return al_quantile(u, params)


def sample_al_mixture(p: float, rng: RandomStream, size=None) -> ArrayLike:
    """theta*w + tau*sqrt(w)*u with w ~ Exp(1), u ~ N(0,1); distributed AL(0, 1, p)."""
    c = mixture_constants(p)
    w = rng.standard_exponential(size)
    u = rng.standard_normal(size)
    return c.theta * w + c.tau * np.sqrt(w) * u


# ---------------- truncated normal

def _tail_rejection(a: np.ndarray, b: np.ndarray, rng: RandomStream) -> np.ndarray:
    """Standard normal on (a, b] with a > 0 large, exponential proposal (Robert 1995)."""
    out = np.empty_like(a)
    todo = np.arange(a.size)
    while todo.size:
        aa, bb = a[todo], b[todo]
        rate = 0.5 * (aa + np.sqrt(aa * aa + 4.0))
        x = aa + rng.standard_exponential(todo.size) / rate
        u = rng.uniform(size=todo.size)
        ok = (x <= bb) & (np.log(u) <= -0.5 * (x - rate) ** 2)
        out[todo[ok]] = x[ok]
        todo = todo[~ok]
    return out


def sample_truncated_normal(mean: ArrayLike, variance: ArrayLike, lower: ArrayLike,
                            upper: ArrayLike, rng: RandomStream, size=None) -> ArrayLike:
    """N(mean, variance) conditioned on (lower, upper].

    Inverse CDF on the side of the interval nearest zero; intervals whose
    standardized near edge lies beyond TAIL_SWITCH use exponential rejection.
    """
    mean, variance, lower, upper = np.broadcast_arrays(
        *(np.asarray(v, dtype=float) for v in (mean, variance, lower, upper)))
    if size is not None:
        shape = (size,) if np.isscalar(size) else tuple(size)
        mean, variance, lower, upper = (np.broadcast_to(v, shape) for v in (mean, variance, lower, upper))
    if np.any(~(variance > 0)):
        raise DomainError("truncated normal variance must be > 0")
    if np.any(~(lower < upper)):
        raise DomainError("truncated normal interval is empty")

    sd = np.sqrt(variance)
    a = ((lower - mean) / sd).ravel()
    b = ((upper - mean) / sd).ravel()

    # reflect so the interval sits on the left, where ndtr keeps its precision
    flip = a > 0
    a, b = np.where(flip, -b, a), np.where(flip, -a, b)

    x = np.empty_like(a)
    tail = b < -TAIL_SWITCH
    central = ~tail
    if np.any(central):
        pa = special.ndtr(a[central])
        pb = special.ndtr(b[central])
        u = rng.uniform(size=int(central.sum()))
        x[central] = special.ndtri(pa + u * (pb - pa))
    if np.any(tail):
        x[tail] = -_tail_rejection(-b[tail], -a[tail], rng)
    x = np.where(flip, -x, x)

    out = mean.ravel() + sd.ravel() * x
    lo, hi = lower.ravel(), upper.ravel()
    out = np.clip(out, lo, hi)
    # lower bound is open
    out = np.where(out <= lo, np.nextafter(lo, np.inf), out)
    out = out.reshape(mean.shape)
    return out if out.ndim else float(out)


# ---------------- inverse Gaussian / GIG(1/2)

def sample_inverse_gaussian(mean: ArrayLike, shape: ArrayLike, rng: RandomStream, size=None) -> ArrayLike:
    """Michael, Schucany and Haas transform."""
    mean, shape = np.broadcast_arrays(np.asarray(mean, dtype=float), np.asarray(shape, dtype=float))
    if size is not None:
        target = (size,) if np.isscalar(size) else tuple(size)
        mean, shape = np.broadcast_to(mean, target), np.broadcast_to(shape, target)
    if np.any(~(mean > 0)) or np.any(~(shape > 0)):
        raise DomainError("inverse Gaussian parameters must be > 0")
    nu = rng.standard_normal(mean.shape)
    r = mean * nu * nu / (2.0 * shape)
    # smaller root mu*(1 + r - sqrt(r^2 + 2r)), written without cancellation
    x = mean / (1.0 + r + np.sqrt(r * r + 2.0 * r))
    u = rng.uniform(size=mean.shape)
    out = np.where(u <= mean / (mean + x), x, mean * mean / x)
    return out if np.ndim(out) else float(out)


def sample_gig_half(lambda_t: ArrayLike, eta_t: ArrayLike, rng: RandomStream, size=None) -> ArrayLike:
    """Density proportional to w^(-1/2) exp(-(lambda_t/w + eta_t*w)/2) on w > 0.

    Drawn as 1/V with V inverse Gaussian(mean=sqrt(eta/lambda), shape=eta).
    lambda_t == 0 is clamped to LAMBDA_FLOOR.
    """
    lam = np.asarray(lambda_t, dtype=float)
    eta = np.asarray(eta_t, dtype=float)
    if np.any(lam < 0) or np.any(~(eta > 0)) or np.any(np.isnan(lam)):
        raise DomainError("GIG(1/2) parameters must be positive")
    lam = np.maximum(lam, LAMBDA_FLOOR)
    v = sample_inverse_gaussian(np.sqrt(eta / lam), eta, rng, size=size)
    out = 1.0 / np.asarray(v)
    return out if out.ndim else float(out)


def gig_half_moments(lambda_t: float, eta_t: float) -> Tuple[float, float]:
    """Closed-form (mean, second moment) of the GIG(1/2) law above."""
    m = math.sqrt(lambda_t / eta_t)
    mean = m + 1.0 / eta_t
    second = m * m + 3.0 * m / eta_t + 3.0 / (eta_t * eta_t)
    return mean, second


# ---------------- inverse gamma

def sample_inverse_gamma(shape: ArrayLike, scale: ArrayLike, rng: RandomStream, size=None) -> ArrayLike:
    """IG(shape, scale): density proportional to x^-(shape+1) exp(-scale/x)."""
    if np.any(np.asarray(shape) <= 0) or np.any(np.asarray(scale) <= 0):
        raise DomainError("inverse gamma shape and scale must be > 0")
    out = np.asarray(scale, dtype=float) / rng.gamma(shape, 1.0, size)
    return out if np.ndim(out) else float(out)


# ---------------- multivariate normal

def cholesky(matrix: np.ndarray, what: str = "matrix") -> np.ndarray:
    try:
        return np.linalg.cholesky(matrix)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"{what} is not positive definite: {exc}") from exc


def sample_mvn(mean: np.ndarray, covariance: np.ndarray, rng: RandomStream,
               size: Optional[int] = None) -> np.ndarray:
    mean = np.atleast_1d(np.asarray(mean, dtype=float))
    cov = np.atleast_2d(np.asarray(covariance, dtype=float))
    if not np.allclose(cov, cov.T, rtol=1e-10, atol=1e-12):
        raise NumericalError("covariance is not symmetric")
    L = cholesky(cov, "covariance")
    shape = (mean.size,) if size is None else (size, mean.size)
    e = rng.standard_normal(shape)
    return mean + e @ L.T


def sample_mvn_precision(precision: np.ndarray, linear: np.ndarray, rng: RandomStream) -> np.ndarray:
    """Batched N(P^-1 b, P^-1) draws for precision P (..., d, d) and b (..., d)."""
    L = cholesky(precision, "precision")
    b = np.asarray(linear, dtype=float)[..., None]
    mean = np.linalg.solve(np.swapaxes(L, -1, -2), np.linalg.solve(L, b))
    e = rng.standard_normal(b.shape)
    return (mean + np.linalg.solve(np.swapaxes(L, -1, -2), e))[..., 0]
