"""Gibbs samplers for the QBLD model.

Two algorithms share the same full conditionals:

* blocked: (beta, z_i) drawn marginally of alpha_i, then alpha_i, w, phi2;
* nonblocked: beta | alpha, alpha, w, phi2, z (element-wise truncated normal).

Per-individual work runs on buckets of individuals with equal T_i (see
`PanelDataset.buckets`), vectorised over the bucket. Each bucket owns a child
random stream spawned at chain start, so the draws do not depend on whether
buckets run sequentially or on a thread pool.
"""
from __future__ import annotations

import logging
import time
from concurrent.futures import ProcessPoolExecutor, ThreadPoolExecutor
from dataclasses import dataclass, replace
from functools import cached_property
from typing import Callable, List, Literal, Optional, Sequence

import numpy as np

from .distributions import (
    cholesky,
    sample_gig_half,
    sample_inverse_gamma,
    sample_mvn_precision,
    sample_truncated_normal,
)
from .errors import ConfigError, DomainError, NumericalError
from .models import Bucket, DrawStore, IndividualBlock, McmcState, ModelSpec, PanelDataset, Priors, validate_state
from .rng import RandomStream

logger = logging.getLogger(__name__)

Algorithm = Literal["blocked", "nonblocked"]
VARIANCE_FLOOR = 1e-12


@dataclass(frozen=True)
class GaussianUpdate:
    mean: np.ndarray
    precision: np.ndarray

    @cached_property
    def covariance(self) -> np.ndarray:
        L = cholesky(self.precision, "posterior precision")
        Linv = np.linalg.solve(L, np.eye(L.shape[0]))
        return Linv.T @ Linv

    def sample(self, rng: RandomStream) -> np.ndarray:
        return sample_mvn_precision(self.precision, self.precision @ self.mean, rng)


@dataclass(frozen=True)
class SamplerConfig:
    algorithm: Algorithm = "blocked"
    total_draws: int = 15000
    burn_in: int = 3000
    seed: int = 0
    store_alpha: bool = True
    parallel_individuals: bool = False
    thin: int = 1
    chunk_size: Optional[int] = 250
    debug: bool = False

    def __post_init__(self):
        if self.algorithm not in ("blocked", "nonblocked"):
            raise ConfigError(f"unknown algorithm {self.algorithm!r}", field="algorithm")
        if self.total_draws < 1 or self.burn_in < 0:
            raise ConfigError("draws must be >= 1 and burn_in >= 0", field="draws")
        if self.burn_in >= self.total_draws:
            raise ConfigError(f"burn_in ({self.burn_in}) must be smaller than draws ({self.total_draws})",
                              field="burn_in")
        if self.thin < 1:
            raise ConfigError("thin must be >= 1", field="thin")

    @property
    def retained(self) -> int:
        return len(range(self.burn_in, self.total_draws, self.thin))


# ---------------------------------------------------------------- Omega_i

def omega_matrix(S_i: np.ndarray, w_i: np.ndarray, phi2: float, tau: float) -> np.ndarray:
    """phi2 * S_i S_i' + diag(tau^2 w_i). phi2 = 0 gives the heterogeneity-free diagonal."""
    S_i = np.atleast_2d(np.asarray(S_i, dtype=float))
    w_i = np.atleast_1d(np.asarray(w_i, dtype=float))
    if np.any(~(w_i > 0)):
        raise DomainError("w must be strictly positive")
    if phi2 < 0:
        raise DomainError("phi2 must be non-negative")
    return phi2 * S_i @ S_i.T + np.diag(tau * tau * w_i)


def _omega_precision(S: np.ndarray, w: np.ndarray, phi2: float, tau2: float) -> np.ndarray:
    """Omega_i^-1 for a bucket: S (m, T, l), w (m, T) -> (m, T, T).

    Woodbury with the l x l core S'D^-1 S + I/phi2 when l < T, otherwise a
    Cholesky factor of Omega_i itself.
    """
    m, T, l = S.shape
    if l < T:
        d_inv = 1.0 / (tau2 * w)
        U = d_inv[..., None] * S                                    # D^-1 S
        core = np.swapaxes(S, 1, 2) @ U + np.eye(l) / phi2
        V = np.linalg.solve(cholesky(core, "Woodbury core"), np.swapaxes(U, 1, 2))  # (m, l, T)
        Q = -np.swapaxes(V, 1, 2) @ V
        Q[:, np.arange(T), np.arange(T)] += d_inv
        return Q
    omega = phi2 * S @ np.swapaxes(S, 1, 2)
    omega[:, np.arange(T), np.arange(T)] += tau2 * w
    Linv = np.linalg.solve(cholesky(omega, "Omega"), np.broadcast_to(np.eye(T), omega.shape))
    return np.swapaxes(Linv, 1, 2) @ Linv


# ---------------------------------------------------------------- beta

def _gaussian_from(precision: np.ndarray, linear: np.ndarray) -> GaussianUpdate:
    L = cholesky(precision, "beta posterior precision")
    mean = np.linalg.solve(L.T, np.linalg.solve(L, linear))
    return GaussianUpdate(mean=mean, precision=precision)


def _beta_blocked(buckets: Sequence[Bucket], precisions: Sequence[np.ndarray],
                  z: np.ndarray, w: np.ndarray, spec: ModelSpec) -> GaussianUpdate:
    priors, theta = spec.priors, spec.constants.theta
    precision = priors.B0_inv.copy()
    linear = priors.B0_inv @ priors.beta0
    for b, Q in zip(buckets, precisions):
        XtQ = np.swapaxes(b.X, 1, 2) @ Q                         # (m, k, T)
        precision += np.einsum("mkt,mtj->kj", XtQ, b.X)
        linear += np.einsum("mkt,mt->k", XtQ, z[b.rows] - theta * w[b.rows])
    return _gaussian_from(precision, linear)


def beta_conditional_blocked(data: PanelDataset, z: np.ndarray, w: np.ndarray, phi2: float,
                             spec: ModelSpec, chunk_size: Optional[int] = None) -> GaussianUpdate:
    """beta | z, w, phi2 with alpha integrated out."""
    buckets = data.buckets(chunk_size)
    tau2 = spec.constants.tau2
    precisions = [_omega_precision(b.S, w[b.rows], phi2, tau2) for b in buckets]
    return _beta_blocked(buckets, precisions, z, w, spec)


def beta_conditional_nonblocked(data: PanelDataset, z: np.ndarray, alpha: np.ndarray, w: np.ndarray,
                                spec: ModelSpec) -> GaussianUpdate:
    """beta | alpha, z, w with Psi_i = diag(tau^2 w_i)."""
    priors, c = spec.priors, spec.constants
    psi_inv = 1.0 / (c.tau2 * w)
    resid = z - np.einsum("nl,nl->n", data.S, alpha[data.owner]) - c.theta * w
    Xw = data.X * psi_inv[:, None]
    precision = Xw.T @ data.X + priors.B0_inv
    linear = Xw.T @ resid + priors.B0_inv @ priors.beta0
    return _gaussian_from(precision, linear)


# ---------------------------------------------------------------- z

def _bounds(y: np.ndarray):
    lower = np.where(y == 1, 0.0, -np.inf)
    upper = np.where(y == 1, np.inf, 0.0)
    return lower, upper


def _geweke_sweep(z: np.ndarray, mean: np.ndarray, Q: np.ndarray, y: np.ndarray,
                  rng: RandomStream) -> np.ndarray:
    """One ascending pass of univariate truncated-normal conditionals.

    z, mean, y: (m, T); Q: (m, T, T) precision of the untruncated normal.
    Component t conditions on components < t from this pass and > t from the
    previous one.
    """
    z = z.copy()
    lower, upper = _bounds(y)
    for t in range(z.shape[1]):
        q_tt = Q[:, t, t]
        cond_var = 1.0 / q_tt
        if np.any(~(cond_var > VARIANCE_FLOOR)):
            raise NumericalError(f"conditional variance of z at t={t} fell below {VARIANCE_FLOOR}")
        r = z - mean
        s = np.einsum("ms,ms->m", Q[:, t, :], r) - q_tt * r[:, t]
        cond_mean = mean[:, t] - cond_var * s
        z[:, t] = sample_truncated_normal(cond_mean, cond_var, lower[:, t], upper[:, t], rng)
    return z


def sample_z_blocked(block: IndividualBlock, beta: np.ndarray, w_i: np.ndarray, phi2: float,
                     spec: ModelSpec, state_z_i: np.ndarray, rng: RandomStream) -> np.ndarray:
    c = spec.constants
    w_i = np.asarray(w_i, dtype=float)
    Q = _omega_precision(block.S[None], w_i[None], phi2, c.tau2)
    mean = block.X @ beta + c.theta * w_i
    return _geweke_sweep(np.asarray(state_z_i, dtype=float)[None], mean[None], Q, block.y[None], rng)[0]


def sample_z_nonblocked(y: np.ndarray, x: np.ndarray, s: np.ndarray, beta: np.ndarray, alpha: np.ndarray,
                        w: np.ndarray, spec: ModelSpec, rng: RandomStream) -> np.ndarray:
    """Element-wise z_it ~ TN(x'beta + s'alpha_i + theta w, tau^2 w) on the side given by y.

    alpha holds alpha_i for each row (same leading shape as x).
    """
    c = spec.constants
    x, s, alpha = np.atleast_2d(x), np.atleast_2d(s), np.atleast_2d(alpha)
    w = np.atleast_1d(np.asarray(w, dtype=float))
    mean = x @ beta + np.einsum("nl,nl->n", s, alpha) + c.theta * w
    lower, upper = _bounds(np.atleast_1d(y))
    return np.atleast_1d(sample_truncated_normal(mean, c.tau2 * w, lower, upper, rng))


# ---------------------------------------------------------------- alpha

def _alpha_posterior(S: np.ndarray, resid: np.ndarray, w: np.ndarray, phi2: float, tau2: float):
    """Batched precision (m, l, l) and linear term (m, l) of alpha_i."""
    d_inv = 1.0 / (tau2 * w)
    StD = np.swapaxes(S * d_inv[..., None], 1, 2)              # (m, l, T)
    precision = StD @ S + np.eye(S.shape[2]) / phi2
    linear = np.einsum("mlt,mt->ml", StD, resid)
    return precision, linear


def alpha_conditional(block: IndividualBlock, z_i: np.ndarray, beta: np.ndarray, w_i: np.ndarray,
                      phi2: float, spec: ModelSpec) -> GaussianUpdate:
    c = spec.constants
    w_i = np.asarray(w_i, dtype=float)
    if np.any(~(w_i > 0)):
        raise DomainError("w must be strictly positive")
    resid = np.asarray(z_i, dtype=float) - block.X @ beta - c.theta * w_i
    precision, linear = _alpha_posterior(block.S[None], resid[None], w_i[None], phi2, c.tau2)
    return _gaussian_from(precision[0], linear[0])


# ---------------------------------------------------------------- w, phi2

def sample_w(resid: np.ndarray, spec: ModelSpec, rng: RandomStream) -> np.ndarray:
    """w_it ~ GIG(1/2, ((z - x'beta - s'alpha)/tau)^2, theta^2/tau^2 + 2), element-wise."""
    c = spec.constants
    lam = (np.asarray(resid, dtype=float) / c.tau) ** 2
    eta = c.theta ** 2 / c.tau2 + 2.0
    return np.asarray(sample_gig_half(lam, eta, rng))


def sample_w_element(z_it: float, x_it: np.ndarray, s_it: np.ndarray, beta: np.ndarray,
                     alpha_i: np.ndarray, spec: ModelSpec, rng: RandomStream) -> float:
    resid = z_it - np.dot(x_it, beta) - np.dot(s_it, alpha_i)
    return float(sample_w(resid, spec, rng))


def sample_phi2(alpha: np.ndarray, priors: Priors, rng: RandomStream) -> float:
    alpha = np.atleast_2d(alpha)
    n, l = alpha.shape
    c_tilde = n * l + priors.c1
    d_tilde = float(np.sum(alpha * alpha)) + priors.d1
    return float(sample_inverse_gamma(c_tilde / 2.0, d_tilde / 2.0, rng))


# ---------------------------------------------------------------- chain

def initial_state(data: PanelDataset, spec: ModelSpec, rng: RandomStream) -> McmcState:
    """beta = 0, alpha = 0, phi2 = prior mean, w = 1, z from the one-sided TN(0, tau^2)."""
    c = spec.constants
    lower, upper = _bounds(data.y)
    z = np.atleast_1d(sample_truncated_normal(np.zeros(data.n_obs), c.tau2, lower, upper, rng))
    return McmcState(
        beta=np.zeros(data.k),
        alpha=np.zeros((data.n, data.l)),
        z=z,
        w=np.ones(data.n_obs),
        phi2=spec.priors.phi2_prior_mean,
    )


class GibbsChain:
    """One MCMC chain; `sweep()` advances the state by one full iteration."""

    def __init__(self, data: PanelDataset, spec: ModelSpec, cfg: SamplerConfig,
                 state: Optional[McmcState] = None):
        self.data, self.spec, self.cfg = data, spec, cfg
        self.buckets = data.buckets(cfg.chunk_size)
        root = RandomStream(cfg.seed)
        init_stream, self.stream, *self.bucket_streams = root.spawn(2 + len(self.buckets))
        self.state = state if state is not None else initial_state(data, spec, init_stream)
        self._pool = ThreadPoolExecutor() if cfg.parallel_individuals and len(self.buckets) > 1 else None

    def close(self):
        if self._pool is not None:
            self._pool.shutdown()
            self._pool = None

    def _each_bucket(self, fn: Callable[[Bucket, RandomStream], object]) -> list:
        pairs = list(zip(self.buckets, self.bucket_streams))
        if self._pool is None:
            return [fn(b, s) for b, s in pairs]
        return list(self._pool.map(lambda pair: fn(*pair), pairs))

    # --- blocked (beta, z) | then alpha | then w | then phi2
    def _sweep_blocked(self):
        st, c = self.state, self.spec.constants
        precisions = self._each_bucket(lambda b, _: _omega_precision(b.S, st.w[b.rows], st.phi2, c.tau2))
        st.beta = _beta_blocked(self.buckets, precisions, st.z, st.w, self.spec).sample(self.stream)

        def individuals(b: Bucket, Q: np.ndarray, rng: RandomStream):
            w = st.w[b.rows]
            xb = b.X @ st.beta
            z = _geweke_sweep(st.z[b.rows], xb + c.theta * w, Q, b.y, rng)
            prec, lin = _alpha_posterior(b.S, z - xb - c.theta * w, w, st.phi2, c.tau2)
            alpha = sample_mvn_precision(prec, lin, rng)
            resid = z - xb - np.einsum("mtl,ml->mt", b.S, alpha)
            st.z[b.rows] = z
            st.alpha[b.members] = alpha
            st.w[b.rows] = sample_w(resid, self.spec, rng)

        by_id = {id(b): Q for b, Q in zip(self.buckets, precisions)}
        self._each_bucket(lambda b, rng: individuals(b, by_id[id(b)], rng))
        st.phi2 = sample_phi2(st.alpha, self.spec.priors, self.stream)

    # --- nonblocked beta, alpha, w, phi2, z
    def _sweep_nonblocked(self):
        st, c = self.state, self.spec.constants
        st.beta = beta_conditional_nonblocked(self.data, st.z, st.alpha, st.w, self.spec).sample(self.stream)

        def alpha_w(b: Bucket, rng: RandomStream):
            w = st.w[b.rows]
            xb = b.X @ st.beta
            prec, lin = _alpha_posterior(b.S, st.z[b.rows] - xb - c.theta * w, w, st.phi2, c.tau2)
            alpha = sample_mvn_precision(prec, lin, rng)
            st.alpha[b.members] = alpha
            st.w[b.rows] = sample_w(st.z[b.rows] - xb - np.einsum("mtl,ml->mt", b.S, alpha), self.spec, rng)

        def latent(b: Bucket, rng: RandomStream):
            rows = b.rows.ravel()
            alpha_rows = np.repeat(st.alpha[b.members], b.T, axis=0)
            st.z[rows] = sample_z_nonblocked(b.y.ravel(), b.X.reshape(-1, self.data.k),
                                             b.S.reshape(-1, self.data.l), st.beta, alpha_rows,
                                             st.w[rows], self.spec, rng)

        self._each_bucket(alpha_w)
        st.phi2 = sample_phi2(st.alpha, self.spec.priors, self.stream)
        self._each_bucket(latent)

    def sweep(self, index: int = 0) -> McmcState:
        try:
            if self.cfg.algorithm == "blocked":
                self._sweep_blocked()
            else:
                self._sweep_nonblocked()
            if self.cfg.debug:
                validate_state(self.state, self.data)
        except NumericalError as exc:
            raise NumericalError(exc.message, sweep=index) from exc
        except (DomainError, np.linalg.LinAlgError, FloatingPointError) as exc:
            raise NumericalError(str(exc), sweep=index) from exc
        return self.state


def run_chain(data: PanelDataset, spec: ModelSpec, cfg: SamplerConfig,
              on_sweep: Optional[Callable[[int, McmcState], None]] = None) -> DrawStore:
    G = cfg.retained
    beta_draws = np.empty((G, data.k))
    phi2_draws = np.empty(G)
    alpha_draws = np.empty((G, data.n, data.l)) if cfg.store_alpha else None

    chain = GibbsChain(data, spec, cfg)
    logger.info("chain start: algorithm=%s p=%s draws=%d burn_in=%d seed=%d n=%d N=%d",
                cfg.algorithm, spec.p, cfg.total_draws, cfg.burn_in, cfg.seed, data.n, data.n_obs)
    tic = time.perf_counter()
    step = max(1, cfg.total_draws // 10)
    g = 0
    try:
        for it in range(cfg.total_draws):
            state = chain.sweep(it)
            if on_sweep is not None:
                on_sweep(it, state)
            if it >= cfg.burn_in and (it - cfg.burn_in) % cfg.thin == 0:
                beta_draws[g] = state.beta
                phi2_draws[g] = state.phi2
                if alpha_draws is not None:
                    alpha_draws[g] = state.alpha
                g += 1
            if (it + 1) % step == 0:
                logger.info("sweep %d/%d (%s)", it + 1, cfg.total_draws,
                            "burn-in" if it < cfg.burn_in else "sampling")
    finally:
        chain.close()
    elapsed = time.perf_counter() - tic
    logger.info("chain done in %.1fs, %d draws retained", elapsed, G)

    return DrawStore(
        beta=beta_draws, phi2=phi2_draws, alpha=alpha_draws,
        x_names=data.x_names, s_names=data.s_names,
        individual_ids=tuple(b.id for b in data.individuals),
        metadata={
            "p": spec.p, "seed": cfg.seed, "algorithm": cfg.algorithm,
            "total_draws": cfg.total_draws, "burn_in": cfg.burn_in, "thin": cfg.thin,
            "G": G, "elapsed_seconds": elapsed,
        },
    )


def _run_one(args) -> DrawStore:
    return run_chain(*args)


def run_chains(data: PanelDataset, spec: ModelSpec, cfg: SamplerConfig, seeds: Sequence[int],
               max_workers: Optional[int] = None) -> List[DrawStore]:
    """Independent chains with distinct seeds, one process each."""
    jobs = [(data, spec, replace(cfg, seed=int(s))) for s in seeds]
    if max_workers == 1 or len(jobs) == 1:
        return [_run_one(job) for job in jobs]
    with ProcessPoolExecutor(max_workers=max_workers) as pool:
        return list(pool.map(_run_one, jobs))
