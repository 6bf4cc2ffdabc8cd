"""Post-fit quantities: success probabilities, covariate effects, conditional likelihood, cAIC/cBIC."""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Iterator, Optional, Tuple

import numpy as np

from .distributions import AlParams, al_cdf, validate_quantile
from .errors import ConfigError, MissingAlphaError
from .models import DrawStore, ModelSpec, PanelDataset
from .rng import RandomStream
from .schemas import EffectRequest

logger = logging.getLogger(__name__)

PROB_CLAMP = 1e-12
DRAW_CHUNK = 256


def success_probability(x: np.ndarray, s: np.ndarray, beta: np.ndarray, alpha_i: np.ndarray,
                        p: float) -> np.ndarray:
    """Pr(z > 0) = 1 - F_AL(-(x'beta + s'alpha_i); 0, 1, p)."""
    index = np.asarray(x, dtype=float) @ beta + np.einsum("...l,...l->...", np.asarray(s, dtype=float), alpha_i)
    return probability_from_index(index, p)


def probability_from_index(index: np.ndarray, p: float) -> np.ndarray:
    p = validate_quantile(p)
    out = 1.0 - np.asarray(al_cdf(-np.asarray(index, dtype=float), AlParams(0.0, 1.0, p)))
    return out if out.ndim else float(out)


# ---------------- covariate effects

@dataclass
class EffectSummary:
    label: str
    mean: float
    std: float
    lower: float
    upper: float
    n_rows: int
    draws: np.ndarray = field(repr=False)

    def to_json(self) -> dict:
        return {"contrast": self.label, "mean": self.mean, "std": self.std,
                "interval_95": [self.lower, self.upper], "observations": self.n_rows,
                "draws": int(self.draws.size)}


def _row_filter(data: PanelDataset, req: EffectRequest) -> np.ndarray:
    if req.filter is None:
        return np.ones(data.n_obs, dtype=bool)
    f = req.filter
    if f.column in data.x_names:
        values = data.X[:, data.x_names.index(f.column)]
    elif f.column in data.s_names:
        values = data.S[:, data.s_names.index(f.column)]
    else:
        raise ConfigError(f"unknown filter column {f.column!r}", field="filter.column")
    keep = np.ones(data.n_obs, dtype=bool)
    if f.equals is not None:
        keep &= values == f.equals
    if f.min is not None:
        keep &= values >= f.min
    if f.max is not None:
        keep &= values <= f.max
    return keep


def _contrast(values: np.ndarray, req: EffectRequest) -> Tuple[np.ndarray, np.ndarray]:
    """(x_ddagger, x_dagger) for every kept row."""
    if req.kind == "pair":
        return np.full_like(values, req.from_value), np.full_like(values, req.to_value)
    if req.kind == "delta":
        return values, values + req.delta
    return np.zeros_like(values), np.ones_like(values)


def _chunks(G: int, size: int = DRAW_CHUNK) -> Iterator[slice]:
    for start in range(0, G, size):
        yield slice(start, min(G, start + size))


def _alpha_rows(store: DrawStore, data: PanelDataset, owner: np.ndarray, sl: slice,
                rng: Optional[RandomStream]) -> np.ndarray:
    """alpha_i for every kept row and draw in `sl`: (c, rows, l)."""
    if store.alpha is not None:
        return store.alpha[sl][:, owner, :]
    # alpha_i ~ N(0, phi2^(g) I) when no alpha draws were kept
    phi = np.sqrt(store.phi2[sl])[:, None, None]
    alpha = phi * rng.standard_normal((phi.shape[0], data.n, data.l))
    return alpha[:, owner, :]


def covariate_effect(store: DrawStore, data: PanelDataset, req: EffectRequest, spec: ModelSpec,
                     alpha_from_prior: bool = False, rng: Optional[RandomStream] = None) -> EffectSummary:
    """Average over kept observations of Pr(y=1 | x_dagger) - Pr(y=1 | x_ddagger), per retained draw."""
    if req.column not in data.x_names:
        raise ConfigError(f"unknown covariate {req.column!r}; X has {list(data.x_names)}", field="column")
    if store.alpha is None and not alpha_from_prior:
        raise MissingAlphaError("covariate effects need stored alpha draws (store_alpha) or alpha_from_prior")
    if store.alpha is None:
        rng = rng or RandomStream(store.metadata.get("seed"))

    j = data.x_names.index(req.column)
    keep = _row_filter(data, req)
    if not keep.any():
        raise ConfigError("effect filter keeps no observations", field="filter")
    X, S, owner = data.X[keep], data.S[keep], data.owner[keep]
    ddag, dag = _contrast(X[:, j], req)
    X_rest = X.copy()
    X_rest[:, j] = 0.0

    effects = np.empty(store.G)
    for sl in _chunks(store.G):
        beta = store.beta[sl]                                             # (c, k)
        index = X_rest @ beta.T                                           # (rows, c)
        index = index.T + np.einsum("rl,crl->cr", S, _alpha_rows(store, data, owner, sl, rng))
        bj = beta[:, j][:, None]
        diff = probability_from_index(index + dag * bj, spec.p) - probability_from_index(index + ddag * bj, spec.p)
        effects[sl] = diff.mean(axis=1)

    lower, upper = np.quantile(effects, [0.025, 0.975])
    summary = EffectSummary(label=req.label, mean=float(effects.mean()),
                            std=float(effects.std(ddof=1)) if effects.size > 1 else 0.0,
                            lower=float(lower), upper=float(upper), n_rows=int(keep.sum()), draws=effects)
    logger.info("effect %s: mean %.4f (%.4f, %.4f)", summary.label, summary.mean, summary.lower, summary.upper)
    return summary


def average_success_probability(store: DrawStore, data: PanelDataset, spec: ModelSpec,
                                rng: Optional[RandomStream] = None) -> float:
    """Posterior mean of Pr(y=1) averaged over observations."""
    if store.alpha is None:
        rng = rng or RandomStream(store.metadata.get("seed"))
    total = 0.0
    for sl in _chunks(store.G):
        index = (data.X @ store.beta[sl].T).T
        index = index + np.einsum("rl,crl->cr", data.S, _alpha_rows(store, data, data.owner, sl, rng))
        total += float(probability_from_index(index, spec.p).mean(axis=1).sum())
    return total / store.G


# ---------------- likelihood and information criteria

@dataclass(frozen=True)
class FitMetrics:
    loglik: float
    caic: float
    cbic: float
    dof: float
    n_obs: int

    def to_json(self) -> dict:
        return {"loglik": self.loglik, "caic": self.caic, "cbic": self.cbic, "dof": self.dof, "N_obs": self.n_obs}


def _loglik(index: np.ndarray, y: np.ndarray, p: float) -> np.ndarray:
    pi = np.clip(probability_from_index(index, p), PROB_CLAMP, 1.0 - PROB_CLAMP)
    return np.sum(np.where(y == 1, np.log(pi), np.log1p(-pi)), axis=-1)


def conditional_loglik(beta_hat: np.ndarray, alpha_hat: np.ndarray, data: PanelDataset, spec: ModelSpec) -> float:
    beta_hat = np.asarray(beta_hat, dtype=float)
    alpha_hat = np.asarray(alpha_hat, dtype=float)
    if beta_hat.shape != (data.k,) or alpha_hat.shape != (data.n, data.l):
        raise ConfigError(f"expected beta ({data.k},) and alpha ({data.n}, {data.l}), "
                          f"got {beta_hat.shape} and {alpha_hat.shape}")
    index = data.X @ beta_hat + np.einsum("rl,rl->r", data.S, alpha_hat[data.owner])
    return float(_loglik(index, data.y, spec.p))


def loglik_from_store(store: DrawStore, data: PanelDataset, spec: ModelSpec,
                      mode: str = "posterior_mean") -> float:
    """Log-likelihood at the posterior means, or averaged over draws (mode="per_draw")."""
    if store.alpha is None:
        raise MissingAlphaError("conditional log-likelihood needs stored alpha draws")
    if mode == "posterior_mean":
        return conditional_loglik(store.beta.mean(axis=0), store.alpha.mean(axis=0), data, spec)
    if mode != "per_draw":
        raise ConfigError(f"unknown loglik mode {mode!r}", field="loglik_mode")
    total = 0.0
    for sl in _chunks(store.G):
        index = (data.X @ store.beta[sl].T).T
        index = index + np.einsum("rl,crl->cr", data.S, store.alpha[sl][:, data.owner, :])
        total += float(_loglik(index, data.y, spec.p).sum())
    return total / store.G


def information_criteria(loglik: float, k: int, n_obs: int) -> FitMetrics:
    """dof = k + 1 (common coefficients and phi2); random-effect dof are not counted."""
    if n_obs < 1:
        raise ConfigError("N_obs must be >= 1")
    dof = k + 1
    return FitMetrics(loglik=float(loglik), caic=-2.0 * loglik + 2.0 * dof,
                      cbic=-2.0 * loglik + dof * math.log(n_obs), dof=float(dof), n_obs=int(n_obs))
