"""Chain summaries: posterior moments, autocorrelation, batch-means inefficiency factors."""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Mapping, Optional, Sequence, Union

import numpy as np

from .errors import DegenerateChainError, InsufficientLengthError
from .models import DrawStore
from .utils import atomic_path, write_json

logger = logging.getLogger(__name__)

DEFAULT_LAGS = (1, 5, 10)
MIN_BATCHES = 10


def _centered(chain: np.ndarray) -> np.ndarray:
    x = np.asarray(chain, dtype=float).ravel()
    d = x - x.mean()
    # relative tolerance so affine rescaling cannot flip a constant chain to non-degenerate
    if not np.any(np.abs(d) > 1e-12 * max(1.0, float(np.abs(x).max()))):
        raise DegenerateChainError("chain has zero variance")
    return d


def autocorrelation(chain: np.ndarray, lag: int) -> float:
    """Sample ACF with the biased (divide-by-G) normalization."""
    d = _centered(chain)
    if not 0 <= lag < d.size:
        raise InsufficientLengthError(f"lag {lag} needs a chain longer than {lag}, got {d.size}")
    if lag == 0:
        return 1.0
    return float(np.dot(d[:-lag], d[lag:]) / np.dot(d, d))


def default_batch_size(G: int) -> int:
    return max(1, int(math.isqrt(G)))


def inefficiency_factor(chain: np.ndarray, batch_size: Optional[int] = None) -> float:
    """batch_size * Var(batch means) / Var(chain); trailing partial batch dropped."""
    x = np.asarray(chain, dtype=float).ravel()
    batch_size = batch_size or default_batch_size(x.size)
    if x.size < MIN_BATCHES * batch_size:
        raise InsufficientLengthError(
            f"chain of length {x.size} is shorter than {MIN_BATCHES} batches of {batch_size}")
    _centered(x)
    n_batches = x.size // batch_size
    means = x[:n_batches * batch_size].reshape(n_batches, batch_size).mean(axis=1)
    return float(batch_size * np.var(means, ddof=1) / np.var(x, ddof=1))


@dataclass
class ChainSummary:
    mean: float
    std: float
    if_factor: float = float("nan")
    acf: Dict[int, float] = field(default_factory=dict)
    q025: float = float("nan")
    q975: float = float("nan")
    G: int = 0
    error: Optional[str] = None

    @property
    def ess(self) -> float:
        return self.G / self.if_factor if self.if_factor > 0 else float("nan")

    @property
    def mcse(self) -> float:
        return self.std * math.sqrt(self.if_factor / self.G) if self.G else float("nan")

    def to_json(self) -> dict:
        out = {"mean": self.mean, "std": self.std, "if": self.if_factor,
               "ess": self.ess, "mcse": self.mcse, "q025": self.q025, "q975": self.q975}
        out.update({f"acf{lag}": v for lag, v in sorted(self.acf.items())})
        if self.error:
            out["error"] = self.error
        return {k: (None if isinstance(v, float) and math.isnan(v) else v) for k, v in out.items()}


def summarize_chain(chain: np.ndarray, batch_size: Optional[int] = None,
                    lags: Sequence[int] = DEFAULT_LAGS) -> ChainSummary:
    x = np.asarray(chain, dtype=float)
    q025, q975 = np.quantile(x, [0.025, 0.975])
    summary = ChainSummary(mean=float(x.mean()), std=float(x.std(ddof=1)) if x.size > 1 else 0.0,
                           q025=float(q025), q975=float(q975), G=int(x.size))
    try:
        summary.if_factor = inefficiency_factor(x, batch_size)
        summary.acf = {lag: autocorrelation(x, lag) for lag in lags}
    except (DegenerateChainError, InsufficientLengthError) as exc:
        summary.error = str(exc)
    return summary


def summarize(store: DrawStore, batch_size: Optional[int] = None, lags: Sequence[int] = DEFAULT_LAGS,
              include_alpha: bool = False) -> Dict[str, ChainSummary]:
    if store.G == 0:
        raise InsufficientLengthError("draw store is empty")
    batch_size = batch_size or default_batch_size(store.G)
    out: Dict[str, ChainSummary] = {}
    for name, column in store.columns(include_alpha).items():
        out[name] = summarize_chain(column, batch_size, lags)
        if out[name].error:
            logger.warning("%s: %s", name, out[name].error)
    return out


def compare_summaries(blocked: Mapping[str, ChainSummary], nonblocked: Mapping[str, ChainSummary],
                      lag: int = 10) -> Dict[str, dict]:
    """Side-by-side IF and ACF(lag) for the parameters both runs share."""
    table: Dict[str, dict] = {}
    for name in blocked:
        if name not in nonblocked:
            continue
        b, nb = blocked[name], nonblocked[name]
        acf_b, acf_nb = b.acf.get(lag, float("nan")), nb.acf.get(lag, float("nan"))
        table[name] = {
            "mean_blocked": b.mean, "mean_nonblocked": nb.mean,
            "if_blocked": b.if_factor, "if_nonblocked": nb.if_factor,
            f"acf{lag}_blocked": acf_b, f"acf{lag}_nonblocked": acf_nb,
            "blocked_better": bool(b.if_factor < nb.if_factor and acf_b < acf_nb),
        }
    return table


def summary_payload(summaries: Mapping[str, ChainSummary]) -> dict:
    return {name: s.to_json() for name, s in summaries.items()}


def write_summary_json(path: Union[str, Path], summaries: Mapping[str, ChainSummary]) -> Path:
    return write_json(path, summary_payload(summaries))


def write_trace_csv(store: DrawStore, path: Union[str, Path]) -> Path:
    """Raw retained draws, one row per draw; plot with any external tool."""
    with atomic_path(path) as tmp:
        store.write_csv(tmp)
    return Path(path)
