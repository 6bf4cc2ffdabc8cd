"""Panel ingestion (long CSV), writing, and the synthetic QBLD generator."""
from __future__ import annotations

import io
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Sequence, Tuple, Union

import numpy as np
import pandas as pd

from .distributions import AlParams, sample_al, validate_quantile
from .errors import ConfigError, EmptyIndividualError, FileAccessError, PanelParseError, SchemaError
from .models import IndividualBlock, PanelDataset
from .rng import RandomStream
from .schemas import ColumnSpec
from .utils import atomic_path

logger = logging.getLogger(__name__)

INTERCEPT = "const"
LAG = "y_lag"


def _numeric(frame: pd.DataFrame, column: str, lines: np.ndarray) -> np.ndarray:
    values = pd.to_numeric(frame[column], errors="coerce")
    bad = values.isna() & frame[column].notna()
    if bad.any():
        row = int(bad.idxmax())
        raise PanelParseError(f"column {column!r} value {frame.at[row, column]!r} is not numeric", row=int(lines[row]))
    return values.to_numpy(dtype=float)


def _data_lines(text: str, n_rows: int) -> np.ndarray:
    """File line (1-based) of each data row. pandas drops blank lines, so count only filled ones."""
    filled = [i + 1 for i, line in enumerate(text.split("\n")) if line.strip()]
    if len(filled) == n_rows + 1:
        return np.asarray(filled[1:])
    # quoted fields spanning lines
    return np.arange(n_rows) + 2


def load_panel_csv(path: Union[str, Path], schema: ColumnSpec) -> PanelDataset:
    """Read a long-format panel (one row per (i, t)), group by id and sort by time.

    Row numbers in errors are line numbers in the file (the header is line 1).
    """
    try:
        text = Path(path).read_text(encoding="utf-8")
    except FileNotFoundError as exc:
        raise FileAccessError(f"panel file not found: {path}") from exc
    except UnicodeDecodeError as exc:
        raise PanelParseError(f"malformed panel file: {exc}") from exc
    except OSError as exc:
        raise FileAccessError(f"cannot read {path}: {exc}") from exc
    try:
        frame = pd.read_csv(io.StringIO(text), skipinitialspace=True, float_precision="round_trip")
    except (pd.errors.ParserError, pd.errors.EmptyDataError) as exc:
        raise PanelParseError(f"malformed panel file: {exc}") from exc
    lines = _data_lines(text, len(frame))

    needed = [schema.id, schema.time, schema.outcome, *schema.x_columns, *schema.s_columns]
    missing = [c for c in needed if c not in frame.columns]
    if missing:
        raise SchemaError(f"panel file lacks column(s) {missing}")
    if frame.empty:
        raise EmptyIndividualError("panel file has no data rows")

    frame = frame[list(dict.fromkeys(needed))].reset_index(drop=True)
    na_rows = frame.isna().any(axis=1)
    if na_rows.any():
        row = int(na_rows.idxmax())
        raise PanelParseError("missing value", row=int(lines[row]))

    y = _numeric(frame, schema.outcome, lines)
    bad = ~np.isin(y, (0.0, 1.0))
    if bad.any():
        row = int(np.flatnonzero(bad)[0])
        raise PanelParseError(f"outcome must be 0 or 1, got {frame.at[row, schema.outcome]!r}", row=int(lines[row]))
    time = _numeric(frame, schema.time, lines)
    xs = np.column_stack([_numeric(frame, c, lines) for c in schema.x_columns]) if schema.x_columns \
        else np.empty((len(frame), 0))
    ss = np.column_stack([_numeric(frame, c, lines) for c in schema.s_columns]) if schema.s_columns \
        else np.empty((len(frame), 0))

    x_names = ([INTERCEPT] if schema.x_intercept else []) + list(schema.x_columns) \
        + ([LAG] if schema.lagged_outcome else [])
    s_names = ([INTERCEPT] if schema.s_intercept else []) + list(schema.s_columns)

    blocks: List[IndividualBlock] = []
    groups = frame.groupby(schema.id, sort=False).indices
    for ident in pd.unique(frame[schema.id]):
        idx = groups[ident]
        idx = idx[np.argsort(time[idx], kind="stable")]
        t = time[idx]
        dup = np.flatnonzero(np.diff(t) == 0)
        if dup.size:
            row = int(idx[dup[0] + 1])
            raise PanelParseError(f"duplicate time {t[dup[0]]:g} for id {ident!r}", row=int(lines[row]))
        yi, Xi, Si = y[idx], xs[idx], ss[idx]
        if schema.lagged_outcome:
            gaps = np.flatnonzero(np.diff(t) != 1)
            if gaps.size:
                row = int(idx[gaps[0] + 1])
                raise PanelParseError(f"lagged outcome needs consecutive periods for id {ident!r}", row=int(lines[row]))
            Xi = np.column_stack([Xi[1:], yi[:-1]])
            yi, Si, t = yi[1:], Si[1:], t[1:]
            if yi.size == 0:
                raise EmptyIndividualError(f"individual {ident!r} has a single period; nothing left after lagging")
        if schema.x_intercept:
            Xi = np.column_stack([np.ones(yi.size), Xi])
        if schema.s_intercept:
            Si = np.column_stack([np.ones(yi.size), Si])
        blocks.append(IndividualBlock(id=_plain_id(ident), y=yi.astype(np.int8), X=Xi, S=Si, times=t))

    data = PanelDataset(individuals=tuple(blocks), x_names=tuple(x_names), s_names=tuple(s_names))
    logger.info("loaded %s: n=%d N=%d k=%d l=%d, share of y=1 %.4f",
                path, data.n, data.n_obs, data.k, data.l, data.one_share())
    return data


def _plain_id(ident):
    return ident.item() if isinstance(ident, np.generic) else ident


def panel_frame(data: PanelDataset, id_col: str = "id", time_col: str = "time",
                outcome: str = "y") -> pd.DataFrame:
    """Long layout; intercept and lag columns are omitted (they are re-derived on load)."""
    x_keep = [j for j, name in enumerate(data.x_names) if name not in (INTERCEPT, LAG)]
    s_keep = [j for j, name in enumerate(data.s_names)
              if name != INTERCEPT and name not in data.x_names]
    cols: Dict[str, np.ndarray] = {
        id_col: np.repeat([b.id for b in data.individuals], data.lengths),
        time_col: np.concatenate([b.periods() for b in data.individuals]),
        outcome: data.y.astype(int),
    }
    for j in x_keep:
        cols[data.x_names[j]] = data.X[:, j]
    for j in s_keep:
        cols[data.s_names[j]] = data.S[:, j]
    return pd.DataFrame(cols)


def write_panel_csv(data: PanelDataset, path: Union[str, Path], **names) -> Path:
    with atomic_path(path) as tmp:
        panel_frame(data, **names).to_csv(tmp, index=False, float_format="%.17g")
    return Path(path)


# ---------------- simulation

@dataclass(frozen=True)
class GroundTruth:
    beta: np.ndarray
    alpha: np.ndarray        # (n, l)
    z: np.ndarray            # flattened in dataset order
    alpha_variance: float
    p: float
    seed: int

    def to_json(self, data: PanelDataset) -> dict:
        ones = int(data.y.sum())
        return {
            "beta": self.beta.tolist(),
            "alpha": self.alpha.tolist(),
            "alpha_variance": self.alpha_variance,
            "p": self.p,
            "seed": self.seed,
            "n": data.n,
            "T": int(data.lengths.max()),
            "class_counts": {"0": data.n_obs - ones, "1": ones},
        }


def simulate_qbld(n: int, T: int, beta_true: Sequence[float], alpha_variance: float, p: float,
                  seed: int, l: int = 2) -> Tuple[PanelDataset, GroundTruth]:
    """z_it = x_it'beta + s_it'alpha_i + eps_it, eps ~ AL(0, 1, p), y = 1{z > 0}.

    x_it = (1, U(0,1), ...) with len(beta_true) entries, s_it = (1, U(0,1), ...)
    with l entries, alpha_i ~ N(0, alpha_variance * I_l).
    """
    p = validate_quantile(p)
    if n < 1 or T < 1 or l < 1:
        raise ConfigError("n, T and l must be >= 1")
    if alpha_variance < 0:
        raise ConfigError("alpha variance must be >= 0", field="alpha_variance")
    beta = np.asarray(beta_true, dtype=float)
    k = beta.size
    if k < 1:
        raise ConfigError("beta needs at least the intercept", field="beta")

    rng = RandomStream(seed)
    X = np.concatenate([np.ones((n, T, 1)), rng.uniform(size=(n, T, k - 1))], axis=2)
    S = np.concatenate([np.ones((n, T, 1)), rng.uniform(size=(n, T, l - 1))], axis=2)
    alpha = np.sqrt(alpha_variance) * rng.standard_normal((n, l))
    eps = sample_al(AlParams(0.0, 1.0, p), rng, size=(n, T))
    z = X @ beta + np.einsum("ntl,nl->nt", S, alpha) + eps
    y = (z > 0).astype(np.int8)

    x_names = (INTERCEPT,) + tuple(f"x{j + 2}" for j in range(k - 1))
    s_names = (INTERCEPT,) + tuple(f"s{j + 2}" for j in range(l - 1))
    blocks = tuple(
        IndividualBlock(id=i + 1, y=y[i], X=X[i], S=S[i], times=np.arange(1, T + 1))
        for i in range(n)
    )
    data = PanelDataset(individuals=blocks, x_names=x_names, s_names=s_names)
    truth = GroundTruth(beta=beta, alpha=alpha, z=z.reshape(-1), alpha_variance=float(alpha_variance),
                        p=p, seed=int(seed))
    logger.info("simulated n=%d T=%d p=%s: %d zeros, %d ones", n, T, p, data.n_obs - int(y.sum()), int(y.sum()))
    return data, truth
