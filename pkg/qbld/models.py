"""Domain records: panel data, priors, model spec, sampler state and draws."""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Any, Dict, Hashable, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from .distributions import MixtureConstants, cholesky, mixture_constants, validate_quantile
from .errors import ConfigError, InvariantViolation, NumericalError


@dataclass(frozen=True)
class IndividualBlock:
    id: Hashable
    y: np.ndarray   # (T_i,) in {0, 1}
    X: np.ndarray   # (T_i, k)
    S: np.ndarray   # (T_i, l)
    times: Optional[np.ndarray] = None

    def __post_init__(self):
        T = self.y.shape[0]
        if T < 1:
            raise ConfigError(f"individual {self.id!r} has no observations")
        if self.X.shape[0] != T or self.S.shape[0] != T:
            raise ConfigError(f"individual {self.id!r}: X/S rows do not match y")
        if not np.all((self.y == 0) | (self.y == 1)):
            raise ConfigError(f"individual {self.id!r}: outcome must be 0/1")

    @property
    def T(self) -> int:
        return int(self.y.shape[0])

    def periods(self) -> np.ndarray:
        return self.times if self.times is not None else np.arange(1, self.T + 1)


@dataclass(frozen=True)
class Bucket:
    """Individuals sharing one T_i, stacked into dense arrays."""
    T: int
    members: np.ndarray   # indices into PanelDataset.individuals
    rows: np.ndarray      # (m, T) indices into the flattened observation arrays
    y: np.ndarray         # (m, T)
    X: np.ndarray         # (m, T, k)
    S: np.ndarray         # (m, T, l)


@dataclass(frozen=True)
class PanelDataset:
    individuals: Tuple[IndividualBlock, ...]
    x_names: Tuple[str, ...]
    s_names: Tuple[str, ...]

    def __post_init__(self):
        if not self.individuals:
            raise ConfigError("panel has no individuals")
        if self.k < 1 or self.l < 1:
            raise ConfigError("need at least one common and one individual-specific covariate")
        for b in self.individuals:
            if b.X.shape[1] != self.k or b.S.shape[1] != self.l:
                raise ConfigError(f"individual {b.id!r}: covariate columns do not match k={self.k}, l={self.l}")

    @property
    def k(self) -> int:
        return len(self.x_names)

    @property
    def l(self) -> int:
        return len(self.s_names)

    @property
    def n(self) -> int:
        return len(self.individuals)

    @cached_property
    def lengths(self) -> np.ndarray:
        return np.array([b.T for b in self.individuals], dtype=int)

    @cached_property
    def offsets(self) -> np.ndarray:
        return np.concatenate([[0], np.cumsum(self.lengths)])

    @property
    def n_obs(self) -> int:
        return int(self.offsets[-1])

    @cached_property
    def y(self) -> np.ndarray:
        return np.concatenate([b.y for b in self.individuals]).astype(np.int8)

    @cached_property
    def X(self) -> np.ndarray:
        return np.vstack([b.X for b in self.individuals])

    @cached_property
    def S(self) -> np.ndarray:
        return np.vstack([b.S for b in self.individuals])

    @cached_property
    def owner(self) -> np.ndarray:
        """Individual index of every flattened observation."""
        return np.repeat(np.arange(self.n), self.lengths)

    @cached_property
    def period(self) -> np.ndarray:
        return np.arange(self.n_obs) - self.offsets[self.owner]

    def locate(self, row: int) -> Tuple[Hashable, int]:
        i = int(self.owner[row])
        return self.individuals[i].id, int(self.period[row])

    def buckets(self, chunk_size: Optional[int] = None) -> List[Bucket]:
        """Group individuals by T_i (ascending), split into chunks of at most chunk_size."""
        out: List[Bucket] = []
        for T in np.unique(self.lengths):
            members = np.flatnonzero(self.lengths == T)
            step = chunk_size or members.size
            for start in range(0, members.size, step):
                m = members[start:start + step]
                rows = self.offsets[m][:, None] + np.arange(T)[None, :]
                out.append(Bucket(
                    T=int(T), members=m, rows=rows,
                    y=self.y[rows], X=self.X[rows], S=self.S[rows],
                ))
        return out

    def one_share(self) -> float:
        return float(self.y.mean())


@dataclass(frozen=True)
class Priors:
    beta0: np.ndarray
    B0: np.ndarray
    c1: float = 10.0
    d1: float = 9.0

    def __post_init__(self):
        object.__setattr__(self, "beta0", np.atleast_1d(np.asarray(self.beta0, dtype=float)))
        object.__setattr__(self, "B0", np.atleast_2d(np.asarray(self.B0, dtype=float)))
        B0 = self.B0
        if B0.shape != (self.beta0.size, self.beta0.size):
            raise ConfigError("B0 must be k x k", field="prior.B0")
        if not np.allclose(B0, B0.T):
            raise ConfigError("B0 must be symmetric", field="prior.B0")
        try:
            cholesky(B0, "B0")
        except NumericalError as exc:
            raise ConfigError(exc.message, field="prior.B0") from exc
        if not (self.c1 > 0 and self.d1 > 0):
            raise ConfigError("c1 and d1 must be > 0", field="prior")

    @classmethod
    def default(cls, k: int, variance: float = 10.0) -> "Priors":
        return cls(beta0=np.zeros(k), B0=variance * np.eye(k))

    @cached_property
    def B0_inv(self) -> np.ndarray:
        return np.linalg.inv(self.B0)

    @property
    def phi2_prior_mean(self) -> float:
        # mean of IG(c1/2, d1/2)
        return self.d1 / (self.c1 - 2.0) if self.c1 > 2 else self.d1 / self.c1


@dataclass(frozen=True)
class ModelSpec:
    p: float
    priors: Priors

    def __post_init__(self):
        validate_quantile(self.p)

    @property
    def constants(self) -> MixtureConstants:
        return mixture_constants(self.p)


@dataclass
class McmcState:
    """Current draw. z and w are flattened in dataset order (see PanelDataset.offsets)."""
    beta: np.ndarray    # (k,)
    alpha: np.ndarray   # (n, l)
    z: np.ndarray       # (N,)
    w: np.ndarray       # (N,)
    phi2: float


def validate_state(state: McmcState, data: PanelDataset) -> None:
    if state.z.shape != (data.n_obs,) or state.w.shape != (data.n_obs,):
        raise InvariantViolation("z/w do not match the panel shape")
    if state.beta.shape != (data.k,) or state.alpha.shape != (data.n, data.l):
        raise InvariantViolation("beta/alpha do not match (k, n, l)")
    if not (np.isfinite(state.phi2) and state.phi2 > 0):
        raise InvariantViolation(f"phi2 must be > 0, got {state.phi2}")
    bad_sign = np.flatnonzero((state.z > 0) != (data.y == 1))
    if bad_sign.size:
        who, t = data.locate(int(bad_sign[0]))
        raise InvariantViolation(
            f"z={state.z[bad_sign[0]]:.6g} disagrees with y={int(data.y[bad_sign[0]])}",
            individual=who, period=t)
    bad_w = np.flatnonzero(~(state.w > 0) | ~np.isfinite(state.w))
    if bad_w.size:
        who, t = data.locate(int(bad_w[0]))
        raise InvariantViolation(f"w={state.w[bad_w[0]]:.6g} is not positive", individual=who, period=t)


@dataclass
class DrawStore:
    beta: np.ndarray                  # (G, k)
    phi2: np.ndarray                  # (G,)
    alpha: Optional[np.ndarray] = None  # (G, n, l)
    x_names: Tuple[str, ...] = ()
    s_names: Tuple[str, ...] = ()
    individual_ids: Tuple[Any, ...] = ()
    metadata: Dict[str, Any] = field(default_factory=dict)

    @property
    def G(self) -> int:
        return int(self.phi2.shape[0])

    @property
    def has_alpha(self) -> bool:
        return self.alpha is not None

    def beta_names(self) -> List[str]:
        names = self.x_names or tuple(str(j + 1) for j in range(self.beta.shape[1]))
        return [f"beta[{name}]" for name in names]

    def alpha_names(self) -> List[str]:
        if self.alpha is None:
            return []
        n, l = self.alpha.shape[1:]
        ids = self.individual_ids or tuple(range(n))
        s_names = self.s_names or tuple(str(j + 1) for j in range(l))
        return [f"alpha[{i}][{s}]" for i in ids for s in s_names]

    def columns(self, include_alpha: bool = True) -> Dict[str, np.ndarray]:
        cols: Dict[str, np.ndarray] = dict(zip(self.beta_names(), self.beta.T))
        cols["phi2"] = self.phi2
        if include_alpha and self.alpha is not None:
            flat = self.alpha.reshape(self.G, -1)
            cols.update(zip(self.alpha_names(), flat.T))
        return cols

    def column(self, name: str) -> np.ndarray:
        return self.columns()[name]

    def to_frame(self, include_alpha: bool = True) -> pd.DataFrame:
        return pd.DataFrame(self.columns(include_alpha))

    def write_csv(self, path) -> None:
        self.to_frame().to_csv(path, index_label="draw", float_format="%.17g")

    @classmethod
    def read_csv(cls, path, x_names: Sequence[str], s_names: Sequence[str],
                 individual_ids: Sequence[Any] = (), metadata: Optional[dict] = None) -> "DrawStore":
        try:
            frame = pd.read_csv(path, index_col="draw", float_precision="round_trip")
        except (pd.errors.ParserError, pd.errors.EmptyDataError, UnicodeDecodeError) as exc:
            raise ConfigError(f"malformed draws file {path}: {exc}") from exc
        except ValueError as exc:
            raise ConfigError(f"draws file {path} has no 'draw' column") from exc
        beta_cols = [f"beta[{name}]" for name in x_names]
        missing = [c for c in beta_cols + ["phi2"] if c not in frame.columns]
        if missing:
            raise ConfigError(f"draws file lacks columns {missing}")
        alpha_cols = [c for c in frame.columns if c.startswith("alpha[")]
        if alpha_cols and len(alpha_cols) % max(len(s_names), 1):
            raise ConfigError(f"draws file has {len(alpha_cols)} alpha columns, "
                              f"not a multiple of l={len(s_names)}")
        try:
            beta = frame[beta_cols].to_numpy(dtype=float)
            phi2 = frame["phi2"].to_numpy(dtype=float)
            alpha = None
            if alpha_cols:
                alpha = frame[alpha_cols].to_numpy(dtype=float).reshape(len(frame), -1, len(s_names))
        except ValueError as exc:
            raise ConfigError(f"draws file {path} holds non-numeric values: {exc}") from exc
        return cls(
            beta=beta,
            phi2=phi2,
            alpha=alpha,
            x_names=tuple(x_names), s_names=tuple(s_names),
            individual_ids=tuple(individual_ids),
            metadata=dict(metadata or {}),
        )
