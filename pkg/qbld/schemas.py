from __future__ import annotations

import json
from pathlib import Path
from typing import List, Literal, Optional, Union

import numpy as np
from pydantic import AliasChoices, BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from .errors import ConfigError, FileAccessError
from .models import Priors
from .sampler import SamplerConfig


# --- priors
class PriorConfig(BaseModel):
    beta0: Optional[List[float]] = None          # default 0_k
    B0: Union[float, List[float], List[List[float]]] = Field(
        default=10.0, validation_alias=AliasChoices("B0", "B0_diag_or_full"))
    c1: float = Field(default=10.0, gt=0)
    d1: float = Field(default=9.0, gt=0)

    def to_priors(self, k: int) -> Priors:
        beta0 = np.zeros(k) if self.beta0 is None else np.asarray(self.beta0, dtype=float)
        if beta0.shape != (k,):
            raise ConfigError(f"expected {k} entries, got {beta0.size}", field="prior.beta0")
        B0 = np.asarray(self.B0, dtype=float)
        if B0.ndim == 0:
            B0 = float(B0) * np.eye(k)
        elif B0.ndim == 1:
            if B0.size != k:
                raise ConfigError(f"diagonal needs {k} entries, got {B0.size}", field="prior.B0")
            B0 = np.diag(B0)
        return Priors(beta0=beta0, B0=B0, c1=self.c1, d1=self.d1)


# --- panel file layout
class ColumnSpec(BaseModel):
    id: str = "id"
    time: str = "time"
    outcome: str = "y"
    x_columns: List[str] = Field(default_factory=list)
    s_columns: List[str] = Field(default_factory=list)
    x_intercept: bool = True
    s_intercept: bool = True
    lagged_outcome: bool = False      # adds y_{t-1} to X, drops each first period

    @model_validator(mode="after")
    def _has_columns(self):
        if not self.x_columns and not self.x_intercept and not self.lagged_outcome:
            raise ValueError("X needs at least one column or the intercept")
        if not self.s_columns and not self.s_intercept:
            raise ValueError("S needs at least one column or the intercept")
        return self


class SimulationConfig(BaseModel):
    n: int = Field(default=500, ge=1)
    T: int = Field(default=10, ge=1)
    beta: List[float] = Field(default_factory=lambda: [-5.0, 6.0, 4.0])
    alpha_variance: float = Field(default=1.0, ge=0)
    l: int = Field(default=2, ge=1)

    @field_validator("beta")
    @classmethod
    def _beta_nonempty(cls, v):
        if not v:
            raise ValueError("beta needs at least the intercept")
        return v


# --- run configuration (one quantile per file)
class RunConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    p: float
    draws: int = Field(default=15000, ge=1)
    burn_in: int = Field(default=3000, ge=0)
    seed: int = 0
    thin: int = Field(default=1, ge=1)
    algorithm: Literal["blocked", "nonblocked"] = "blocked"
    store_alpha: bool = True
    parallel_individuals: bool = False
    chunk_size: Optional[int] = Field(default=250, ge=1)
    batch_size: Optional[int] = Field(default=None, ge=1)
    debug: bool = False
    prior: PriorConfig = Field(default_factory=PriorConfig)

    id_column: str = "id"
    time_column: str = "time"
    outcome_column: str = "y"
    x_columns: List[str] = Field(default_factory=list)
    s_columns: List[str] = Field(default_factory=list)
    x_intercept: bool = True
    s_intercept: bool = True
    lagged_outcome: bool = False

    simulation: SimulationConfig = Field(default_factory=SimulationConfig)
    alpha_from_prior: bool = False
    loglik_mode: Literal["posterior_mean", "per_draw"] = "posterior_mean"

    @field_validator("p")
    @classmethod
    def _p_open_interval(cls, v: float) -> float:
        if not 0.0 < v < 1.0:
            raise ValueError("p must lie in the open interval (0, 1)")
        return v

    @model_validator(mode="after")
    def _burn_in_below_draws(self):
        if self.burn_in >= self.draws:
            raise ValueError(f"burn_in ({self.burn_in}) must be smaller than draws ({self.draws})")
        return self

    def column_spec(self) -> ColumnSpec:
        return ColumnSpec(
            id=self.id_column, time=self.time_column, outcome=self.outcome_column,
            x_columns=self.x_columns, s_columns=self.s_columns,
            x_intercept=self.x_intercept, s_intercept=self.s_intercept,
            lagged_outcome=self.lagged_outcome,
        )

    def sampler_config(self, algorithm: Optional[str] = None) -> SamplerConfig:
        return SamplerConfig(
            algorithm=algorithm or self.algorithm, total_draws=self.draws, burn_in=self.burn_in,
            seed=self.seed, store_alpha=self.store_alpha, parallel_individuals=self.parallel_individuals,
            thin=self.thin, chunk_size=self.chunk_size, debug=self.debug,
        )


# --- covariate effects
class EffectFilter(BaseModel):
    column: str
    equals: Optional[float] = None
    min: Optional[float] = None
    max: Optional[float] = None


class EffectRequest(BaseModel):
    """Contrast x_dagger vs x_ddagger on one X column.

    pair: from_value -> to_value; delta: observed -> observed + delta;
    indicator: 0 -> 1.
    """
    name: Optional[str] = None
    column: str
    kind: Literal["pair", "delta", "indicator"] = "pair"
    from_value: Optional[float] = None
    to_value: Optional[float] = None
    delta: Optional[float] = None
    filter: Optional[EffectFilter] = None

    @model_validator(mode="after")
    def _well_formed(self):
        if self.kind == "pair" and (self.from_value is None or self.to_value is None):
            raise ValueError("pair contrast needs from_value and to_value")
        if self.kind == "delta" and self.delta is None:
            raise ValueError("delta contrast needs delta")
        return self

    @property
    def label(self) -> str:
        if self.name:
            return self.name
        if self.kind == "pair":
            return f"{self.column}: {self.from_value:g} -> {self.to_value:g}"
        if self.kind == "delta":
            return f"{self.column}: +{self.delta:g}"
        return f"{self.column}: 0 -> 1"


class EffectsFile(BaseModel):
    effects: List[EffectRequest]


# --- loading
def _read_json(path: Union[str, Path]) -> dict:
    try:
        raw = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise FileAccessError(f"cannot read {path}: {exc}") from exc
    try:
        return json.loads(raw)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path} is not valid JSON: {exc}") from exc


def _validated(model, data: dict):
    try:
        return model.model_validate(data)
    except ValidationError as exc:
        err = exc.errors()[0]
        where = ".".join(str(part) for part in err["loc"]) or None
        raise ConfigError(err["msg"], field=where) from exc


def load_config(path: Union[str, Path], seed: Optional[int] = None) -> RunConfig:
    data = _read_json(path)
    if seed is not None and isinstance(data, dict):
        data["seed"] = seed
    return _validated(RunConfig, data)


def load_effects(path: Union[str, Path]) -> EffectsFile:
    data = _read_json(path)
    if isinstance(data, list):
        data = {"effects": data}
    return _validated(EffectsFile, data)
