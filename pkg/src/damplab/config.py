"""Experiment configuration: a JSON document validated into an ExperimentConfig."""

from __future__ import annotations

import hashlib
import json
import math
from typing import Literal

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from .damping import DampingProfile, Variant
from .grid import CircleGrid
from .stationary import default_n

KINDS = ("resolvent-sweep", "decay-run", "lemma-certify", "esmall-probe")
DEFAULT_Q = [16.0, 32.0, 64.0, 128.0, 256.0, 512.0, 1024.0]


class ConfigError(ValueError):
    pass


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", validate_assignment=False)


class GridConfig(_Strict):
    scheme: Literal["fourier", "fd2", "fd4"] | None = None
    n: int | None = None  # fixed node count; overrides the per-q rule
    n_per_q: int = Field(8, ge=1)
    n_min: int = Field(256, ge=0)


class DataConfig(_Strict):
    family: Literal["gaussian-strip", "plane-wave"] = "gaussian-strip"
    k: list[int] = Field(default_factory=lambda: [8])
    m: int = 1
    width: float | None = Field(None, gt=0)

    @field_validator("k", mode="before")
    @classmethod
    def _listify(cls, v):
        return [v] if isinstance(v, int) else v


class ExperimentConfig(_Strict):
    kind: Literal["resolvent-sweep", "decay-run", "lemma-certify", "esmall-probe"]
    sigma: float = math.pi / 2
    beta: float = 0.0
    c0: float = 1.0
    variant: Literal["exact-V", "scaled", "plateau-perturbed"] = "exact-V"
    variant_param: float | None = None
    grid: GridConfig = Field(default_factory=GridConfig)
    q: list[float] = Field(default_factory=lambda: list(DEFAULT_Q))
    E_policy: Literal["all-modes", "fixed", "q2-fraction"] | None = None
    E_values: list[float] | None = None
    E_cut: float = Field(1.0, ge=0)
    q_window: float = Field(1.0, ge=0)
    tol: float = Field(1e-6, gt=0)
    tau: float | None = None
    psi: Literal["bump"] = "bump"
    N: int | None = Field(None, ge=0)
    cases: list[Literal["1", "2", "3", "4"]] = Field(default_factory=lambda: ["1", "2", "3", "4"])
    data: DataConfig = Field(default_factory=DataConfig)
    T: float = Field(1000.0, gt=0)
    dt: float = Field(0.05, gt=0)
    sample_stride: int = Field(20, ge=1)
    fit_window: tuple[float, float] | None = None
    sup_window: tuple[float, float] | None = None
    seed: int = 0
    out: str | None = None

    @field_validator("sigma")
    @classmethod
    def _sigma(cls, v):
        if not 0 < v < math.pi:
            raise ValueError("sigma out of (0, π)")
        return v

    @field_validator("beta")
    @classmethod
    def _beta(cls, v):
        if v < 0:
            raise ValueError("beta must be >= 0")
        return v

    @field_validator("c0")
    @classmethod
    def _c0(cls, v):
        if v < 1:
            raise ValueError("c0 must be >= 1")
        return v

    @field_validator("q")
    @classmethod
    def _q(cls, v):
        if not v:
            raise ValueError("q list must be nonempty")
        if any(x <= 0 for x in v):
            raise ValueError("q values must be positive")
        return sorted(v)

    @model_validator(mode="after")
    def _fill_defaults(self):
        if self.grid.scheme is None:
            self.grid.scheme = "fourier" if self.kind == "decay-run" else "fd2"
        if self.kind == "decay-run" and self.grid.n is None:
            self.grid.n = 256
        if self.grid.n is not None and (self.grid.n < 8 or self.grid.n % 2):
            raise ValueError("grid.n must be even and >= 8")
        if self.E_policy is None:
            self.E_policy = {"resolvent-sweep": "all-modes", "esmall-probe": "fixed",
                             "lemma-certify": "q2-fraction", "decay-run": "all-modes"}[self.kind]
        if self.E_values is None:
            self.E_values = {"esmall-probe": [0.0, 0.1, 0.25], "lemma-certify": [1.0]}.get(self.kind, [])
        if self.E_policy != "all-modes" and not self.E_values:
            raise ValueError(f"E_policy {self.E_policy!r} needs a nonempty E_values list")
        if self.tau is None:
            self.tau = (self.sigma + math.pi) / 2
        if not self.sigma < self.tau < math.pi:
            raise ValueError("tau must lie in (sigma, π)")
        if self.data.width is None:
            self.data.width = self.sigma / 4
        if self.fit_window is None:
            self.fit_window = (self.T / 50, self.T / 2)
        if self.sup_window is None:
            self.sup_window = (10.0 if self.T > 20 else self.T / 2, self.T)
        for name in ("fit_window", "sup_window"):
            lo, hi = getattr(self, name)
            if not 0 <= lo < hi <= self.T:
                raise ValueError(f"{name} must satisfy 0 <= lo < hi <= T")
        if self.out is None:
            self.out = f"runs/{self.kind}"
        self.profile()  # variant parameter checks
        return self

    def profile(self) -> DampingProfile:
        param = self.variant_param
        if param is None:
            param = 1.0 if self.variant == "scaled" else 0.0
        return DampingProfile(self.sigma, self.beta, self.c0, Variant(self.variant), param)

    def n_for(self, q: float) -> int:
        if self.grid.n is not None:
            return self.grid.n
        return default_n(q, self.grid.n_per_q, self.grid.n_min)

    def grid_for(self, q: float | None = None) -> CircleGrid:
        return CircleGrid(self.n_for(q) if q is not None else self.grid.n or 256, self.grid.scheme)

    def energies(self, q: float) -> list[float]:
        if self.E_policy == "q2-fraction":
            return [fr * q * q for fr in self.E_values]
        return list(self.E_values)

    def canonical(self) -> dict:
        return self.model_dump(mode="json")

    def config_hash(self) -> str:
        """SHA-256 of the canonical JSON, independent of key order; the output dir is excluded."""
        body = {k: v for k, v in self.canonical().items() if k != "out"}
        return hashlib.sha256(json.dumps(body, sort_keys=True, separators=(",", ":")).encode()).hexdigest()


def _no_duplicates(pairs):
    seen = {}
    for key, value in pairs:
        if key in seen:
            raise ConfigError(f"duplicate key {key!r}")
        seen[key] = value
    return seen


def _format_error(err: ValidationError) -> str:
    parts = []
    for e in err.errors():
        path = ".".join(str(p) for p in e["loc"]) or "<root>"
        msg = e["msg"].removeprefix("Value error, ")
        parts.append(f"{path}: {msg}")
    return "; ".join(parts)


def parse_config(text: str, **overrides) -> ExperimentConfig:
    """Parse and validate a JSON config; ``overrides`` replace top-level keys first."""
    try:
        raw = json.loads(text, object_pairs_hook=_no_duplicates) if text.strip() else {}
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object")
    raw.update({k: v for k, v in overrides.items() if v is not None})
    try:
        return ExperimentConfig.model_validate(raw)
    except ValidationError as exc:
        raise ConfigError(_format_error(exc)) from None


def serialize(config: ExperimentConfig) -> str:
    return json.dumps(config.canonical(), sort_keys=True, indent=2)
