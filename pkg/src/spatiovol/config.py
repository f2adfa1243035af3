"""Experiment and simulation configuration, read from YAML."""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any

import yaml

from .errors import ConfigError
from .networks import KINDS

MODEL_IDS = ("dcc", "bekk", "abekk", "stbekk", "dstarch", "logarch", "spgarchx", "stgarch", "stegarch")
SPATIAL_MODELS = frozenset({"stbekk", "dstarch", "spgarchx", "stgarch", "stegarch"})
DGPS = ("garch", "egarch", "dcc", "bekk", "abekk", "stbekk", "dstarch", "spgarchx", "stgarch", "stegarch")
SYNTH_MATRICES = ("complete", "ring", "directed_ring")


@dataclass(frozen=True)
class ModelSpec:
    name: str
    options: dict = field(default_factory=dict)

    @property
    def spatial(self) -> bool:
        return self.name in SPATIAL_MODELS


@dataclass(frozen=True)
class SynthConfig:
    dgp: str
    n: int
    T: int
    seed: int = 0
    matrix: str = "complete"
    k: int = 2
    params: dict = field(default_factory=dict)
    output: str | None = None

    def __post_init__(self) -> None:
        if self.dgp not in DGPS:
            raise ConfigError("dgp", f"unknown DGP {self.dgp!r}; choose from {', '.join(DGPS)}")
        if not isinstance(self.n, int) or self.n < 1:
            raise ConfigError("n", "must be a positive integer")
        if self.dgp not in ("garch", "egarch") and self.n < 2:
            raise ConfigError("n", f"the {self.dgp} DGP needs at least two assets")
        if not isinstance(self.T, int) or self.T < 10:
            raise ConfigError("T", "must be an integer of at least 10")
        if self.matrix not in SYNTH_MATRICES:
            raise ConfigError("matrix", f"choose from {', '.join(SYNTH_MATRICES)}")
        if not isinstance(self.params, dict):
            raise ConfigError("params", "must be a mapping")


@dataclass(frozen=True)
class ExperimentConfig:
    models: tuple[ModelSpec, ...]
    matrices: tuple[str, ...]
    output: str
    input: str | None = None
    synthetic: SynthConfig | None = None
    prices: bool = False
    oos_length: int = 252
    alpha: float = 0.05
    k: int = 5
    seed: int = 0
    n_starts: int = 3
    parallelism: int = 1

    def __post_init__(self) -> None:
        if (self.input is None) == (self.synthetic is None):
            raise ConfigError("input", "give exactly one of 'input' and 'synthetic'")
        if not self.models:
            raise ConfigError("models", "at least one model is required")
        for m in self.models:
            if m.name not in MODEL_IDS:
                raise ConfigError("models", f"unknown model {m.name!r}; choose from {', '.join(MODEL_IDS)}")
        bad = [k for k in self.matrices if k not in KINDS]
        if bad:
            raise ConfigError("matrices", f"unknown kinds {bad}; choose from {', '.join(KINDS)}")
        if not self.matrices and any(m.spatial for m in self.models):
            raise ConfigError("matrices", "spatial models need at least one weight matrix")
        if not isinstance(self.oos_length, int) or self.oos_length < 1:
            raise ConfigError("oos_length", "must be a positive integer")
        if not 0.0 < self.alpha < 1.0:
            raise ConfigError("alpha", "must lie in (0, 1)")
        if not isinstance(self.k, int) or self.k < 1:
            raise ConfigError("k", "must be a positive integer")
        if not isinstance(self.n_starts, int) or self.n_starts < 1:
            raise ConfigError("n_starts", "must be a positive integer")
        if not isinstance(self.parallelism, int) or self.parallelism < 1:
            raise ConfigError("parallelism", "must be a positive integer")

    def check_length(self, T: int) -> None:
        """oos_length must be below half the residual sample."""
        if self.oos_length >= T / 2:
            raise ConfigError("oos_length", f"{self.oos_length} is not below T/2 = {T / 2:g}")

    def digest(self) -> str:
        blob = json.dumps(asdict(self), sort_keys=True, default=str).encode()
        return hashlib.sha256(blob).hexdigest()


def _models(raw: Any) -> tuple[ModelSpec, ...]:
    if not isinstance(raw, list):
        raise ConfigError("models", "must be a list")
    out = []
    for item in raw:
        if isinstance(item, str):
            out.append(ModelSpec(item))
        elif isinstance(item, dict) and "name" in item:
            opts = {k: v for k, v in item.items() if k != "name"}
            out.append(ModelSpec(str(item["name"]), opts))
        else:
            raise ConfigError("models", f"entry {item!r} is neither a name nor a mapping with 'name'")
    return tuple(out)


def _known(raw: dict, allowed: set[str], where: str) -> None:
    extra = set(raw) - allowed
    if extra:
        raise ConfigError(sorted(extra)[0], f"unknown key in {where}")


def synth_from_dict(raw: dict) -> SynthConfig:
    if not isinstance(raw, dict):
        raise ConfigError("synthetic", "must be a mapping")
    _known(raw, {"dgp", "n", "T", "seed", "matrix", "k", "params", "output"}, "simulation config")
    for key in ("dgp", "n", "T"):
        if key not in raw:
            raise ConfigError(key, "is required")
    return SynthConfig(**raw)


def experiment_from_dict(raw: dict) -> ExperimentConfig:
    if not isinstance(raw, dict):
        raise ConfigError("config", "must be a mapping")
    allowed = {"input", "synthetic", "prices", "oos_length", "models", "matrices", "alpha", "k", "seed",
               "n_starts", "output", "parallelism"}
    _known(raw, allowed, "experiment config")
    for key in ("models", "output"):
        if key not in raw:
            raise ConfigError(key, "is required")
    kw = dict(raw)
    kw["models"] = _models(raw["models"])
    kw["matrices"] = tuple(raw.get("matrices") or ())
    if raw.get("synthetic") is not None:
        kw["synthetic"] = synth_from_dict(raw["synthetic"])
    return ExperimentConfig(**kw)


def _read_yaml(path: str | Path) -> dict:
    try:
        raw = yaml.safe_load(Path(path).read_text())
    except yaml.YAMLError as exc:
        raise ConfigError("config", f"invalid YAML: {exc}") from None
    return raw or {}


def load_experiment(path: str | Path) -> ExperimentConfig:
    return experiment_from_dict(_read_yaml(path))


def load_synth(path: str | Path) -> SynthConfig:
    return synth_from_dict(_read_yaml(path))
