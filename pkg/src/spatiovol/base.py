"""Common result type for every fitted volatility model."""

from __future__ import annotations

import json
import math
import time
from contextlib import contextmanager
from dataclasses import dataclass, field

import numpy as np

LOG_FLOOR = 1e-16


@dataclass(kw_only=True)
class ModelFit:
    """A fitted model.

    Subclasses implement :meth:`forecast_path`, which filters a residual matrix
    with the parameters held fixed and returns one-step-ahead variance
    forecasts: row ``t`` is the forecast for period ``t + 1`` made with data up
    to and including ``t``.
    """

    model: str
    k: int
    loglik: float
    t_eff: int
    converged: bool = True
    fit_seconds: float = 0.0
    seeds: tuple = ()
    matrix: str | None = None
    objective: float | None = None
    notes: dict = field(default_factory=dict)

    @property
    def bic(self) -> float:
        return self.k * math.log(self.t_eff) - 2.0 * self.loglik

    def forecast_path(self, eps: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def log_forecast_path(self, eps: np.ndarray) -> np.ndarray:
        return np.log(self.forecast_path(eps))

    def named_params(self) -> dict:
        raise NotImplementedError

    def to_dict(self) -> dict:
        out = {
            "model": self.model,
            "matrix": self.matrix,
            "params": _jsonable(self.named_params()),
            "k": self.k,
            "loglik": self.loglik,
            "bic": self.bic,
            "bic_timebase": self.t_eff,
            "fit_seconds": self.fit_seconds,
            "converged": self.converged,
            "seeds": list(self.seeds),
        }
        if self.objective is not None:
            out["objective"] = self.objective
        if self.notes:
            out["notes"] = _jsonable(self.notes)
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.floating, np.integer, np.bool_)):
        return obj.item()
    return obj


def bic(loglik: float, k: int, t_eff: int) -> float:
    """k ln(t_eff) - 2 loglik."""
    if t_eff < 2:
        raise ValueError("t_eff must be at least 2")
    return k * math.log(t_eff) - 2.0 * loglik


@contextmanager
def stopwatch():
    box = [0.0]
    t0 = time.perf_counter()
    try:
        yield box
    finally:
        box[0] = time.perf_counter() - t0


def panel_scale(eps: np.ndarray) -> float:
    """Common variance scale used to condition the optimizers."""
    s2 = float(np.mean(np.var(eps, axis=0)))
    if not s2 > 0:
        raise ValueError("residual panel has zero variance")
    return s2
