"""Fixed-parameter one-step forecasting, log-scale losses, BIC and Diebold-Mariano tests."""

from __future__ import annotations

import datetime as dt
import logging
import math
import warnings
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np
from scipy import stats

from .base import ModelFit
from .base import bic as _bic
from .errors import DomainError, FitError, SingularMatrixError, StateError, StateWarning, ZeroVarianceError
from .numerics import tail_prob
from .panel import ResidualPanel

logger = logging.getLogger(__name__)

PROXY_FLOOR = 1e-16
OOS_LENGTH = 252
DM_MIN_LENGTH = 30


@dataclass(frozen=True)
class ForecastRecord:
    date: dt.date
    model: str
    matrix: str | None
    log_hhat: np.ndarray
    proxy: np.ndarray

    @property
    def hhat(self) -> np.ndarray:
        return np.exp(self.log_hhat)

    @property
    def loss(self) -> float:
        """Cross-sectional mean squared log forecast error for this period."""
        return float(np.mean((self.log_hhat - self.proxy) ** 2))


@dataclass(frozen=True)
class DmResult:
    statistic: float
    pvalue: float
    mean_loss_a: float
    mean_loss_b: float


def proxy(eps: np.ndarray) -> np.ndarray:
    return np.log(np.maximum(np.asarray(eps, dtype=float) ** 2, PROXY_FLOOR))


def forecast_loop(
    fit: ModelFit,
    res: ResidualPanel | np.ndarray,
    oos_start: int,
    dates: Sequence[dt.date] | None = None,
    strict: bool = False,
) -> list[ForecastRecord]:
    """One-step forecasts for every t in [oos_start, T) with the parameters held fixed.

    The filter runs over realized data through t - 1 to produce the forecast
    for t; the proxy is log(max(eps_t^2, 1e-16)). A diverging filter truncates
    the window with a :class:`StateWarning` (or raises :class:`StateError`
    when ``strict``); an empty window always raises.
    """
    values = np.asarray(getattr(res, "values", res), dtype=float)
    dates = tuple(getattr(res, "dates", dates) or range(values.shape[0]))
    T = values.shape[0]
    if not 1 <= oos_start < T:
        raise DomainError(f"oos_start must lie in [1, {T - 1}], got {oos_start}")
    try:
        path = fit.log_forecast_path(values[:T - 1])
    except (FitError, SingularMatrixError, FloatingPointError) as exc:
        raise StateError(f"{fit.model}: filter failed: {exc}") from exc
    records: list[ForecastRecord] = []
    for t in range(oos_start, T):
        lh = path[t - 1]
        if not np.all(np.isfinite(lh)):
            msg = f"{fit.model}: filter diverged at t={t}; window truncated to {len(records)} records"
            if strict or not records:
                raise StateError(msg, records)
            warnings.warn(msg, StateWarning)
            break
        records.append(ForecastRecord(dates[t], fit.model, fit.matrix, lh.copy(), proxy(values[t])))
    return records


def _stack(records: Sequence[ForecastRecord]) -> tuple[np.ndarray, np.ndarray]:
    if not records:
        raise DomainError("no forecast records")
    return np.array([r.log_hhat for r in records]), np.array([r.proxy for r in records])


def rmsfe_mafe(records: Sequence[ForecastRecord]) -> tuple[float, float]:
    """RMSFE and MAFE of log h-hat against the log squared residual proxy, over all (i, t)."""
    lh, px = _stack(records)
    err = lh - px
    return float(math.sqrt(np.mean(err**2))), float(np.mean(np.abs(err)))


def loss_series(records: Sequence[ForecastRecord]) -> np.ndarray:
    """Per-period cross-sectional mean of squared log forecast errors."""
    lh, px = _stack(records)
    return np.mean((lh - px) ** 2, axis=1)


def bic(loglik: float, k: int, t_eff: int) -> float:
    return _bic(loglik, k, t_eff)


def dm_test(loss_a: np.ndarray, loss_b: np.ndarray, harvey: bool = False) -> DmResult:
    """Diebold-Mariano test at horizon one on d_t = L_a,t - L_b,t.

    The statistic is mean(d) / sqrt(var(d) / T) with the sample variance and
    a two-sided normal p-value. ``harvey`` applies the small-sample correction
    and Student-t reference. Identical loss series give (0, 1); a constant
    non-zero differential raises :class:`ZeroVarianceError`.
    """
    a = np.asarray(loss_a, dtype=float)
    b = np.asarray(loss_b, dtype=float)
    if a.shape != b.shape or a.ndim != 1:
        raise DomainError("loss series must be 1-d and of equal length")
    T = a.size
    if T < DM_MIN_LENGTH:
        raise DomainError(f"need at least {DM_MIN_LENGTH} periods, got {T}")
    if not (np.all(np.isfinite(a)) and np.all(np.isfinite(b))):
        raise DomainError("losses must be finite")
    d = a - b
    ma, mb = float(a.mean()), float(b.mean())
    if np.all(d == 0.0):
        return DmResult(0.0, 1.0, ma, mb)
    var = float(np.var(d, ddof=1))
    if var <= 1e-28 * max(1.0, float(np.abs(d).max())) ** 2:
        raise ZeroVarianceError("loss differential is constant")
    stat = float(d.mean() / math.sqrt(var / T))
    if harvey:
        stat *= math.sqrt((T - 1) / T)
        p = float(min(1.0, 2.0 * stats.t.sf(abs(stat), T - 1)))
    else:
        p = tail_prob("normal", stat)
    return DmResult(stat, p, ma, mb)


def rank_by_mean_loss(mean_losses: Mapping[str, float]) -> dict[str, int]:
    """Ranks 1..m by ascending mean loss; ties keep the input order."""
    order = sorted(mean_losses, key=lambda m: (mean_losses[m], list(mean_losses).index(m)))
    return {m: i + 1 for i, m in enumerate(order)}


def best_config(rmsfe: Mapping[tuple[str, str | None], float]) -> dict[str, str | None]:
    """For each model the matrix with the lowest RMSFE (first listed wins ties)."""
    best: dict[str, tuple[float, str | None]] = {}
    for (model, matrix), value in rmsfe.items():
        if model not in best or value < best[model][0]:
            best[model] = (value, matrix)
    return {m: v[1] for m, v in best.items()}


@dataclass(frozen=True)
class DmTable:
    models: tuple[str, ...]
    matrices: tuple[str | None, ...]
    mean_loss: np.ndarray
    rank: tuple[int, ...]
    statistic: np.ndarray
    pvalue: np.ndarray

    def ranking_rows(self) -> list[dict]:
        rows = [
            {"model": m, "matrix": w or "", "mean_loss": float(l), "rank": r}
            for m, w, l, r in zip(self.models, self.matrices, self.mean_loss, self.rank)
        ]
        return sorted(rows, key=lambda r: r["rank"])


def dm_matrix(
    losses: Mapping[tuple[str, str | None], np.ndarray],
    rmsfe: Mapping[tuple[str, str | None], float] | None = None,
    harvey: bool = False,
) -> DmTable:
    """Pairwise DM tests between models, each at its best-RMSFE matrix.

    ``losses`` maps (model, matrix) to the per-period loss series. Without
    ``rmsfe`` the key with the lowest mean loss is used per model.
    """
    if rmsfe is None:
        rmsfe = {key: float(np.sqrt(np.mean(v))) for key, v in losses.items()}
    chosen = best_config({k: v for k, v in rmsfe.items() if k in losses})
    models = tuple(chosen)
    if len(models) < 2:
        raise DomainError("need at least two models")
    series = [np.asarray(losses[(m, chosen[m])], dtype=float) for m in models]
    m = len(models)
    S = np.zeros((m, m))
    P = np.ones((m, m))
    for i in range(m):
        for j in range(i + 1, m):
            try:
                r = dm_test(series[i], series[j], harvey)
                S[i, j], S[j, i] = r.statistic, -r.statistic
                P[i, j] = P[j, i] = r.pvalue
            except ZeroVarianceError:
                S[i, j] = S[j, i] = np.nan
                P[i, j] = P[j, i] = np.nan
    mean_loss = np.array([s.mean() for s in series])
    ranks = rank_by_mean_loss(dict(zip(models, mean_loss)))
    return DmTable(models, tuple(chosen[x] for x in models), mean_loss, tuple(ranks[x] for x in models), S, P)
