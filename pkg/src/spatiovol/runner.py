"""Experiment runner: panel -> weight matrices -> model grid -> forecasts -> reports."""

from __future__ import annotations

import csv
import datetime as dt
import json
import logging
import platform
import time
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from . import __version__
from . import simulate as sim
from .config import ExperimentConfig, ModelSpec, SynthConfig
from .errors import ConfigError, InvalidParamError, SpatioVolError, StateWarning
from .evaluate import dm_matrix, forecast_loop, loss_series, rmsfe_mafe
from .mgarch import ProxBekkParams, bekk_fit, dcc_fit, proxbekk_fit
from .networks import WeightMatrix, build_weights, write_weights
from .panel import ResidualPanel, ReturnsPanel, business_days, fit_var1, load_panel, var1_residuals, write_panel
from .spatial import dstarch_fit, logarch_fit, spgarchx_fit, stegarch_fit, stgarch_fit
from .univariate import Egarch11Params, Garch11Params

logger = logging.getLogger(__name__)

EPOCH = dt.date(2000, 1, 3)
METRIC_FIELDS = ("model", "matrix", "k", "bic", "rmsfe", "mafe", "loglik", "t_eff", "n_forecasts")

DEFAULT_DGP_PARAMS = {
    "garch": {"omega": 0.05, "alpha": 0.10, "beta": 0.85},
    "egarch": {"omega": -0.1, "beta": 0.95, "alpha": 0.10, "gamma": -0.05},
    "dcc": {"omega": 0.05, "alpha": 0.08, "beta": 0.90, "lambda1": 0.05, "lambda2": 0.90, "corr": 0.4},
    "bekk": {"c_diag": 0.2, "c_off": 0.05, "a": 0.3, "b": 0.93},
    "abekk": {"c_diag": 0.2, "c_off": 0.05, "a": 0.3, "b": 0.90, "g": 0.2},
    "stbekk": {"s1": 0.3, "v": 0.05, "alpha0": 0.25, "alpha1": 0.05, "beta0": 0.90, "beta1": 0.03},
    "dstarch": {"rho": 0.3, "gamma": 0.25, "phi0": -0.5},
    "spgarchx": {"a0": 0.05, "a1": 0.08, "b1": 0.75, "a2": 0.05, "b2": 0.10},
    "stgarch": {"omega": 0.05, "a_self": 0.05, "a_sp": 0.05, "b_self": 0.70, "b_sp": 0.10},
    "stegarch": {"alpha1": -0.05, "rho0": 0.2, "rho1": 1.0, "lambda0": 0.2, "lambda1": 0.7, "theta": -0.1, "xi": 0.2},
}


# ---------------------------------------------------------------- simulation


def synth_weights(cfg: SynthConfig) -> np.ndarray:
    n = cfg.n
    if cfg.matrix == "complete":
        return sim.complete_weights(n)
    if cfg.matrix == "ring":
        return sim.circulant_weights(n, cfg.k)
    return np.roll(np.eye(n), 1, axis=1)


def simulate_panel(cfg: SynthConfig) -> ReturnsPanel:
    """Seeded draw from the configured DGP with standard-normal innovations."""
    base = DEFAULT_DGP_PARAMS[cfg.dgp]
    unknown = set(cfg.params) - set(base)
    if unknown:
        raise InvalidParamError(f"unknown {cfg.dgp} parameters {sorted(unknown)}")
    p = {**base, **cfg.params}
    n, T, seed = cfg.n, cfg.T, cfg.seed
    W = synth_weights(cfg) if n > 1 else np.zeros((1, 1))
    d = cfg.dgp
    if d == "garch":
        x = sim.garch_panel([Garch11Params(p["omega"], p["alpha"], p["beta"])] * n, T, seed)
    elif d == "egarch":
        x = sim.egarch_panel([Egarch11Params(p["omega"], p["beta"], p["alpha"], p["gamma"])] * n, T, seed)
    elif d == "dcc":
        qbar = np.full((n, n), p["corr"])
        np.fill_diagonal(qbar, 1.0)
        uni = [Garch11Params(p["omega"], p["alpha"], p["beta"])] * n
        x = sim.dcc_panel(uni, p["lambda1"], p["lambda2"], qbar, T, seed)
    elif d in ("bekk", "abekk"):
        C = np.tril(np.full((n, n), p["c_off"]), -1) + p["c_diag"] * np.eye(n)
        G = p["g"] * np.eye(n) if d == "abekk" else None
        if p["a"] ** 2 + p["b"] ** 2 + (0.5 * p["g"] ** 2 if G is not None else 0.0) >= 1:
            raise InvalidParamError("BEKK persistence must be below 1")
        x = sim.bekk_panel(C @ C.T, p["a"] * np.eye(n), p["b"] * np.eye(n), T, seed, G=G)
    elif d == "stbekk":
        Cint, A, B = ProxBekkParams(p["s1"], p["v"], p["alpha0"], p["alpha1"], p["beta0"], p["beta1"], W).matrices()
        if np.abs(np.linalg.eigvals(np.kron(A, A) + np.kron(B, B))).max() >= 1:
            raise InvalidParamError("proximity BEKK is not covariance stationary")
        x = sim.bekk_panel(Cint, A, B, T, seed)
    elif d == "dstarch":
        x = sim.dstarch_panel(p["rho"], p["gamma"], p["phi0"], W, T, seed)
    elif d == "spgarchx":
        x = sim.spgarchx_panel(p["a0"], p["a1"], p["b1"], p["a2"], p["b2"], W, T, seed)
    elif d == "stgarch":
        x = sim.stgarch_panel(p["omega"], p["a_self"], p["a_sp"], p["b_self"], p["b_sp"], W, T, seed)
    else:
        x = sim.stegarch_panel(p["alpha1"], p["rho0"], p["rho1"], p["lambda0"], p["lambda1"], p["theta"], p["xi"],
                               W, W, T, seed)
    tickers = tuple(f"A{i + 1:02d}" for i in range(n))
    return ReturnsPanel(business_days(EPOCH, T), tickers, np.ascontiguousarray(x))


# ---------------------------------------------------------------- model grid


def fit_model(spec: ModelSpec, res: ResidualPanel, w: WeightMatrix | None, n_starts: int, seed: int):
    o = dict(spec.options)
    ns = int(o.pop("n_starts", n_starts))
    name = spec.name
    if name == "dcc":
        fit = dcc_fit(res, n_starts=ns, seed=seed, **o)
    elif name in ("bekk", "abekk"):
        fit = bekk_fit(res, asymmetric=name == "abekk", n_starts=ns, seed=seed, **o)
        fit.model = name
    elif name == "stbekk":
        fit = proxbekk_fit(res, w, n_starts=ns, seed=seed, **o)
    elif name == "dstarch":
        fit = dstarch_fit(res, w, **o)
    elif name == "logarch":
        fit = logarch_fit(res, **o)
    elif name == "spgarchx":
        fit = spgarchx_fit(res, w, n_starts=ns, seed=seed, **o)
    elif name == "stgarch":
        fit = stgarch_fit(res, w, n_starts=ns, seed=seed, **o)
    elif name == "stegarch":
        fit = stegarch_fit(res, w, n_starts=ns, seed=seed, **o)
    else:  # pragma: no cover - validated by the config
        raise ConfigError("models", f"unknown model {name!r}")
    if w is not None:
        fit.matrix = w.kind
    return fit


@dataclass(frozen=True)
class Cell:
    model: ModelSpec
    matrix: str | None


@dataclass
class CellResult:
    model: str
    matrix: str | None
    ok: bool
    seconds: float
    metrics: dict | None = None
    fit_json: str | None = None
    losses: np.ndarray | None = None
    stage: str = ""
    error: str = ""
    message: str = ""


def _run_cell(cell: Cell, is_res: ResidualPanel, full_res: ResidualPanel, oos_start: int,
              w: WeightMatrix | None, n_starts: int, seed: int) -> CellResult:
    t0 = time.perf_counter()
    name, kind = cell.model.name, cell.matrix
    stage = "fit"
    try:
        fit = fit_model(cell.model, is_res, w, n_starts, seed)
        stage = "forecast"
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always", StateWarning)
            records = forecast_loop(fit, full_res, oos_start)
        stage = "metrics"
        rmsfe, mafe = rmsfe_mafe(records)
        metrics = {
            "model": name, "matrix": kind or "", "k": fit.k, "bic": fit.bic, "rmsfe": rmsfe, "mafe": mafe,
            "loglik": fit.loglik, "t_eff": fit.t_eff, "n_forecasts": len(records),
        }
        if any(issubclass(c.category, StateWarning) for c in caught):
            fit.notes["truncated"] = True
        return CellResult(name, kind, True, time.perf_counter() - t0, metrics, fit.to_json(), loss_series(records))
    except (SpatioVolError, ValueError, ArithmeticError, np.linalg.LinAlgError) as exc:
        logger.warning("%s/%s failed at %s: %s", name, kind, stage, exc)
        return CellResult(name, kind, False, time.perf_counter() - t0, stage=stage,
                          error=type(exc).__name__, message=str(exc))


def grid(cfg: ExperimentConfig) -> list[Cell]:
    cells = []
    for m in cfg.models:
        if m.spatial:
            cells.extend(Cell(m, k) for k in cfg.matrices)
        else:
            cells.append(Cell(m, None))
    return cells


def prepare(cfg: ExperimentConfig) -> tuple[ReturnsPanel, ResidualPanel, ResidualPanel, int]:
    """Load or simulate the panel; fit VAR(1) on the in-sample rows only."""
    if cfg.synthetic is not None:
        panel = simulate_panel(cfg.synthetic)
    else:
        panel = load_panel(cfg.input, prices=cfg.prices)
    cfg.check_length(panel.T - 1)
    split = panel.T - cfg.oos_length
    in_sample = panel.head(split)
    mean_model = fit_var1(in_sample)
    full_res = var1_residuals(panel, mean_model)
    is_res = full_res.head(split - 1)
    return panel, is_res, full_res, split - 1


@dataclass
class RunSummary:
    output: Path
    metrics: list[dict]
    failures: list[dict]
    ranking: list[dict]


def run_experiment(cfg: ExperimentConfig) -> RunSummary:
    t_start = time.perf_counter()
    out = Path(cfg.output)
    (out / "fits").mkdir(parents=True, exist_ok=True)
    (out / "weights").mkdir(parents=True, exist_ok=True)
    panel, is_res, full_res, oos_start = prepare(cfg)
    in_returns = panel.head(oos_start + 1)
    t0 = time.perf_counter()
    weights = build_weights(is_res, cfg.matrices, returns=in_returns, alpha=cfg.alpha, k=cfg.k, seed=cfg.seed) if cfg.matrices else {}
    weight_seconds = time.perf_counter() - t0
    for kind, w in weights.items():
        write_weights(w, panel.tickers, out / "weights" / f"{kind}.csv")

    cells = grid(cfg)
    args = [(c, is_res, full_res, oos_start, weights.get(c.matrix) if c.matrix else None, cfg.n_starts, cfg.seed)
            for c in cells]
    if cfg.parallelism > 1:
        with ProcessPoolExecutor(max_workers=cfg.parallelism) as pool:
            results = list(pool.map(_run_cell, *zip(*args)))
    else:
        results = [_run_cell(*a) for a in args]

    metrics, failures, timings = [], [], []
    losses, rmsfe = {}, {}
    for r in results:
        timings.append({"model": r.model, "matrix": r.matrix or "", "seconds": r.seconds, "ok": r.ok})
        if r.ok:
            metrics.append(r.metrics)
            losses[(r.model, r.matrix)] = r.losses
            rmsfe[(r.model, r.matrix)] = r.metrics["rmsfe"]
            tag = f"{r.model}_{r.matrix}" if r.matrix else r.model
            (out / "fits" / f"{tag}.json").write_text(r.fit_json + "\n")
        else:
            failures.append({"model": r.model, "matrix": r.matrix or "", "stage": r.stage,
                             "error": r.error, "message": r.message})

    _write_csv(out / "metrics.csv", METRIC_FIELDS, metrics)
    _write_csv(out / "failures.csv", ("model", "matrix", "stage", "error", "message"), failures)
    _write_csv(out / "timings.csv", ("model", "matrix", "seconds", "ok"), timings)
    ranking: list[dict] = []
    if len({m for m, _ in losses}) >= 2:
        table = dm_matrix(losses, rmsfe)
        ranking = table.ranking_rows()
        _write_csv(out / "dm_ranking.csv", ("model", "matrix", "mean_loss", "rank"), ranking)
        with open(out / "dm_pvalues.csv", "w", newline="") as fh:
            wr = csv.writer(fh, lineterminator="\n")
            wr.writerow(["model", *table.models])
            for m, row in zip(table.models, table.pvalue):
                wr.writerow([m, *(_fmt(v) for v in row)])
    manifest = {
        "config_sha256": cfg.digest(),
        "config": asdict(cfg),
        "seeds": {"experiment": cfg.seed, "synthetic": cfg.synthetic.seed if cfg.synthetic else None},
        "versions": _versions(),
        "panel": {"T": panel.T, "n": panel.n, "oos_start": oos_start, "oos_length": cfg.oos_length},
        "wall_seconds": {"weights": weight_seconds, "total": time.perf_counter() - t_start,
                         "cells": {f"{t['model']}/{t['matrix']}": t["seconds"] for t in timings}},
        "bic_timebase": "number of likelihood observations (T_in - 1)",
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True, default=str) + "\n")
    return RunSummary(out, metrics, failures, ranking)


def _fmt(v) -> str:
    if isinstance(v, float):
        return "" if not np.isfinite(v) else repr(v)
    if isinstance(v, (np.floating,)):
        return _fmt(float(v))
    return str(v)


def _write_csv(path: Path, fields, rows) -> None:
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(fields)
        for r in rows:
            wr.writerow([_fmt(r[f]) for f in fields])


def _versions() -> dict:
    import numba
    import scipy

    return {"spatiovol": __version__, "python": platform.python_version(), "numpy": np.__version__,
            "scipy": scipy.__version__, "numba": numba.__version__}


def write_weights_only(cfg: ExperimentConfig) -> dict[str, WeightMatrix]:
    """Build and write the configured matrices from the in-sample residuals."""
    panel, is_res, _, oos_start = prepare(cfg)
    out = Path(cfg.output) / "weights"
    out.mkdir(parents=True, exist_ok=True)
    weights = build_weights(is_res, cfg.matrices, returns=panel.head(oos_start + 1), alpha=cfg.alpha, k=cfg.k, seed=cfg.seed)
    for kind, w in weights.items():
        write_weights(w, panel.tickers, out / f"{kind}.csv")
    return weights


def write_simulation(cfg: SynthConfig, path: str | Path | None = None) -> ReturnsPanel:
    panel = simulate_panel(cfg)
    target = path or cfg.output
    if target is None:
        raise ConfigError("output", "no output path for the simulated panel")
    write_panel(panel, target)
    return panel
