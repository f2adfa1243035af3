"""Financial-network weight matrices.

Ten constructions are supported: inverse-distance matrices for the
Euclidean, correlation and Piccolo AR distances, their Granger-filtered
(directed) versions, k-nearest-neighbour graphs on the same distances, and a
spillover matrix built from Granger tests on EGARCH volatilities.
"""

from __future__ import annotations

import json
import logging
import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DegenerateSeriesError, DomainError, FitError, ZeroDistanceError, ZeroRowWarning
from .numerics import tail_prob
from .panel import ResidualPanel, ReturnsPanel

logger = logging.getLogger(__name__)

KINDS = ("euclidean", "corr", "piccolo", "e_g", "c_g", "p_g", "e_nn", "c_nn", "p_nn", "spill")
DIRECTED_KINDS = frozenset({"e_g", "c_g", "p_g", "spill"})
PICCOLO_FLOOR = 1e-10


@dataclass(frozen=True)
class DistanceMatrix:
    d: np.ndarray
    metric: str

    def __post_init__(self) -> None:
        d = np.asarray(self.d, dtype=float)
        if d.ndim != 2 or d.shape[0] != d.shape[1]:
            raise DomainError("distance matrix must be square")
        if np.any(np.diag(d) != 0) or np.any(d < 0) or not np.allclose(d, d.T, rtol=0, atol=1e-12):
            raise DomainError("distance matrix must be symmetric, non-negative with zero diagonal")
        object.__setattr__(self, "d", d)


@dataclass(frozen=True)
class WeightMatrix:
    w: np.ndarray
    kind: str
    directed: bool
    row_stochastic: bool
    zero_rows: tuple[int, ...] = ()
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self) -> None:
        w = np.asarray(self.w, dtype=float)
        if w.ndim != 2 or w.shape[0] != w.shape[1]:
            raise DomainError("weight matrix must be square")
        if np.any(np.diag(w) != 0):
            raise DomainError("weight matrix diagonal must be zero")
        if np.any(w < 0):
            raise DomainError("weights must be non-negative")
        if self.row_stochastic:
            sums = w.sum(axis=1)
            bad = (sums > 0) & (np.abs(sums - 1.0) > 1e-12)
            if np.any(bad):
                raise DomainError("rows with positive mass must sum to one")
        w.setflags(write=False)
        object.__setattr__(self, "w", w)

    @property
    def n(self) -> int:
        return self.w.shape[0]

    @property
    def is_symmetric(self) -> bool:
        return bool(np.allclose(self.w, self.w.T, rtol=0, atol=1e-12))

    def sidecar(self) -> dict:
        return {"kind": self.kind, "directed": self.directed, "row_stochastic": self.row_stochastic, **self.meta}


@dataclass(frozen=True)
class GrangerFilter:
    g: np.ndarray
    pvals: np.ndarray
    lag_order: np.ndarray
    alpha: float = 0.05


def _row_normalize(w: np.ndarray) -> tuple[np.ndarray, tuple[int, ...]]:
    sums = w.sum(axis=1)
    zero = tuple(int(i) for i in np.flatnonzero(sums <= 0))
    out = np.zeros_like(w)
    pos = sums > 0
    out[pos] = w[pos] / sums[pos, None]
    # exact unit sums: push rounding into the largest entry of each row
    for i in np.flatnonzero(pos):
        j = int(np.argmax(out[i]))
        out[i, j] += 1.0 - out[i].sum()
    return out, zero


def distance_euclidean(res: ResidualPanel | np.ndarray) -> DistanceMatrix:
    x = np.asarray(getattr(res, "values", res), dtype=float)
    if x.shape[1] < 2:
        raise DomainError("need at least two assets")
    sq = (x**2).sum(axis=0)
    d2 = sq[:, None] + sq[None, :] - 2.0 * (x.T @ x)
    # recompute exactly where cancellation could bite
    d = np.sqrt(np.maximum(d2, 0.0))
    n = x.shape[1]
    for i in range(n):
        for j in range(i + 1, n):
            if d[i, j] < 1e-6 * math.sqrt(sq[i] + sq[j] + 1e-300):
                d[i, j] = math.sqrt(((x[:, i] - x[:, j]) ** 2).sum())
            d[j, i] = d[i, j]
    np.fill_diagonal(d, 0.0)
    return DistanceMatrix(d, "euclidean")


def distance_correlation(panel: ReturnsPanel | ResidualPanel | np.ndarray) -> DistanceMatrix:
    """d_ij = sqrt(2 (1 - rho_ij)) from Pearson correlations of the columns."""
    x = np.asarray(getattr(panel, "values", panel), dtype=float)
    if x.shape[1] < 2:
        raise DomainError("need at least two assets")
    sd = x.std(axis=0)
    if np.any(sd <= 0):
        raise DegenerateSeriesError(f"constant column(s) {np.flatnonzero(sd <= 0).tolist()}")
    rho = np.clip(np.corrcoef(x, rowvar=False), -1.0, 1.0)
    d = np.sqrt(np.maximum(2.0 * (1.0 - rho), 0.0))
    d = 0.5 * (d + d.T)
    np.fill_diagonal(d, 0.0)
    return DistanceMatrix(d, "correlation")


def _ols(X: np.ndarray, y: np.ndarray):
    beta, *_ = np.linalg.lstsq(X, y, rcond=None)
    resid = y - X @ beta
    return beta, resid


def fit_ar_bic(x: np.ndarray, max_p: int) -> np.ndarray:
    """AR coefficients (without intercept) with the order chosen by BIC over 1..max_p on a common sample."""
    x = np.asarray(x, dtype=float)
    T = x.size
    if T < 3 * max_p + 10:
        raise FitError(f"series of length {T} too short for AR({max_p})")
    y = x[max_p:]
    m = y.size
    best = None
    for p in range(1, max_p + 1):
        X = np.column_stack([np.ones(m)] + [x[max_p - j : T - j] for j in range(1, p + 1)])
        beta, resid = _ols(X, y)
        s2 = resid @ resid / m
        if not s2 > 0:
            raise FitError("AR fit has zero residual variance")
        bic = m * math.log(s2) + (p + 1) * math.log(m)
        if best is None or bic < best[0]:
            best = (bic, beta[1:])
    return best[1]


def distance_piccolo(res: ResidualPanel | np.ndarray, max_p: int = 5) -> DistanceMatrix:
    """Euclidean distance between zero-padded AR coefficients of log(eps^2 + 1e-10)."""
    x = np.asarray(getattr(res, "values", res), dtype=float)
    n = x.shape[1]
    if n < 2:
        raise DomainError("need at least two assets")
    coefs = []
    for i in range(n):
        try:
            coefs.append(fit_ar_bic(np.log(x[:, i] ** 2 + PICCOLO_FLOOR), max_p))
        except FitError as exc:
            raise FitError(f"AR fit failed for asset {i}: {exc}") from exc
    return DistanceMatrix(piccolo_from_coefs(coefs), "piccolo")


def piccolo_from_coefs(coefs) -> np.ndarray:
    n = len(coefs)
    d = np.zeros((n, n))
    for i in range(n):
        for j in range(i + 1, n):
            P = max(len(coefs[i]), len(coefs[j]))
            a = np.zeros(P)
            b = np.zeros(P)
            a[: len(coefs[i])] = coefs[i]
            b[: len(coefs[j])] = coefs[j]
            d[i, j] = d[j, i] = math.sqrt(((a - b) ** 2).sum())
    return d


def inverse_distance_weights(d: DistanceMatrix, labels=None, kind: str | None = None) -> WeightMatrix:
    D = d.d
    n = D.shape[0]
    off = ~np.eye(n, dtype=bool)
    zeros = np.argwhere(off & (D <= 0))
    if zeros.size:
        i, j = zeros[0]
        raise ZeroDistanceError(int(i), int(j), labels)
    w = np.zeros_like(D)
    w[off] = 1.0 / D[off]
    w, _ = _row_normalize(w)
    kind = kind or {"euclidean": "euclidean", "correlation": "corr", "piccolo": "piccolo"}[d.metric]
    return WeightMatrix(w, kind, directed=False, row_stochastic=True)


def _var_design(y: np.ndarray, p: int, start: int):
    """Regressors [1, lags 1..p of both columns] for rows start..T-1."""
    T = y.shape[0]
    cols = [np.ones(T - start)]
    for j in range(1, p + 1):
        cols.append(y[start - j : T - j, 0])
        cols.append(y[start - j : T - j, 1])
    return np.column_stack(cols)


def granger_pvalue(target: np.ndarray, cause: np.ndarray, max_lag: int = 5) -> tuple[float, int]:
    """p-value of the F-test that ``cause`` does not Granger-cause ``target``.

    A bivariate VAR is fitted with lag order chosen by BIC over 1..max_lag on
    a common estimation sample; the F-test compares the target equation with
    and without the cause's lags.
    """
    y = np.column_stack([target, cause]).astype(float)
    T = y.shape[0]
    if T < 50:
        raise DomainError("Granger test needs at least 50 observations")
    m = T - max_lag
    best_p, best_bic = 1, np.inf
    for p in range(1, max_lag + 1):
        X = _var_design(y, p, max_lag)
        _, resid = _ols(X, y[max_lag:])
        sigma = resid.T @ resid / m
        sign, logdet = np.linalg.slogdet(sigma)
        if sign <= 0:
            raise FitError("singular VAR residual covariance")
        bic = logdet + 2 * (2 * p + 1) * math.log(m) / m
        if bic < best_bic:
            best_p, best_bic = p, bic
    p = best_p
    yt = y[p:, 0]
    Xu = _var_design(y, p, p)
    Xr = Xu[:, [0] + [1 + 2 * (j - 1) for j in range(1, p + 1)]]
    _, ru = _ols(Xu, yt)
    _, rr = _ols(Xr, yt)
    df2 = yt.size - Xu.shape[1]
    rss_u = ru @ ru
    if not rss_u > 0:
        raise FitError("perfect fit in Granger regression")
    F = ((rr @ rr - rss_u) / p) / (rss_u / df2)
    return tail_prob("f", F, p, df2), p


def granger_filter(res: ResidualPanel | np.ndarray, alpha: float = 0.05, max_lag: int = 5) -> GrangerFilter:
    """Pairwise tests of whether column j Granger-causes column i; g_ij = 1 iff p_ij < alpha."""
    x = np.asarray(getattr(res, "values", res), dtype=float)
    T, n = x.shape
    if T < 50:
        raise DomainError("Granger filter needs T >= 50")
    pvals = np.ones((n, n))
    lags = np.zeros((n, n), dtype=int)
    for i in range(n):
        for j in range(n):
            if i == j:
                continue
            try:
                pvals[i, j], lags[i, j] = granger_pvalue(x[:, i], x[:, j], max_lag)
            except (FitError, np.linalg.LinAlgError) as exc:
                raise FitError(f"Granger test {j} -> {i} failed: {exc}") from exc
    g = (pvals < alpha).astype(int)
    np.fill_diagonal(g, 0)
    return GrangerFilter(g, pvals, lags, alpha)


def apply_granger(w: WeightMatrix, g: GrangerFilter, kind: str | None = None) -> WeightMatrix:
    if w.w.shape != g.g.shape:
        raise DomainError("weight and filter shapes differ")
    masked = w.w * g.g
    np.fill_diagonal(masked, 0.0)
    out, zero = _row_normalize(masked)
    if zero:
        warnings.warn(f"rows {list(zero)} have no Granger-significant neighbour", ZeroRowWarning, stacklevel=2)
    kind = kind or {"euclidean": "e_g", "corr": "c_g", "piccolo": "p_g"}.get(w.kind, w.kind)
    return WeightMatrix(out, kind, directed=True, row_stochastic=True, zero_rows=zero, meta={"alpha": g.alpha})


def knn_weights(d: DistanceMatrix, k: int = 5, kind: str | None = None) -> WeightMatrix:
    """w_ij = 1/k for the k nearest j != i; ties go to the lower index."""
    D = d.d
    n = D.shape[0]
    if not 0 < k < n:
        raise DomainError(f"k={k} must satisfy 0 < k < n={n}")
    w = np.zeros_like(D)
    for i in range(n):
        others = [j for j in range(n) if j != i]
        # stable sort on distance keeps ascending index order among ties
        order = sorted(others, key=lambda j: D[i, j])
        w[i, order[:k]] = 1.0 / k
    kind = kind or {"euclidean": "e_nn", "correlation": "c_nn", "piccolo": "p_nn"}[d.metric]
    return WeightMatrix(w, kind, directed=False, row_stochastic=True, meta={"k": k})


def spillover_weights(pvals: np.ndarray, alpha: float = 0.05) -> WeightMatrix:
    """w_ij = 1 - p_ij where significant, then row-normalized."""
    raw = np.where(pvals < alpha, 1.0 - pvals, 0.0)
    np.fill_diagonal(raw, 0.0)
    w, zero = _row_normalize(raw)
    if zero:
        warnings.warn(f"rows {list(zero)} receive no significant spillover", ZeroRowWarning, stacklevel=2)
    return WeightMatrix(
        w, "spill", directed=True, row_stochastic=True, zero_rows=zero,
        meta={"alpha": alpha, "normalization": "row-normalized 1-p weights"},
    )


def spillover_matrix(res: ResidualPanel | np.ndarray, alpha: float = 0.05, n_starts: int = 1, seed: int = 0) -> WeightMatrix:
    """Granger tests on EGARCH(1,1) conditional volatilities."""
    from .univariate import egarch11_filter, egarch11_qmle

    x = np.asarray(getattr(res, "values", res), dtype=float)
    n = x.shape[1]
    sigma = np.empty_like(x)
    for i in range(n):
        try:
            fit = egarch11_qmle(x[:, i], n_starts=n_starts, seed=seed, min_len=50)
        except FitError as exc:
            raise FitError(f"EGARCH fit failed for asset {i}: {exc}") from exc
        sigma[:, i] = np.exp(0.5 * egarch11_filter(x[:, i], fit.params, math.log(fit.h0)).h)
    gf = granger_filter(sigma, alpha)
    return spillover_weights(gf.pvals, alpha)


def build_weights(
    res: ResidualPanel,
    kinds=KINDS,
    returns: ReturnsPanel | None = None,
    alpha: float = 0.05,
    k: int = 5,
    max_p: int = 5,
    corr_on: str = "returns",
    seed: int = 0,
) -> dict[str, WeightMatrix]:
    """Build the requested weight matrices.

    Euclidean and Piccolo distances use the residuals; the correlation
    distance uses ``returns`` when ``corr_on == "returns"`` (falling back to
    the residuals when no return panel is given).
    """
    kinds = list(kinds)
    unknown = set(kinds) - set(KINDS)
    if unknown:
        raise DomainError(f"unknown weight-matrix kinds {sorted(unknown)}")
    labels = res.tickers
    dist: dict[str, DistanceMatrix] = {}

    def distance(metric: str) -> DistanceMatrix:
        if metric not in dist:
            if metric == "euclidean":
                dist[metric] = distance_euclidean(res)
            elif metric == "correlation":
                src = returns if (corr_on == "returns" and returns is not None) else res
                dist[metric] = distance_correlation(src)
            else:
                dist[metric] = distance_piccolo(res, max_p)
        return dist[metric]

    base = {"e": "euclidean", "c": "correlation", "p": "piccolo"}
    full = {"euclidean": "euclidean", "corr": "correlation", "piccolo": "piccolo"}
    out: dict[str, WeightMatrix] = {}
    gfilter: GrangerFilter | None = None
    for kind in kinds:
        if kind in full:
            out[kind] = inverse_distance_weights(distance(full[kind]), labels)
        elif kind.endswith("_g"):
            if gfilter is None:
                gfilter = granger_filter(res, alpha)
            metric = base[kind[0]]
            inv = inverse_distance_weights(distance(metric), labels)
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", ZeroRowWarning)
                out[kind] = apply_granger(inv, gfilter, kind=kind)
        elif kind.endswith("_nn"):
            out[kind] = knn_weights(distance(base[kind[0]]), k, kind=kind)
        else:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", ZeroRowWarning)
                out[kind] = spillover_matrix(res, alpha, seed=seed)
        if out[kind].zero_rows:
            logger.info("%s: isolated rows %s", kind, out[kind].zero_rows)
    return out


def write_weights(w: WeightMatrix, tickers, path_csv: str | Path) -> None:
    path_csv = Path(path_csv)
    lines = ["ticker," + ",".join(tickers)]
    for t, row in zip(tickers, w.w):
        lines.append(t + "," + ",".join(repr(float(v)) for v in row))
    path_csv.write_text("\n".join(lines) + "\n")
    sidecar = {"kind": w.kind, "directed": w.directed, "row_stochastic": w.row_stochastic,
               "alpha": w.meta.get("alpha"), "k": w.meta.get("k"), "zero_rows": list(w.zero_rows)}
    sidecar.update({k: v for k, v in w.meta.items() if k not in sidecar})
    path_csv.with_suffix(".json").write_text(json.dumps(sidecar, indent=2, sort_keys=True) + "\n")


def read_weights(path_csv: str | Path) -> tuple[WeightMatrix, tuple[str, ...]]:
    path_csv = Path(path_csv)
    rows = [line.split(",") for line in path_csv.read_text().splitlines() if line]
    tickers = tuple(rows[0][1:])
    w = np.array([[float(v) for v in r[1:]] for r in rows[1:]])
    side = json.loads(path_csv.with_suffix(".json").read_text())
    meta = {k: v for k, v in side.items() if k not in ("kind", "directed", "row_stochastic", "zero_rows")}
    return (
        WeightMatrix(w, side["kind"], side["directed"], side["row_stochastic"], tuple(side.get("zero_rows", ())), meta),
        tickers,
    )
