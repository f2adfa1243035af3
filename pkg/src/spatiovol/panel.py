"""Return panels, the VAR(1) mean model and descriptive diagnostics."""

from __future__ import annotations

import csv
import datetime as dt
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DegenerateSeriesError, DomainError, GapError, ParseError, SingularDesignError
from .numerics import tail_prob


@dataclass(frozen=True)
class ReturnsPanel:
    """T x n log-returns with a strictly increasing date index."""

    dates: tuple[dt.date, ...]
    tickers: tuple[str, ...]
    values: np.ndarray

    def __post_init__(self) -> None:
        values = np.array(self.values, dtype=float)
        if values.ndim != 2:
            raise ValueError("values must be a T x n matrix")
        object.__setattr__(self, "dates", tuple(self.dates))
        object.__setattr__(self, "tickers", tuple(self.tickers))
        if values.shape != (len(self.dates), len(self.tickers)):
            raise ValueError("values shape does not match dates x tickers")
        if len(set(self.tickers)) != len(self.tickers):
            raise ValueError("duplicate ticker labels")
        if not np.all(np.isfinite(values)):
            raise GapError("panel contains missing or non-finite values")
        if any(b <= a for a, b in zip(self.dates, self.dates[1:])):
            raise ValueError("dates must be strictly increasing")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @property
    def T(self) -> int:
        return self.values.shape[0]

    @property
    def n(self) -> int:
        return self.values.shape[1]

    def check_estimable(self) -> None:
        """Raise unless the panel is large enough for the multivariate estimators (T >= 10 n, n >= 2)."""
        if self.n < 2:
            raise DomainError("at least two assets are required")
        if self.T < 10 * self.n:
            raise DomainError(f"T={self.T} is below 10*n={10 * self.n}")

    def head(self, rows: int) -> "ReturnsPanel":
        return ReturnsPanel(self.dates[:rows], self.tickers, self.values[:rows])

    def select(self, tickers) -> "ReturnsPanel":
        idx = [self.tickers.index(t) for t in tickers]
        return ReturnsPanel(self.dates, tuple(tickers), self.values[:, idx])


@dataclass(frozen=True)
class ResidualPanel:
    """VAR(1) residuals for t = 2..T with the fitted mean-model coefficients.

    ``coeffs`` is the n x n matrix Phi and ``intercept`` the n-vector c in
    y_t = c + Phi y_{t-1} + e_t.
    """

    dates: tuple[dt.date, ...]
    tickers: tuple[str, ...]
    values: np.ndarray
    coeffs: np.ndarray
    intercept: np.ndarray

    @property
    def T(self) -> int:
        return self.values.shape[0]

    @property
    def n(self) -> int:
        return self.values.shape[1]

    def head(self, rows: int) -> "ResidualPanel":
        return ResidualPanel(self.dates[:rows], self.tickers, self.values[:rows], self.coeffs, self.intercept)

    @classmethod
    def from_array(cls, values: np.ndarray, tickers=None, start: dt.date = dt.date(2000, 1, 3)) -> "ResidualPanel":
        """Wrap a raw residual matrix (e.g. simulated innovations) with a zero mean model."""
        values = np.asarray(values, dtype=float)
        T, n = values.shape
        tickers = tuple(tickers) if tickers is not None else tuple(f"S{i + 1}" for i in range(n))
        return cls(business_days(start, T), tickers, values, np.zeros((n, n)), np.zeros(n))


@dataclass(frozen=True)
class AssetDiagnostics:
    mean: float
    std: float
    min: float
    max: float
    skewness: float
    kurtosis: float
    arch_lm_pvalue: float


@dataclass(frozen=True)
class PanelDiagnostics:
    tickers: tuple[str, ...]
    assets: tuple[AssetDiagnostics, ...]
    arch_lags: int

    def rows(self) -> list[dict]:
        return [{"ticker": t, **a.__dict__} for t, a in zip(self.tickers, self.assets)]


def business_days(start: dt.date, count: int) -> tuple[dt.date, ...]:
    out = []
    d = start
    while len(out) < count:
        if d.weekday() < 5:
            out.append(d)
        d += dt.timedelta(days=1)
    return tuple(out)


def load_panel(path: str | Path, format: str = "wide_csv", prices: bool = False) -> ReturnsPanel:
    """Read a wide CSV (``date`` column plus one column per ticker).

    Rows are sorted by date. With ``prices=True`` the cells are prices and are
    converted to log-returns ln(P_t / P_{t-1}), dropping the first date.
    """
    if format != "wide_csv":
        raise ValueError(f"unsupported format {format!r}")
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise ParseError("empty file", row=1)
    header = [h.strip() for h in rows[0]]
    if not header or header[0].lower() != "date":
        raise ParseError("first header cell must be 'date'", row=1, column=header[0] if header else None)
    tickers = header[1:]
    if not tickers:
        raise ParseError("no ticker columns", row=1)

    dates: list[dt.date] = []
    values: list[list[float]] = []
    for lineno, row in enumerate(rows[1:], start=2):
        if not any(cell.strip() for cell in row):
            continue
        if len(row) != len(header):
            raise ParseError(f"expected {len(header)} cells, found {len(row)}", row=lineno)
        try:
            dates.append(dt.date.fromisoformat(row[0].strip()))
        except ValueError:
            raise ParseError(f"bad date {row[0]!r}", row=lineno, column="date") from None
        parsed = []
        for ticker, cell in zip(tickers, row[1:]):
            cell = cell.strip()
            if cell == "" or cell.lower() in ("na", "nan"):
                raise GapError("missing value", row=lineno, column=ticker)
            try:
                parsed.append(float(cell))
            except ValueError:
                raise ParseError(f"cannot parse {cell!r} as a number", row=lineno, column=ticker) from None
        values.append(parsed)

    order = sorted(range(len(dates)), key=dates.__getitem__)
    dates = [dates[i] for i in order]
    for a, b in zip(dates, dates[1:]):
        if a == b:
            raise ParseError(f"duplicate date {a.isoformat()}")
    arr = np.array([values[i] for i in order], dtype=float).reshape(len(dates), len(tickers))
    if prices:
        if np.any(arr <= 0):
            raise ParseError("prices must be positive")
        arr = np.diff(np.log(arr), axis=0)
        dates = dates[1:]
    return ReturnsPanel(tuple(dates), tuple(tickers), arr)


def write_panel(panel: ReturnsPanel | ResidualPanel, path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["date", *panel.tickers])
        for d, row in zip(panel.dates, panel.values):
            w.writerow([d.isoformat(), *(repr(float(v)) for v in row)])


def fit_var1(panel: ReturnsPanel) -> ResidualPanel:
    """Equation-by-equation least squares of y_t = c + Phi y_{t-1} + e_t."""
    y = panel.values
    T, n = y.shape
    if T < n + 2:
        raise DomainError(f"T={T} too short for a VAR(1) in {n} variables")
    X = np.column_stack([np.ones(T - 1), y[:-1]])
    if np.linalg.matrix_rank(X) < X.shape[1]:
        raise SingularDesignError("lagged regressor matrix is rank-deficient")
    beta, *_ = np.linalg.lstsq(X, y[1:], rcond=None)
    resid = y[1:] - X @ beta
    return ResidualPanel(panel.dates[1:], panel.tickers, resid, beta[1:].T.copy(), beta[0].copy())


def var1_residuals(panel: ReturnsPanel, fitted: ResidualPanel) -> ResidualPanel:
    """Residuals of ``panel`` under already-estimated VAR(1) coefficients."""
    y = panel.values
    resid = y[1:] - fitted.intercept - y[:-1] @ fitted.coeffs.T
    return ResidualPanel(panel.dates[1:], panel.tickers, resid, fitted.coeffs, fitted.intercept)


def arch_lm_pvalue(x: np.ndarray, lags: int = 5) -> float:
    """Engle's LM test: T * R^2 of squared demeaned series on its own lags, chi2(lags)."""
    x = np.asarray(x, dtype=float)
    e2 = (x - x.mean()) ** 2
    T = e2.size
    if T <= lags + 2:
        raise DomainError("series too short for the requested ARCH-LM lags")
    yv = e2[lags:]
    X = np.column_stack([np.ones(T - lags)] + [e2[lags - j : T - j] for j in range(1, lags + 1)])
    beta, *_ = np.linalg.lstsq(X, yv, rcond=None)
    resid = yv - X @ beta
    tss = ((yv - yv.mean()) ** 2).sum()
    if tss <= 0:
        raise DegenerateSeriesError("squared series is constant")
    r2 = 1.0 - (resid @ resid) / tss
    return tail_prob("chi2", (T - lags) * r2, lags)


def diagnostics(panel: ReturnsPanel, arch_lags: int = 5) -> PanelDiagnostics:
    if arch_lags < 1:
        raise DomainError("arch_lags must be positive")
    if panel.T <= arch_lags + 2:
        raise DomainError("panel too short for the requested ARCH-LM lags")
    out = []
    for i, ticker in enumerate(panel.tickers):
        x = panel.values[:, i]
        c = x - x.mean()
        m2 = (c**2).mean()
        if m2 <= 0:
            raise DegenerateSeriesError(f"series {ticker!r} is constant")
        skew = (c**3).mean() / m2**1.5
        kurt = (c**4).mean() / m2**2
        try:
            lm = arch_lm_pvalue(x, arch_lags)
        except DegenerateSeriesError:
            # constant squares (e.g. a +-1 series): the LM regression is undefined
            lm = float("nan")
        out.append(
            AssetDiagnostics(
                mean=float(x.mean()),
                std=float(x.std(ddof=1)),
                min=float(x.min()),
                max=float(x.max()),
                skewness=float(skew),
                kurtosis=float(kurt),
                arch_lm_pvalue=lm,
            )
        )
    return PanelDiagnostics(panel.tickers, tuple(out), arch_lags)
