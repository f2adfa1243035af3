"""Univariate GARCH(1,1) and EGARCH(1,1): filters, simulation and Gaussian QMLE."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from . import _kernels as kern
from .errors import ConvergenceError, DegenerateSeriesError, DomainError, InvalidParamError, StationarityBoundaryWarning
from .numerics import OptResult, minimize_multistart, perturbed_starts


@dataclass(frozen=True)
class Garch11Params:
    omega: float
    alpha: float
    beta: float

    def __post_init__(self) -> None:
        if not self.omega > 0:
            raise InvalidParamError("omega must be positive")
        if self.alpha < 0 or self.beta < 0:
            raise InvalidParamError("alpha and beta must be non-negative")
        if self.alpha + self.beta >= 1:
            raise InvalidParamError("alpha + beta must be below 1")

    @property
    def unconditional_variance(self) -> float:
        return self.omega / (1.0 - self.alpha - self.beta)

    def scaled(self, c2: float) -> "Garch11Params":
        """Parameters for the series multiplied by sqrt(c2)."""
        return Garch11Params(self.omega * c2, self.alpha, self.beta)


@dataclass(frozen=True)
class Egarch11Params:
    omega: float
    beta: float
    alpha: float
    gamma: float

    def __post_init__(self) -> None:
        if not abs(self.beta) < 1:
            raise InvalidParamError("|beta| must be below 1")


@dataclass(frozen=True)
class VolPath:
    h: np.ndarray
    log_scale: bool = False

    @property
    def variance(self) -> np.ndarray:
        return np.exp(self.h) if self.log_scale else self.h


@dataclass
class UnivariateFit:
    params: Garch11Params | Egarch11Params
    loglik: float
    h0: float
    opt: OptResult

    @property
    def k(self) -> int:
        return 3 if isinstance(self.params, Garch11Params) else 4


def _check_series(eps: np.ndarray, min_len: int) -> np.ndarray:
    eps = np.ascontiguousarray(eps, dtype=float)
    if eps.ndim != 1:
        raise DomainError("expected a 1-D series")
    if eps.size < min_len:
        raise DomainError(f"series length {eps.size} below the minimum {min_len}")
    if not np.all(np.isfinite(eps)):
        raise DomainError("series contains non-finite values")
    if eps.var() <= 0:
        raise DegenerateSeriesError("series is constant")
    return eps


def garch11_filter(eps: np.ndarray, p: Garch11Params, h0: float) -> VolPath:
    if not h0 > 0:
        raise DomainError("h0 must be positive")
    return VolPath(kern.garch11_filter(np.ascontiguousarray(eps, dtype=float), p.omega, p.alpha, p.beta, h0))


def garch11_loglik(eps: np.ndarray, p: Garch11Params, h0: float | None = None) -> float:
    eps = np.ascontiguousarray(eps, dtype=float)
    h0 = float(eps.var()) if h0 is None else h0
    return float(kern.garch11_loglik(eps, p.omega, p.alpha, p.beta, h0))


def garch11_forecast(eps_T: float, h_T: float, p: Garch11Params) -> float:
    return p.omega + p.alpha * eps_T**2 + p.beta * h_T


def garch11_qmle(eps: np.ndarray, n_starts: int = 3, seed: int = 0, min_len: int = 250) -> UnivariateFit:
    """Gaussian QMLE with h0 set to the sample variance.

    The series is rescaled to unit variance for the optimization and omega
    mapped back afterwards; the reported log-likelihood is on the original scale.
    """
    eps = _check_series(eps, min_len)
    scale2 = float(eps.var())
    x = eps / math.sqrt(scale2)
    T = x.size

    def nll(theta):
        w, a, b = theta
        if a + b > 0.999:
            return np.inf
        return -kern.garch11_loglik(x, w, a, b, 1.0) / T

    lower = np.array([1e-10, 0.0, 0.0])
    upper = np.array([np.inf, 0.999, 0.999])
    default = np.array([0.05, 0.05, 0.90])
    starts = perturbed_starts(default, lower, np.array([10.0, 0.999, 0.999]), n_starts, seed)
    res = minimize_multistart(nll, starts, lower, upper, seed=seed)
    if not res.converged:
        raise ConvergenceError(f"GARCH(1,1) QMLE did not converge: {res.message}", res.trace)
    w, a, b = res.argmin
    if a + b > 0.995:
        warnings.warn(f"alpha + beta = {a + b:.4f} is close to the stationarity boundary", StationarityBoundaryWarning)
    params = Garch11Params(w * scale2, a, b)
    loglik = -res.value * T - (T - 1) * 0.5 * math.log(scale2)
    return UnivariateFit(params, float(loglik), scale2, res)


def egarch11_filter(eps: np.ndarray, p: Egarch11Params, logh0: float) -> VolPath:
    """log h_t = omega + beta log h_{t-1} + alpha |z_{t-1}| + gamma z_{t-1}, z = eps / sqrt(h)."""
    eps = np.ascontiguousarray(eps, dtype=float)
    return VolPath(kern.egarch11_filter(eps, p.omega, p.beta, p.alpha, p.gamma, logh0), log_scale=True)


def egarch11_loglik(eps: np.ndarray, p: Egarch11Params, logh0: float | None = None) -> float:
    eps = np.ascontiguousarray(eps, dtype=float)
    logh0 = math.log(eps.var()) if logh0 is None else logh0
    return float(kern.egarch11_loglik(eps, p.omega, p.beta, p.alpha, p.gamma, logh0))


def egarch11_qmle(eps: np.ndarray, n_starts: int = 3, seed: int = 0, min_len: int = 250) -> UnivariateFit:
    """Gaussian QMLE with log h0 set to the log sample variance; ``h0`` of the fit holds exp(log h0)."""
    eps = _check_series(eps, min_len)
    scale2 = float(eps.var())
    x = eps / math.sqrt(scale2)
    T = x.size

    def nll(theta):
        w, b, a, g = theta
        return -kern.egarch11_loglik(x, w, b, a, g, 0.0) / T

    lower = np.array([-np.inf, -0.999, -np.inf, -np.inf])
    upper = np.array([np.inf, 0.999, np.inf, np.inf])
    default = np.array([-0.01, 0.95, 0.10, -0.05])
    starts = perturbed_starts(default, lower, upper, n_starts, seed)
    res = minimize_multistart(nll, starts, lower, upper, seed=seed)
    if not res.converged:
        raise ConvergenceError(f"EGARCH(1,1) QMLE did not converge: {res.message}", res.trace)
    w, b, a, g = res.argmin
    # log h scales additively: log h = log h_x + log scale2
    params = Egarch11Params(w + (1.0 - b) * math.log(scale2), b, a, g)
    loglik = -res.value * T - (T - 1) * 0.5 * math.log(scale2)
    return UnivariateFit(params, float(loglik), scale2, res)


def simulate_garch11(p: Garch11Params, T: int, rng: np.random.Generator, burn: int = 500) -> np.ndarray:
    z = rng.standard_normal(T + burn)
    eps = np.empty(T + burn)
    h = p.unconditional_variance
    for t in range(T + burn):
        eps[t] = math.sqrt(h) * z[t]
        h = p.omega + p.alpha * eps[t] ** 2 + p.beta * h
    return eps[burn:]


def simulate_egarch11(p: Egarch11Params, T: int, rng: np.random.Generator, burn: int = 500) -> np.ndarray:
    z = rng.standard_normal(T + burn)
    eps = np.empty(T + burn)
    lh = (p.omega + p.alpha * kern.SQRT_2_OVER_PI) / (1.0 - p.beta)
    for t in range(T + burn):
        eps[t] = math.exp(0.5 * lh) * z[t]
        lh = p.omega + p.beta * lh + p.alpha * abs(z[t]) + p.gamma * z[t]
    return eps[burn:]
