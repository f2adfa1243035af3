"""Multivariate benchmarks: DCC(1,1), diagonal BEKK and proximity-structured BEKK."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from . import _kernels as kern
from .base import ModelFit, panel_scale, stopwatch
from .errors import ConvergenceError, DomainError, NonPDError, SingularMatrixError
from .networks import WeightMatrix
from .numerics import cholesky, is_pd, minimize_multistart, perturbed_starts
from .panel import ResidualPanel
from .univariate import Garch11Params, garch11_qmle

logger = logging.getLogger(__name__)


def _eps(res) -> np.ndarray:
    return np.ascontiguousarray(getattr(res, "values", res), dtype=float)


# ---------------------------------------------------------------- DCC


@dataclass(frozen=True)
class DccParams:
    univariate: tuple[Garch11Params, ...]
    lambda1: float
    lambda2: float
    qbar: np.ndarray

    def __post_init__(self) -> None:
        if self.lambda1 < 0 or self.lambda2 < 0 or self.lambda1 + self.lambda2 >= 1:
            raise DomainError("DCC loadings must be non-negative with lambda1 + lambda2 < 1")
        if not np.allclose(np.diag(self.qbar), 1.0):
            raise DomainError("qbar must have a unit diagonal")
        if not is_pd(self.qbar):
            raise NonPDError("qbar is not positive definite")


def dcc_param_count(n: int) -> int:
    return 3 * n + 2 + n * (n - 1) // 2


@dataclass(kw_only=True)
class DccFit(ModelFit):
    params: DccParams
    h0: np.ndarray

    def variance_path(self, eps: np.ndarray) -> np.ndarray:
        """Conditional variances for rows 0..T (row T is the one-step forecast)."""
        eps = _eps(eps)
        T, n = eps.shape
        out = np.empty((T + 1, n))
        for i, p in enumerate(self.params.univariate):
            h = kern.garch11_filter(eps[:, i], p.omega, p.alpha, p.beta, self.h0[i])
            out[:T, i] = h
            out[T, i] = p.omega + p.alpha * eps[-1, i] ** 2 + p.beta * h[-1]
        return out

    def forecast_path(self, eps: np.ndarray) -> np.ndarray:
        return self.variance_path(eps)[1:]

    def correlation_path(self, eps: np.ndarray) -> np.ndarray:
        eps = _eps(eps)
        u = eps / np.sqrt(self.variance_path(eps)[:-1])
        Q = kern.dcc_q_path(u, self.params.qbar, self.params.lambda1, self.params.lambda2)
        d = np.sqrt(np.einsum("tii->ti", Q))
        return Q / d[:, :, None] / d[:, None, :]

    def q_path(self, eps: np.ndarray) -> np.ndarray:
        eps = _eps(eps)
        u = eps / np.sqrt(self.variance_path(eps)[:-1])
        return kern.dcc_q_path(u, self.params.qbar, self.params.lambda1, self.params.lambda2)

    def named_params(self) -> dict:
        p = self.params
        return {
            "omega": [u.omega for u in p.univariate],
            "alpha": [u.alpha for u in p.univariate],
            "beta": [u.beta for u in p.univariate],
            "lambda1": p.lambda1,
            "lambda2": p.lambda2,
            "qbar": p.qbar,
        }


def dcc_corr_loglik(u: np.ndarray, qbar: np.ndarray, lambda1: float, lambda2: float) -> float:
    return float(kern.dcc_corr_loglik(np.ascontiguousarray(u), np.ascontiguousarray(qbar), lambda1, lambda2))


def dcc_fit(
    res: ResidualPanel | np.ndarray,
    n_starts: int = 3,
    seed: int = 0,
    fix_loadings: tuple[float, float] | None = None,
    min_len: int = 250,
) -> DccFit:
    """Two-stage DCC: per-asset GARCH(1,1) QMLE, then (lambda1, lambda2) by QMLE with Q-bar targeted."""
    eps = _eps(res)
    T, n = eps.shape
    with stopwatch() as clock:
        uni, h0, ll_uni = [], np.empty(n), 0.0
        u = np.empty_like(eps)
        for i in range(n):
            try:
                f = garch11_qmle(eps[:, i], n_starts=n_starts, seed=seed + i, min_len=min_len)
            except ConvergenceError as exc:
                raise ConvergenceError(f"DCC stage 1, asset {i}: {exc}", exc.trace) from exc
            uni.append(f.params)
            h0[i] = f.h0
            ll_uni += f.loglik
            p = f.params
            u[:, i] = eps[:, i] / np.sqrt(kern.garch11_filter(eps[:, i], p.omega, p.alpha, p.beta, f.h0))
        qbar = np.corrcoef(u, rowvar=False)
        if not is_pd(qbar):
            raise NonPDError("sample correlation of standardized residuals is not positive definite")

        if fix_loadings is not None:
            l1, l2 = fix_loadings
            converged = True
        else:
            def nll(theta):
                a, b = theta
                if a + b > 0.999:
                    return np.inf
                return -kern.dcc_corr_loglik(u, qbar, a, b) / T

            lower, upper = np.zeros(2), np.full(2, 0.999)
            starts = perturbed_starts(np.array([0.03, 0.94]), lower, upper, n_starts, seed)
            opt = minimize_multistart(nll, starts, lower, upper, seed=seed)
            if not opt.converged:
                raise ConvergenceError(f"DCC stage 2 did not converge: {opt.message}", opt.trace)
            l1, l2 = (float(v) for v in opt.argmin)
            converged = opt.converged
        ll = ll_uni + dcc_corr_loglik(u, qbar, l1, l2)
    params = DccParams(tuple(uni), l1, l2, qbar)
    return DccFit(
        model="dcc", params=params, h0=h0, k=dcc_param_count(n), loglik=float(ll), t_eff=T - 1,
        converged=converged, fit_seconds=clock[0], seeds=(seed,),
    )


# ---------------------------------------------------------------- diagonal BEKK


@dataclass(frozen=True)
class BekkDiagParams:
    c_lower: np.ndarray
    a_diag: np.ndarray
    b_diag: np.ndarray
    g_diag: np.ndarray | None = None

    def __post_init__(self) -> None:
        c = np.asarray(self.c_lower, dtype=float)
        if np.any(np.triu(c, 1) != 0):
            raise DomainError("c_lower must be lower triangular")
        if np.any(np.diag(c) <= 0):
            raise DomainError("diagonal of c_lower must be positive")

    @property
    def asymmetric(self) -> bool:
        return self.g_diag is not None

    def matrices(self):
        n = self.c_lower.shape[0]
        G = np.diag(self.g_diag) if self.g_diag is not None else np.zeros((n, n))
        return self.c_lower @ self.c_lower.T, np.diag(self.a_diag), np.diag(self.b_diag), G


def bekk_param_count(n: int, asymmetric: bool) -> int:
    return n * (n + 1) // 2 + 2 * n + (n if asymmetric else 0)


def bekk_loglik(eps: np.ndarray, Cint: np.ndarray, A: np.ndarray, B: np.ndarray, G: np.ndarray | None, sigma0: np.ndarray) -> float:
    """Gaussian log-likelihood of Sigma_t = Cint + A e e' A' [+ G n n' G'] + B Sigma_{t-1} B'."""
    eps = _eps(eps)
    n = eps.shape[1]
    asym = G is not None
    G = np.zeros((n, n)) if G is None else np.asarray(G, dtype=float)
    return float(kern.bekk_loglik(eps, np.asarray(Cint, float), np.asarray(A, float), np.asarray(B, float), G, np.asarray(sigma0, float), asym))


@dataclass(kw_only=True)
class BekkFit(ModelFit):
    params: BekkDiagParams
    sigma0: np.ndarray

    def _mats(self):
        return self.params.matrices()

    def covariance_path(self, eps: np.ndarray) -> np.ndarray:
        """Sigma_t for rows 0..T (the last is the one-step forecast)."""
        Cint, A, B, G = self._mats()
        return kern.bekk_path(_eps(eps), Cint, A, B, G, self.sigma0, self.params.asymmetric)

    def forecast_path(self, eps: np.ndarray) -> np.ndarray:
        return np.einsum("tii->ti", self.covariance_path(eps))[1:].copy()

    def named_params(self) -> dict:
        p = self.params
        out = {"c_lower": p.c_lower, "a_diag": p.a_diag, "b_diag": p.b_diag}
        if p.g_diag is not None:
            out["g_diag"] = p.g_diag
        return out


def bekk_forecast_var(params: BekkDiagParams, sigma_T: np.ndarray, eps_T: np.ndarray) -> np.ndarray:
    Cint, A, B, G = params.matrices()
    S = Cint + np.outer(A @ eps_T, A @ eps_T) + B @ sigma_T @ B.T
    if params.asymmetric:
        eta = np.minimum(eps_T, 0.0)
        S += np.outer(G @ eta, G @ eta)
    return np.diag(S).copy()


def _unpack_bekk(theta: np.ndarray, n: int, asym: bool):
    m = n * (n + 1) // 2
    C = np.zeros((n, n))
    C[np.tril_indices(n)] = theta[:m]
    a = theta[m : m + n]
    b = theta[m + n : m + 2 * n]
    g = theta[m + 2 * n : m + 3 * n] if asym else None
    return C, a, b, g


def bekk_fit(
    res: ResidualPanel | np.ndarray,
    asymmetric: bool = False,
    n_starts: int = 3,
    seed: int = 0,
) -> BekkFit:
    """Gaussian QMLE of the diagonal BEKK(1,1), optionally with the negative-shock term."""
    eps = _eps(res)
    T, n = eps.shape
    k = bekk_param_count(n, asymmetric)
    if T < 10 * k / n:
        raise DomainError(f"T={T} too short for {k} parameters")
    with stopwatch() as clock:
        s2 = panel_scale(eps)
        x = np.ascontiguousarray(eps / math.sqrt(s2))
        sigma0 = np.cov(x, rowvar=False, bias=True)
        tril = np.tril_indices(n)
        diag_pos = np.flatnonzero(tril[0] == tril[1])
        m = len(tril[0])
        zn = np.zeros(n)

        def nll(theta):
            C, a, b, g = _unpack_bekk(theta, n, asymmetric)
            persist = a**2 + b**2 + (0.5 * g**2 if asymmetric else 0.0)
            if np.any(persist >= 1.0):
                return np.inf
            return -kern.bekk_diag_loglik(x, C @ C.T, a, b, g if asymmetric else zn, sigma0, asymmetric) / T

        a0, b0, g0 = 0.25, 0.95, 0.1
        target = 1.0 - a0**2 - b0**2 - (0.5 * g0**2 if asymmetric else 0.0)
        C0 = np.linalg.cholesky(target * sigma0)
        default = np.concatenate([C0[tril], np.full(n, a0), np.full(n, b0)] + ([np.full(n, g0)] if asymmetric else []))
        lower = np.full(k, -np.inf)
        lower[diag_pos] = 1e-8
        lower[m:] = 0.0
        upper = np.full(k, np.inf)
        upper[m:] = 0.999
        box_hi = np.where(np.isfinite(upper), upper, 10.0)
        starts = perturbed_starts(default, lower, box_hi, n_starts, seed)
        opt = minimize_multistart(nll, starts, lower, upper, seed=seed)
        if not opt.converged:
            raise ConvergenceError(f"BEKK QMLE did not converge: {opt.message}", opt.trace)
        C, a, b, g = _unpack_bekk(opt.argmin, n, asymmetric)
        s = math.sqrt(s2)
        params = BekkDiagParams(C * s, a.copy(), b.copy(), None if g is None else g.copy())
        loglik = -opt.value * T - (T - 1) * n * math.log(s)
    return BekkFit(
        model="abekk" if asymmetric else "bekk", params=params, sigma0=sigma0 * s2, k=k, loglik=float(loglik),
        t_eff=T - 1, converged=opt.converged, fit_seconds=clock[0], seeds=(seed,),
    )


# ---------------------------------------------------------------- proximity-structured BEKK


@dataclass(frozen=True)
class ProxBekkParams:
    """Proximity-structured BEKK coefficients; scalars for the homogeneous variant."""

    s1: np.ndarray
    v: np.ndarray
    alpha0: np.ndarray
    alpha1: np.ndarray
    beta0: np.ndarray
    beta1: np.ndarray
    w: np.ndarray

    def __post_init__(self) -> None:
        if np.any(np.asarray(self.v) <= 0):
            raise DomainError("v must be positive")

    @property
    def homogeneous(self) -> bool:
        return np.ndim(self.s1) == 0

    def matrices(self):
        n = self.w.shape[0]
        I = np.eye(n)
        vec = lambda p: np.broadcast_to(np.asarray(p, dtype=float), (n,))
        S = I - np.diag(vec(self.s1)) @ self.w
        cond = np.linalg.cond(S)
        if not cond < 1e12:
            raise SingularMatrixError("I - S1 W is near-singular", cond)
        Sinv = np.linalg.inv(S)
        Cint = Sinv @ np.diag(vec(self.v)) @ Sinv.T
        A = np.diag(vec(self.alpha0)) + np.diag(vec(self.alpha1)) @ self.w
        B = np.diag(vec(self.beta0)) + np.diag(vec(self.beta1)) @ self.w
        return 0.5 * (Cint + Cint.T), A, B


def proxbekk_param_count(n: int, homogeneous: bool) -> int:
    return 6 if homogeneous else 6 * n


def proxbekk_loglik(eps: np.ndarray, params: ProxBekkParams, sigma0: np.ndarray) -> float:
    Cint, A, B = params.matrices()
    return bekk_loglik(eps, Cint, A, B, None, sigma0)


@dataclass(kw_only=True)
class ProxBekkFit(ModelFit):
    params: ProxBekkParams
    sigma0: np.ndarray

    def covariance_path(self, eps: np.ndarray) -> np.ndarray:
        Cint, A, B = self.params.matrices()
        n = A.shape[0]
        return kern.bekk_path(_eps(eps), Cint, A, B, np.zeros((n, n)), self.sigma0, False)

    def forecast_path(self, eps: np.ndarray) -> np.ndarray:
        return np.einsum("tii->ti", self.covariance_path(eps))[1:].copy()

    def named_params(self) -> dict:
        p = self.params
        return {"s1": p.s1, "v": p.v, "alpha0": p.alpha0, "alpha1": p.alpha1, "beta0": p.beta0, "beta1": p.beta1}


def _bekk_spectral_radius(A: np.ndarray, B: np.ndarray) -> float:
    M = np.kron(A, A) + np.kron(B, B)
    return float(np.abs(np.linalg.eigvals(M)).max())


def proxbekk_fit(
    res: ResidualPanel | np.ndarray,
    w: WeightMatrix | np.ndarray,
    homogeneous: bool = True,
    n_starts: int = 3,
    seed: int = 0,
) -> ProxBekkFit:
    """QMLE of Sigma_t = C + A e e' A' + B Sigma B' with C = S^-1 V S^-1', A = A0 + A1 W, B = B0 + B1 W."""
    eps = _eps(res)
    T, n = eps.shape
    W = np.asarray(getattr(w, "w", w), dtype=float)
    if W.shape != (n, n):
        raise DomainError("weight matrix does not match the panel")
    with stopwatch() as clock:
        s2 = panel_scale(eps)
        x = np.ascontiguousarray(eps / math.sqrt(s2))
        sigma0 = np.cov(x, rowvar=False, bias=True)
        m = 1 if homogeneous else n
        names = ("s1", "v", "alpha0", "alpha1", "beta0", "beta1")
        lo = {"s1": -0.99, "v": 1e-8, "alpha0": 0.0, "alpha1": -0.999, "beta0": 0.0, "beta1": -0.999}
        hi = {"s1": 0.99, "v": np.inf, "alpha0": 0.999, "alpha1": 0.999, "beta0": 0.999, "beta1": 0.999}
        init = {"s1": 0.1, "v": 0.035, "alpha0": 0.25, "alpha1": 0.02, "beta0": 0.93, "beta1": 0.02}
        lower = np.repeat([lo[k] for k in names], m)
        upper = np.repeat([hi[k] for k in names], m)
        default = np.repeat([init[k] for k in names], m)
        check_radius = n <= 8

        def unpack(theta) -> ProxBekkParams:
            parts = theta.reshape(6, m)
            vals = [float(p[0]) if homogeneous else p.copy() for p in parts]
            return ProxBekkParams(*vals, w=W)

        def nll(theta):
            try:
                Cint, A, B = unpack(theta).matrices()
            except SingularMatrixError:
                return np.inf
            if check_radius and _bekk_spectral_radius(A, B) >= 1.0:
                return np.inf
            return -kern.bekk_loglik(x, Cint, A, B, np.zeros((n, n)), sigma0, False) / T

        box_hi = np.where(np.isfinite(upper), upper, 10.0)
        starts = perturbed_starts(default, lower, box_hi, n_starts, seed)
        opt = minimize_multistart(nll, starts, lower, upper, seed=seed)
        if not opt.converged:
            raise ConvergenceError(f"proximity BEKK QMLE did not converge: {opt.message}", opt.trace)
        est = unpack(opt.argmin)
        v = est.v * s2 if homogeneous else np.asarray(est.v) * s2
        params = ProxBekkParams(est.s1, v, est.alpha0, est.alpha1, est.beta0, est.beta1, w=W)
        loglik = -opt.value * T - (T - 1) * n * 0.5 * math.log(s2)
    return ProxBekkFit(
        model="stbekk", params=params, sigma0=sigma0 * s2, k=proxbekk_param_count(n, homogeneous),
        loglik=float(loglik), t_eff=T - 1, converged=opt.converged, fit_seconds=clock[0], seeds=(seed,),
        matrix=getattr(w, "kind", None), notes={"variant": "homogeneous" if homogeneous else "heterogeneous"},
    )
