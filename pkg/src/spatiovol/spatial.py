"""Spatiotemporal volatility models: dynamic log-ARCH (GMM), spatial GARCH-X,
weight-matrix STGARCH and spatiotemporal EGARCH."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from . import _kernels as kern
from .base import ModelFit, panel_scale, stopwatch
from .errors import (
    ConvergenceError,
    DomainError,
    InstrumentRankError,
    InvalidParamError,
    SingularMatrixError,
)
from .networks import WeightMatrix
from .numerics import minimize_multistart, perturbed_starts, solve_linear, sym_eigen
from .panel import ResidualPanel
from .univariate import garch11_qmle

logger = logging.getLogger(__name__)

EPS_FLOOR = 1e-8
SYM_TOL = 1e-8


def _eps(res) -> np.ndarray:
    return np.ascontiguousarray(getattr(res, "values", res), dtype=float)


def _wmat(w, n: int) -> np.ndarray:
    W = np.ascontiguousarray(getattr(w, "w", w), dtype=float)
    if W.shape != (n, n):
        raise DomainError(f"weight matrix is {W.shape}, panel has {n} assets")
    return W


def log_sq(eps: np.ndarray) -> np.ndarray:
    """log(max(eps^2, 1e-16)); floored cells are logged."""
    e2 = np.asarray(eps, dtype=float) ** 2
    floor = EPS_FLOOR**2
    hits = int(np.count_nonzero(e2 < floor))
    if hits:
        logger.info("log-square transform floored %d cells at %.0e", hits, floor)
    return np.log(np.maximum(e2, floor))


# ---------------------------------------------------------------- DST-ARCH


@dataclass(frozen=True)
class DstarchParams:
    rho: float
    gamma: np.ndarray
    phi0: np.ndarray

    def __post_init__(self) -> None:
        if not abs(self.rho) <= 0.99:
            raise InvalidParamError(f"|rho| = {abs(self.rho):.4f} exceeds 0.99")
        if np.shape(self.gamma) != np.shape(self.phi0):
            raise InvalidParamError("gamma and phi0 must have the same length")


class _Spatial:
    """W with cached products; symmetric matrices go through the eigenbasis."""

    def __init__(self, W: np.ndarray, use_eigen: bool | None = None):
        self.W = W
        sym = bool(np.abs(W - W.T).max() <= SYM_TOL)
        self.eigen = sym if use_eigen is None else (use_eigen and sym)
        if use_eigen and not sym:
            raise DomainError("the eigenbasis path needs a symmetric weight matrix")
        if self.eigen:
            self.Q, self.lam = sym_eigen(W)

    def lag(self, X: np.ndarray, power: int = 1) -> np.ndarray:
        """Row-wise W^power x_t for a (T, n) array."""
        if self.eigen:
            return ((X @ self.Q.T) * self.lam**power) @ self.Q
        out = X
        for _ in range(power):
            out = out @ self.W.T
        return out

    def solve(self, rho: float, B: np.ndarray) -> np.ndarray:
        """(I - rho W)^-1 applied to every row of B (or to a vector)."""
        if self.eigen:
            d = 1.0 - rho * self.lam
            if np.abs(d).min() < 1e-12:
                raise SingularMatrixError("I - rho W is singular", float("inf"))
            return ((B @ self.Q.T) / d) @ self.Q
        n = self.W.shape[0]
        M = np.eye(n) - rho * self.W
        return solve_linear(M, np.asarray(B).T).T


def dstarch_param_count(n: int) -> int:
    """rho plus one gamma per asset; the fixed effects are transformed out."""
    return n + 1


def dstarch_forecast(params: DstarchParams, eps_star_T: np.ndarray, w) -> np.ndarray:
    """log h_{T+1} = (I - rho W)^-1 (Gamma e*_T + phi0)."""
    star = np.asarray(eps_star_T, dtype=float)
    W = _wmat(w, star.shape[-1])
    rhs = params.gamma * star + params.phi0
    if params.rho == 0.0:
        return rhs
    n = W.shape[0]
    return solve_linear(np.eye(n) - params.rho * W, rhs.T).T


@dataclass(kw_only=True)
class DstarchFit(ModelFit):
    params: DstarchParams
    w: np.ndarray
    scale: float = 1.0

    def log_forecast_path(self, eps: np.ndarray) -> np.ndarray:
        """Row t: log-variance forecast for t+1 from e*_t, on the E[log eps^2] scale."""
        star = log_sq(_eps(eps))
        p = self.params
        rhs = p.gamma * star + p.phi0
        if p.rho == 0.0:
            return rhs
        return _Spatial(self.w).solve(p.rho, rhs)

    def forecast_path(self, eps: np.ndarray) -> np.ndarray:
        return np.exp(self.log_forecast_path(eps))

    def named_params(self) -> dict:
        return {"rho": self.params.rho, "gamma": self.params.gamma, "phi0": self.params.phi0}


def _gmm_solve(XZ: np.ndarray, ZY: np.ndarray, Wt: np.ndarray) -> np.ndarray:
    A = XZ @ Wt @ XZ.T
    b = XZ @ Wt @ ZY
    return np.linalg.solve(A, b)


def dstarch_fit(
    res: ResidualPanel | np.ndarray,
    w: WeightMatrix | np.ndarray,
    use_eigen: bool | None = None,
    fix_rho: float | None = None,
) -> DstarchFit:
    """Two-step linear GMM for (I - rho W) e*_t = phi0 + Gamma e*_{t-1} + u_t.

    Data are demeaned per asset so phi0 drops out; each asset contributes the
    moments E[z_it u_it] = 0 with z_it = (e*_{i,t-1}, (W e*_{t-1})_i, (W^2 e*_{t-1})_i).
    phi0 is recovered from sample means afterwards. ``fix_rho=0`` gives the
    non-spatial log-ARCH benchmark.
    """
    eps = _eps(res)
    T, n = eps.shape
    W = _wmat(w, n)
    with stopwatch() as clock:
        star = log_sq(eps)
        sp = _Spatial(W, use_eigen)
        y, ylag = star[1:], star[:-1]
        ybar, lbar = y.mean(axis=0), ylag.mean(axis=0)
        yd, ld = y - ybar, ylag - lbar
        wy = sp.lag(yd)
        zl1, zl2 = sp.lag(ld), sp.lag(ld, 2)
        Te = yd.shape[0]

        # per-asset instrument blocks; all-zero columns (isolated nodes) are dropped
        blocks = []
        for i in range(n):
            cols = [ld[:, i]]
            for c in (zl1[:, i], zl2[:, i]):
                if np.abs(c).max() > 0.0:
                    cols.append(c)
            Zi = np.column_stack(cols)
            if np.linalg.matrix_rank(Zi) < Zi.shape[1]:
                Zi = Zi[:, :1] if np.linalg.matrix_rank(Zi[:, :2]) < 2 else Zi[:, :2]
            blocks.append(Zi)
        sizes = [b.shape[1] for b in blocks]
        offs = np.concatenate([[0], np.cumsum(sizes)])
        m = int(offs[-1])
        free_rho = fix_rho is None
        k = n + 1 if free_rho else n
        XZ = np.zeros((k, m))
        ZY = np.zeros(m)
        for i, Zi in enumerate(blocks):
            sl = slice(offs[i], offs[i + 1])
            yi = yd[:, i] if free_rho else yd[:, i] - fix_rho * wy[:, i]
            ZY[sl] = Zi.T @ yi
            XZ[(1 + i) if free_rho else i, sl] = ld[:, i] @ Zi
            if free_rho:
                XZ[0, sl] = wy[:, i] @ Zi
        if free_rho and not W.any():
            raise InstrumentRankError("weight matrix has no links, so rho is not identified")
        if np.linalg.matrix_rank(XZ) < k:
            raise InstrumentRankError("instruments do not identify (rho, Gamma)")
        ZZ = np.zeros((m, m))
        for i, Zi in enumerate(blocks):
            sl = slice(offs[i], offs[i + 1])
            ZZ[sl, sl] = Zi.T @ Zi
        theta = _gmm_solve(XZ, ZY, np.linalg.pinv(ZZ))

        def residuals(theta):
            rho = theta[0] if free_rho else fix_rho
            gam = theta[1:] if free_rho else theta
            return yd - rho * wy - gam * ld

        def moments(u):
            G = np.empty((Te, m))
            for i, Zi in enumerate(blocks):
                G[:, offs[i] : offs[i + 1]] = Zi * u[:, i : i + 1]
            return G

        G = moments(residuals(theta))
        S = G.T @ G / Te
        Wopt = np.linalg.pinv(S)
        theta = _gmm_solve(XZ, ZY, Wopt)
        gbar = moments(residuals(theta)).mean(axis=0)
        J = float(Te * gbar @ Wopt @ gbar)

        rho = float(theta[0]) if free_rho else float(fix_rho)
        gamma = np.asarray(theta[1:] if free_rho else theta, dtype=float).copy()
        if not abs(rho) <= 0.99:
            raise ConvergenceError(f"GMM estimate rho = {rho:.4f} is outside |rho| <= 0.99")
        phi0 = ybar - rho * (W @ ybar) - gamma * lbar
        params = DstarchParams(rho, gamma, phi0)
        M = np.eye(n) - rho * W
        radius = float(np.abs(np.linalg.eigvals(np.linalg.solve(M, np.diag(gamma)))).max())
        if radius >= 1.0:
            logger.warning("fitted DST-ARCH dynamics are not stationary (spectral radius %.4f)", radius)

        fit = DstarchFit(
            model="dstarch" if free_rho else "logarch", params=params, w=W, k=k, loglik=0.0,
            t_eff=T - 1, objective=J, matrix=getattr(w, "kind", None),
            notes={"path": "eigen" if sp.eigen else "direct", "spectral_radius": radius},
        )
        fit.loglik, fit.scale = _log_model_quasi_loglik(fit, eps)
    fit.fit_seconds = clock[0]
    return fit


def _log_model_quasi_loglik(fit: DstarchFit, eps: np.ndarray) -> tuple[float, float]:
    """Gaussian quasi log-likelihood of eps given h_t = c exp(f_{t-1}).

    f targets E[log eps^2], which sits below log h by E[log z^2]; the common
    factor c is profiled out in closed form so the fit has a variance-scale
    likelihood for BIC.
    """
    f = fit.log_forecast_path(eps)[:-1]
    e2 = eps[1:] ** 2
    c = float(np.mean(e2 * np.exp(-f)))
    lh = f + math.log(c)
    ll = -0.5 * float(np.sum(kern.LOG2PI + lh + e2 * np.exp(-lh)))
    return ll, c


def logarch_fit(res: ResidualPanel | np.ndarray, w: WeightMatrix | np.ndarray | None = None) -> DstarchFit:
    """The log-ARCH benchmark: DST-ARCH with rho fixed at zero."""
    eps = _eps(res)
    n = eps.shape[1]
    W = np.zeros((n, n)) if w is None else w
    if w is None:
        # with no spatial lag only the own-lag instrument is available
        return _logarch_ols(eps)
    return dstarch_fit(eps, W, fix_rho=0.0)


def _logarch_ols(eps: np.ndarray) -> DstarchFit:
    with stopwatch() as clock:
        T, n = eps.shape
        star = log_sq(eps)
        y, ylag = star[1:], star[:-1]
        yd, ld = y - y.mean(axis=0), ylag - ylag.mean(axis=0)
        gamma = (yd * ld).sum(axis=0) / (ld * ld).sum(axis=0)
        phi0 = y.mean(axis=0) - gamma * ylag.mean(axis=0)
        fit = DstarchFit(
            model="logarch", params=DstarchParams(0.0, gamma, phi0), w=np.zeros((n, n)),
            k=n, loglik=0.0, t_eff=T - 1, objective=0.0,
        )
        fit.loglik, fit.scale = _log_model_quasi_loglik(fit, eps)
    fit.fit_seconds = clock[0]
    return fit


# ---------------------------------------------------------------- spatial GARCH-X


@dataclass(frozen=True)
class SpGarchXParams:
    a0: np.ndarray
    a1: np.ndarray
    b1: np.ndarray
    a2: np.ndarray
    b2: np.ndarray

    def __post_init__(self) -> None:
        if np.any(np.asarray(self.a0) <= 0):
            raise InvalidParamError("a0 must be positive")
        for name in ("a1", "b1", "a2", "b2"):
            if np.any(np.asarray(getattr(self, name)) < 0):
                raise InvalidParamError(f"{name} must be non-negative")

    def system(self, W: np.ndarray):
        """(a0, A, B) of the joint recursion h_t = a0 + A e^2_{t-1} + B h_{t-1}."""
        A = np.diag(self.a1) + self.a2[:, None] * W
        B = np.diag(self.b1) + self.b2[:, None] * W
        return np.asarray(self.a0, float), A, B


def spgarchx_param_count(n: int) -> int:
    return 5 * n


def spgarchx_forecast(params: SpGarchXParams, eps_T: np.ndarray, h_T: np.ndarray, w) -> np.ndarray:
    """h_{i,T+1} = a0 + a1 e_iT^2 + b1 h_iT + a2 (W e_T^2)_i + b2 (W h_T)_i."""
    e2 = np.asarray(eps_T, float) ** 2
    h = np.asarray(h_T, float)
    W = _wmat(w, e2.size)
    p = params
    return p.a0 + p.a1 * e2 + p.b1 * h + p.a2 * (W @ e2) + p.b2 * (W @ h)


@dataclass(kw_only=True)
class SpGarchXFit(ModelFit):
    params: SpGarchXParams
    w: np.ndarray
    h0: np.ndarray

    def variance_path(self, eps: np.ndarray) -> np.ndarray:
        a0, A, B = self.params.system(self.w)
        return kern.variance_filter(_eps(eps), a0, A, B, self.h0)

    def forecast_path(self, eps: np.ndarray) -> np.ndarray:
        return self.variance_path(eps)[1:]

    def named_params(self) -> dict:
        p = self.params
        return {"a0": p.a0, "a1": p.a1, "b1": p.b1, "a2": p.a2, "b2": p.b2}


def _garchx_asset(x, xs, ys, h0, start, n_starts, seed, tol):
    T = x.size

    def nll(theta):
        a0, a1, b1, a2, b2 = theta
        if a1 + b1 > 0.999:
            return np.inf
        return -kern.garchx_loglik(x, xs, ys, a0, a1, b1, a2, b2, h0) / T

    lower = np.array([1e-10, 0.0, 0.0, 0.0, 0.0])
    upper = np.array([np.inf, 0.999, 0.999, 0.999, 0.999])
    box = np.array([10.0, 0.999, 0.999, 0.999, 0.999])
    return minimize_multistart(nll, perturbed_starts(start, lower, box, n_starts, seed), lower, upper, tol=tol, seed=seed)


def spgarchx_fit(
    res: ResidualPanel | np.ndarray,
    w: WeightMatrix | np.ndarray,
    n_starts: int = 1,
    seed: int = 0,
    tol: float = 1e-6,
    max_outer: int = 50,
    inner_tol: float = 1e-11,
    freeze_spatial: bool = False,
    min_len: int = 250,
) -> SpGarchXFit:
    """Iterative per-asset QMLE of the GARCH(1,1)-X model with spatial lags.

    Starts from univariate GARCH(1,1) fits; each outer iteration rebuilds
    X = W e^2 and Y = W h from the current variance paths, refits every asset
    with X, Y held fixed, and refilters. ``freeze_spatial`` pins a2 = b2 = 0.
    """
    eps = _eps(res)
    T, n = eps.shape
    W = _wmat(w, n)
    with stopwatch() as clock:
        s2 = panel_scale(eps)
        x = np.ascontiguousarray(eps / math.sqrt(s2))
        h0 = x.var(axis=0)
        theta = np.empty((n, 5))
        for i in range(n):
            try:
                f = garch11_qmle(x[:, i], n_starts=n_starts, seed=seed + i, min_len=min_len)
            except ConvergenceError as exc:
                raise ConvergenceError(f"spatial GARCH-X initialisation, asset {i}: {exc}", exc.trace) from exc
            p = f.params
            theta[i] = (p.omega, p.alpha, p.beta, 0.0, 0.0)
        changes: list[float] = []
        x2 = x**2
        converged = False
        for it in range(1, max_outer + 1):
            h = _spgarchx_filter(theta, W, x, h0)
            X = np.ascontiguousarray(x2 @ W.T)
            Y = np.ascontiguousarray(h[:T] @ W.T)
            new = theta.copy()
            for i in range(n):
                start = theta[i].copy()
                if freeze_spatial:
                    opt = _garchx_frozen(x[:, i], X[:, i], Y[:, i], h0[i], start, inner_tol)
                else:
                    if it == 1:
                        # move off the a2 = b2 = 0 corner of the univariate start
                        start[3:] = 0.01
                    opt = _garchx_asset(x[:, i], X[:, i], Y[:, i], h0[i], start, 1, seed + i, inner_tol)
                if not opt.converged:
                    raise ConvergenceError(
                        f"spatial GARCH-X outer iteration {it}, asset {i}: {opt.message}", opt.trace
                    )
                new[i] = opt.argmin
            change = float(np.abs(new - theta).max())
            changes.append(change)
            theta = new
            logger.debug("spatial GARCH-X outer iteration %d: max change %.3g", it, change)
            if change < tol or freeze_spatial:
                converged = True
                break
        if not converged:
            raise ConvergenceError(f"spatial GARCH-X outer loop did not converge in {max_outer} iterations")
        h = _spgarchx_filter(theta, W, x, h0)
        ll = float(kern.diag_gauss_loglik(x, h)) - (T - 1) * n * 0.5 * math.log(s2)
        params = SpGarchXParams(theta[:, 0] * s2, theta[:, 1].copy(), theta[:, 2].copy(), theta[:, 3].copy(), theta[:, 4].copy())
    return SpGarchXFit(
        model="spgarchx", params=params, w=W, h0=h0 * s2, k=spgarchx_param_count(n), loglik=ll,
        t_eff=T - 1, converged=True, fit_seconds=clock[0], seeds=(seed,), matrix=getattr(w, "kind", None),
        notes={"outer_iterations": len(changes), "max_change": changes},
    )


def _spgarchx_filter(theta: np.ndarray, W: np.ndarray, x: np.ndarray, h0: np.ndarray) -> np.ndarray:
    A = np.diag(theta[:, 1]) + theta[:, 3][:, None] * W
    B = np.diag(theta[:, 2]) + theta[:, 4][:, None] * W
    return kern.variance_filter(x, np.ascontiguousarray(theta[:, 0]), A, B, h0)


def _garchx_frozen(x, xs, ys, h0, start, tol):
    T = x.size

    def nll(theta):
        a0, a1, b1 = theta
        if a1 + b1 > 0.999:
            return np.inf
        return -kern.garchx_loglik(x, xs, ys, a0, a1, b1, 0.0, 0.0, h0) / T

    lower = np.array([1e-10, 0.0, 0.0])
    upper = np.array([np.inf, 0.999, 0.999])
    opt = minimize_multistart(nll, [start[:3]], lower, upper, tol=tol)
    opt.argmin = np.concatenate([opt.argmin, [0.0, 0.0]])
    return opt


# ---------------------------------------------------------------- STGARCH


@dataclass(frozen=True)
class StGarchParams:
    omega: float
    a_self: float
    a_sp: float
    b_self: float
    b_sp: float

    def __post_init__(self) -> None:
        if not self.omega > 0:
            raise InvalidParamError("omega must be positive")
        coefs = (self.a_self, self.a_sp, self.b_self, self.b_sp)
        if min(coefs) < 0:
            raise InvalidParamError("STGARCH coefficients must be non-negative")
        if sum(coefs) >= 1:
            raise InvalidParamError("a_self + a_sp + b_self + b_sp must be below 1")

    def system(self, W: np.ndarray):
        n = W.shape[0]
        eye = np.eye(n)
        return np.full(n, self.omega), self.a_self * eye + self.a_sp * W, self.b_self * eye + self.b_sp * W


STGARCH_K = 5


def stgarch_forecast(params: StGarchParams, eps_T: np.ndarray, h_T: np.ndarray, w) -> np.ndarray:
    e2 = np.asarray(eps_T, float) ** 2
    h = np.asarray(h_T, float)
    W = _wmat(w, e2.size)
    a0, A, B = params.system(W)
    return a0 + A @ e2 + B @ h


@dataclass(kw_only=True)
class StGarchFit(ModelFit):
    params: StGarchParams
    w: np.ndarray
    h0: np.ndarray

    def variance_path(self, eps: np.ndarray) -> np.ndarray:
        a0, A, B = self.params.system(self.w)
        return kern.variance_filter(_eps(eps), a0, A, B, self.h0)

    def forecast_path(self, eps: np.ndarray) -> np.ndarray:
        return self.variance_path(eps)[1:]

    def named_params(self) -> dict:
        p = self.params
        return {"omega": p.omega, "a_self": p.a_self, "a_sp": p.a_sp, "b_self": p.b_self, "b_sp": p.b_sp}


def stgarch_loglik(eps: np.ndarray, params: StGarchParams, w, h0: np.ndarray | None = None) -> float:
    eps = _eps(eps)
    W = _wmat(w, eps.shape[1])
    h0 = eps.var(axis=0) if h0 is None else np.asarray(h0, float)
    a0, A, B = params.system(W)
    return float(kern.diag_gauss_loglik(eps, kern.variance_filter(eps, a0, A, B, h0)))


def stgarch_fit(
    res: ResidualPanel | np.ndarray,
    w: WeightMatrix | np.ndarray,
    n_starts: int = 3,
    seed: int = 0,
    min_len: int = 500,
    tol: float = 1e-10,
) -> StGarchFit:
    """Gaussian QMLE of H_t = w 1 + (a I + a_sp W) e^2_{t-1} + (b I + b_sp W) H_{t-1}.

    The likelihood is flat along b_self + b_sp, so the default tolerance is
    tighter than the package default.
    """
    eps = _eps(res)
    T, n = eps.shape
    if T < min_len:
        raise DomainError(f"STGARCH needs at least {min_len} observations, got {T}")
    W = _wmat(w, n)
    eye = np.eye(n)
    with stopwatch() as clock:
        s2 = panel_scale(eps)
        x = np.ascontiguousarray(eps / math.sqrt(s2))
        h0 = x.var(axis=0)

        def nll(theta):
            om, a, asp, b, bsp = theta
            if a + asp + b + bsp >= 0.999:
                return np.inf
            h = kern.variance_filter(x, np.full(n, om), a * eye + asp * W, b * eye + bsp * W, h0)
            return -kern.diag_gauss_loglik(x, h) / T

        lower = np.array([1e-10, 0.0, 0.0, 0.0, 0.0])
        upper = np.array([np.inf, 0.999, 0.999, 0.999, 0.999])
        default = np.array([0.07, 0.05, 0.03, 0.80, 0.05])
        starts = perturbed_starts(default, lower, np.where(np.isfinite(upper), upper, 10.0), n_starts, seed)
        opt = minimize_multistart(nll, starts, lower, upper, tol=tol, seed=seed)
        if not opt.converged:
            raise ConvergenceError(f"STGARCH QMLE did not converge: {opt.message}", opt.trace)
        om, a, asp, b, bsp = (float(v) for v in opt.argmin)
        params = StGarchParams(om * s2, a, asp, b, bsp)
        ll = -opt.value * T - (T - 1) * n * 0.5 * math.log(s2)
    return StGarchFit(
        model="stgarch", params=params, w=W, h0=h0 * s2, k=STGARCH_K, loglik=float(ll), t_eff=T - 1,
        converged=True, fit_seconds=clock[0], seeds=(seed,), matrix=getattr(w, "kind", None),
    )


# ---------------------------------------------------------------- STEGARCH


@dataclass(frozen=True)
class StEgarchParams:
    alpha1: float
    rho0: float
    rho1: float
    lambda0: float
    lambda1: float
    theta: float
    xi: float

    def __post_init__(self) -> None:
        if not abs(self.lambda0) <= 0.99:
            raise InvalidParamError("|lambda0| must not exceed 0.99")
        if not abs(self.lambda1) < 1:
            raise InvalidParamError("|lambda1| must be below 1")


STEGARCH_K = 7


def _stegarch_system(lambda0: float, W1: np.ndarray, W2: np.ndarray):
    n = W1.shape[0]
    M = np.eye(n) - lambda0 * W2
    cond = np.linalg.cond(M)
    if not np.isfinite(cond) or cond > 1e12:
        raise SingularMatrixError("I - lambda0 W2 is singular", cond)
    minv = np.linalg.inv(M)
    return minv, np.ascontiguousarray(minv @ W1)


def g_news(z, theta: float, xi: float):
    """g(z) = theta z + xi (|z| - sqrt(2/pi))."""
    z = np.asarray(z, dtype=float)
    return theta * z + xi * (np.abs(z) - kern.SQRT_2_OVER_PI)


def stegarch_forecast(params: StEgarchParams, H_T: np.ndarray, z_T: np.ndarray, w1, w2=None) -> np.ndarray:
    """H*_{T+1} = (I - l0 W2)^-1 [a1 + r1 g(z_T) + l1 H*_T]; E g(z_{T+1}) = 0 removes the r0 term."""
    H = np.asarray(H_T, float)
    n = H.size
    W2 = _wmat(w1 if w2 is None else w2, n)
    p = params
    rhs = p.alpha1 + p.rho1 * g_news(z_T, p.theta, p.xi) + p.lambda1 * H
    return solve_linear(np.eye(n) - p.lambda0 * W2, rhs)


def stegarch_filter(eps: np.ndarray, params: StEgarchParams, w1, w2=None, logh0: np.ndarray | None = None, max_newton: int = 50):
    """Log-variance path (T+1 rows), innovations and log-likelihood.

    Each step recovers z_t from eps_t = exp(H*_t / 2) z_t, where H*_t depends
    on z_t through the contemporaneous spatial term.
    """
    eps = _eps(eps)
    n = eps.shape[1]
    W1 = _wmat(w1, n)
    W2 = W1 if w2 is None else _wmat(w2, n)
    logh0 = np.log(eps.var(axis=0)) if logh0 is None else np.asarray(logh0, float)
    p = params
    minv, k1 = _stegarch_system(p.lambda0, W1, W2)
    H, Z, ll, ok = kern.stegarch_filter(eps, minv, k1, p.alpha1, p.rho0, p.rho1, p.lambda1, p.theta, p.xi, logh0, max_newton)
    if not ok:
        raise ConvergenceError("STEGARCH filter failed to invert the innovation map")
    return H, Z, float(ll)


@dataclass(kw_only=True)
class StEgarchFit(ModelFit):
    params: StEgarchParams
    w1: np.ndarray
    w2: np.ndarray
    logh0: np.ndarray

    def log_variance_path(self, eps: np.ndarray) -> np.ndarray:
        H, _, _ = stegarch_filter(eps, self.params, self.w1, self.w2, self.logh0)
        return H

    def log_forecast_path(self, eps: np.ndarray) -> np.ndarray:
        return self.log_variance_path(eps)[1:]

    def forecast_path(self, eps: np.ndarray) -> np.ndarray:
        return np.exp(self.log_forecast_path(eps))

    def named_params(self) -> dict:
        p = self.params
        return {
            "alpha1": p.alpha1, "rho0": p.rho0, "rho1": p.rho1, "lambda0": p.lambda0,
            "lambda1": p.lambda1, "theta": p.theta, "xi": p.xi,
        }


def stegarch_fit(
    res: ResidualPanel | np.ndarray,
    w1: WeightMatrix | np.ndarray,
    w2: WeightMatrix | np.ndarray | None = None,
    n_starts: int = 3,
    seed: int = 0,
    max_newton: int = 50,
    tol: float = 1e-10,
) -> StEgarchFit:
    """QMLE of (I - l0 W2) H*_t = a1 + r0 W1 g(z_t) + r1 g(z_{t-1}) + l1 H*_{t-1}.

    (r0, r1, theta, xi) are identified only up to a common scale, so r1 is
    fixed at 1 and the remaining six are estimated. The surface has long flat
    ridges, hence the tight default tolerance.
    """
    eps = _eps(res)
    T, n = eps.shape
    W1 = _wmat(w1, n)
    W2 = W1 if w2 is None else _wmat(w2, n)
    with stopwatch() as clock:
        logh0 = np.log(eps.var(axis=0))
        level = float(np.mean(logh0))

        def nll(theta):
            a1, r0, l0, l1, th, xi = theta
            try:
                minv, k1 = _stegarch_system(l0, W1, W2)
            except SingularMatrixError:
                return np.inf
            if np.abs(np.linalg.eigvals(l1 * minv)).max() >= 0.999:
                return np.inf
            _, _, ll, ok = kern.stegarch_filter(eps, minv, k1, a1, r0, 1.0, l1, th, xi, logh0, max_newton)
            return -ll / T if ok else np.inf

        lower = np.array([-50.0, -2.0, -0.99, -0.999, -1.0, -1.0])
        upper = np.array([50.0, 2.0, 0.99, 0.999, 1.0, 1.0])
        default = np.array([0.05 * level, 0.1, 0.1, 0.85, -0.05, 0.1])
        starts = perturbed_starts(default, lower, upper, n_starts, seed, scale=0.3)
        opt = minimize_multistart(nll, starts, lower, upper, tol=tol, seed=seed)
        if not opt.converged:
            raise ConvergenceError(
                f"STEGARCH QMLE did not converge from {n_starts} starts: {opt.message}", opt.trace
            )
        a1, r0, l0, l1, th, xi = (float(v) for v in opt.argmin)
        params = StEgarchParams(a1, r0, 1.0, l0, l1, th, xi)
    return StEgarchFit(
        model="stegarch", params=params, w1=W1, w2=W2, logh0=logh0, k=STEGARCH_K,
        loglik=float(-opt.value * T), t_eff=T - 1, converged=True, fit_seconds=clock[0],
        seeds=(seed,), matrix=getattr(w1, "kind", None), notes={"rho1": "fixed at 1 (scale normalisation)"},
    )
