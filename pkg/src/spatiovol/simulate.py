"""Seeded data-generating processes for every model, with standard-normal innovations."""

from __future__ import annotations

import math

import numpy as np

from . import _kernels as kern
from .errors import InvalidParamError
from .univariate import Egarch11Params, Garch11Params, simulate_egarch11, simulate_garch11


def complete_weights(n: int) -> np.ndarray:
    """Equal weights 1/(n-1) on every other node."""
    w = np.full((n, n), 1.0 / (n - 1))
    np.fill_diagonal(w, 0.0)
    return w


def circulant_weights(n: int, k: int) -> np.ndarray:
    """Symmetric, row-stochastic k-neighbour ring: offsets +-1, +-2, ... (plus n/2 when k is odd)."""
    if not 0 < k < n:
        raise InvalidParamError("need 0 < k < n")
    offsets = []
    for s in range(1, n // 2 + 1):
        if len(offsets) + 2 <= k and 2 * s != n:
            offsets += [s, n - s]
        elif len(offsets) < k and 2 * s == n:
            offsets.append(s)
    if len(offsets) != k:
        raise InvalidParamError(f"no symmetric circulant graph of degree {k} on {n} nodes")
    w = np.zeros((n, n))
    for i in range(n):
        for s in offsets:
            w[i, (i + s) % n] = 1.0 / k
    return w


def garch_panel(params: list[Garch11Params], T: int, seed: int) -> np.ndarray:
    rng = np.random.default_rng(seed)
    return np.column_stack([simulate_garch11(p, T, rng) for p in params])


def egarch_panel(params: list[Egarch11Params], T: int, seed: int) -> np.ndarray:
    rng = np.random.default_rng(seed)
    return np.column_stack([simulate_egarch11(p, T, rng) for p in params])


def dcc_panel(params: list[Garch11Params], lambda1: float, lambda2: float, qbar: np.ndarray, T: int, seed: int, burn: int = 500) -> np.ndarray:
    if lambda1 < 0 or lambda2 < 0 or lambda1 + lambda2 >= 1:
        raise InvalidParamError("DCC loadings out of range")
    rng = np.random.default_rng(seed)
    n = len(params)
    om = np.array([p.omega for p in params])
    al = np.array([p.alpha for p in params])
    be = np.array([p.beta for p in params])
    h = om / (1.0 - al - be)
    Q = qbar.copy()
    u_prev = np.zeros(n)
    out = np.empty((T + burn, n))
    for t in range(T + burn):
        if t > 0:
            Q = (1 - lambda1 - lambda2) * qbar + lambda1 * np.outer(u_prev, u_prev) + lambda2 * Q
        d = np.sqrt(np.diag(Q))
        R = Q / np.outer(d, d)
        u = np.linalg.cholesky(R) @ rng.standard_normal(n)
        e = np.sqrt(h) * u
        out[t] = e
        u_prev = u
        h = om + al * e**2 + be * h
    return out[burn:]


def bekk_panel(Cint: np.ndarray, A: np.ndarray, B: np.ndarray, T: int, seed: int, G: np.ndarray | None = None, burn: int = 500) -> np.ndarray:
    """Draw from Sigma_t = Cint + A e e' A' [+ G n n' G'] + B Sigma B' with Gaussian innovations."""
    rng = np.random.default_rng(seed)
    n = Cint.shape[0]
    S = Cint.copy()
    for _ in range(200):
        S = Cint + A @ S @ A.T + B @ S @ B.T + (0.5 * G @ S @ G.T if G is not None else 0.0)
    out = np.empty((T + burn, n))
    for t in range(T + burn):
        e = np.linalg.cholesky(S) @ rng.standard_normal(n)
        out[t] = e
        S = Cint + np.outer(A @ e, A @ e) + B @ S @ B.T
        if G is not None:
            eta = np.minimum(e, 0.0)
            S += np.outer(G @ eta, G @ eta)
    return out[burn:]


def dstarch_panel(rho: float, gamma: np.ndarray, phi0: np.ndarray, W: np.ndarray, T: int, seed: int, burn: int = 500) -> np.ndarray:
    """(I - rho W) e*_t = phi0 + Gamma e*_{t-1} + log z_t^2, returned as eps = sign * exp(e*/2)."""
    rng = np.random.default_rng(seed)
    n = W.shape[0]
    gamma = np.broadcast_to(np.asarray(gamma, float), (n,))
    phi0 = np.broadcast_to(np.asarray(phi0, float), (n,))
    M = np.eye(n) - rho * W
    Minv = np.linalg.inv(M)
    if np.abs(np.linalg.eigvals(Minv @ np.diag(gamma))).max() >= 1:
        raise InvalidParamError("DST-ARCH dynamics are not stationary")
    z = rng.standard_normal((T + burn, n))
    star = np.zeros(n)
    out = np.empty((T + burn, n))
    for t in range(T + burn):
        star = Minv @ (phi0 + gamma * star + np.log(np.maximum(z[t] ** 2, 1e-300)))
        out[t] = np.sign(z[t]) * np.exp(0.5 * star)
    return out[burn:]


def variance_system_panel(a0: np.ndarray, Am: np.ndarray, Bm: np.ndarray, T: int, seed: int, burn: int = 500) -> np.ndarray:
    """h_t = a0 + Am e_{t-1}^2 + Bm h_{t-1}, e_t = sqrt(h_t) z_t."""
    rng = np.random.default_rng(seed)
    n = a0.size
    P = Am + Bm
    if np.abs(np.linalg.eigvals(P)).max() >= 1:
        raise InvalidParamError("variance system is not stationary")
    h = np.linalg.solve(np.eye(n) - P, a0)
    out = np.empty((T + burn, n))
    for t in range(T + burn):
        e = np.sqrt(h) * rng.standard_normal(n)
        out[t] = e
        h = a0 + Am @ e**2 + Bm @ h
    return out[burn:]


def stgarch_panel(omega, a_self, a_sp, b_self, b_sp, W, T, seed, burn=500):
    n = W.shape[0]
    I = np.eye(n)
    return variance_system_panel(np.full(n, omega), a_self * I + a_sp * W, b_self * I + b_sp * W, T, seed, burn)


def spgarchx_panel(a0, a1, b1, a2, b2, W, T, seed, burn=500):
    n = W.shape[0]
    v = lambda p: np.broadcast_to(np.asarray(p, float), (n,))
    Am = np.diag(v(a1)) + np.diag(v(a2)) @ W
    Bm = np.diag(v(b1)) + np.diag(v(b2)) @ W
    return variance_system_panel(v(a0).copy(), Am, Bm, T, seed, burn)


def stegarch_panel(alpha1, rho0, rho1, lambda0, lambda1, theta, xi, W1, W2, T, seed, burn=500) -> np.ndarray:
    n = W1.shape[0]
    if abs(lambda0) > 0.99:
        raise InvalidParamError("|lambda0| must not exceed 0.99")
    rng = np.random.default_rng(seed)
    minv = np.linalg.inv(np.eye(n) - lambda0 * W2)
    if np.abs(np.linalg.eigvals(lambda1 * minv)).max() >= 1:
        raise InvalidParamError("STEGARCH log-variance dynamics are not stationary")
    k1 = minv @ W1
    logh0 = np.linalg.solve(np.eye(n) - lambda1 * minv, alpha1 * minv.sum(axis=1))
    z = rng.standard_normal((T + burn, n))
    eps, _ = kern.stegarch_simulate(z, minv, k1, alpha1, rho0, rho1, lambda1, theta, xi, logh0)
    return eps[burn:]
