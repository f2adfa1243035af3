"""Compiled recursions. Every filter treats row 0 as the initial state and the
likelihood sums over rows 1..T-1 (conditioning on the first observation)."""

import math

import numpy as np
from numba import njit

LOG2PI = math.log(2.0 * math.pi)
SQRT_2_OVER_PI = math.sqrt(2.0 / math.pi)


@njit(cache=True)
def garch11_filter(eps, omega, alpha, beta, h0):
    T = eps.shape[0]
    h = np.empty(T)
    h[0] = h0
    for t in range(1, T):
        h[t] = omega + alpha * eps[t - 1] ** 2 + beta * h[t - 1]
    return h


@njit(cache=True)
def garch11_loglik(eps, omega, alpha, beta, h0):
    T = eps.shape[0]
    h = h0
    ll = 0.0
    for t in range(1, T):
        h = omega + alpha * eps[t - 1] ** 2 + beta * h
        if not h > 0.0:
            return -np.inf
        ll -= 0.5 * (LOG2PI + math.log(h) + eps[t] ** 2 / h)
    return ll


@njit(cache=True)
def egarch11_filter(eps, omega, beta, alpha, gamma, logh0):
    T = eps.shape[0]
    lh = np.empty(T)
    lh[0] = logh0
    for t in range(1, T):
        z = eps[t - 1] * math.exp(-0.5 * lh[t - 1])
        lh[t] = omega + beta * lh[t - 1] + alpha * abs(z) + gamma * z
    return lh


@njit(cache=True)
def egarch11_loglik(eps, omega, beta, alpha, gamma, logh0):
    T = eps.shape[0]
    lh = logh0
    ll = 0.0
    for t in range(1, T):
        z = eps[t - 1] * math.exp(-0.5 * lh)
        lh = omega + beta * lh + alpha * abs(z) + gamma * z
        if not abs(lh) < 700.0:
            return -np.inf
        ll -= 0.5 * (LOG2PI + lh + eps[t] ** 2 * math.exp(-lh))
    return ll


@njit(cache=True)
def _chol_inplace(S, L):
    """Lower Cholesky of S into L; returns False if S is not positive definite."""
    n = S.shape[0]
    for i in range(n):
        for j in range(i + 1):
            s = S[i, j]
            for k in range(j):
                s -= L[i, k] * L[j, k]
            if i == j:
                if not s > 0.0:
                    return False
                L[i, i] = math.sqrt(s)
            else:
                L[i, j] = s / L[j, j]
        for j in range(i + 1, n):
            L[i, j] = 0.0
    return True


@njit(cache=True)
def _gauss_logpdf_chol(L, x, work):
    """log N(x; 0, LL') given the Cholesky factor L."""
    n = L.shape[0]
    logdet = 0.0
    quad = 0.0
    for i in range(n):
        s = x[i]
        for k in range(i):
            s -= L[i, k] * work[k]
        work[i] = s / L[i, i]
        quad += work[i] ** 2
        logdet += 2.0 * math.log(L[i, i])
    return -0.5 * (n * LOG2PI + logdet + quad)


@njit(cache=True)
def dcc_corr_loglik(u, qbar, l1, l2):
    """Correlation part of the DCC likelihood: -1/2 sum(log|R_t| + u'R^-1 u - u'u)."""
    T, n = u.shape
    Q = qbar.copy()
    R = np.empty((n, n))
    L = np.zeros((n, n))
    work = np.empty(n)
    ll = 0.0
    c = 1.0 - l1 - l2
    for t in range(1, T):
        for i in range(n):
            for j in range(n):
                Q[i, j] = c * qbar[i, j] + l1 * u[t - 1, i] * u[t - 1, j] + l2 * Q[i, j]
        for i in range(n):
            for j in range(n):
                R[i, j] = Q[i, j] / math.sqrt(Q[i, i] * Q[j, j])
        if not _chol_inplace(R, L):
            return -np.inf
        uu = 0.0
        for i in range(n):
            uu += u[t, i] ** 2
        ll += _gauss_logpdf_chol(L, u[t], work) + 0.5 * (n * LOG2PI + uu)
    return ll


@njit(cache=True)
def dcc_q_path(u, qbar, l1, l2):
    T, n = u.shape
    out = np.empty((T, n, n))
    out[0] = qbar
    c = 1.0 - l1 - l2
    for t in range(1, T):
        for i in range(n):
            for j in range(n):
                out[t, i, j] = c * qbar[i, j] + l1 * u[t - 1, i] * u[t - 1, j] + l2 * out[t - 1, i, j]
    return out


@njit(cache=True)
def _bekk_step(Cint, A, B, G, e, S_prev, out, asym, v1, v2, tmp):
    """out = Cint + (A e)(A e)' + B S_prev B' [+ (G eta)(G eta)'] without allocating."""
    n = e.shape[0]
    for i in range(n):
        s = 0.0
        r = 0.0
        for j in range(n):
            s += A[i, j] * e[j]
            if asym:
                r += G[i, j] * min(e[j], 0.0)
        v1[i] = s
        v2[i] = r
    for i in range(n):
        for j in range(n):
            s = 0.0
            for k in range(n):
                s += B[i, k] * S_prev[k, j]
            tmp[i, j] = s
    for i in range(n):
        for j in range(i + 1):
            s = 0.0
            for k in range(n):
                s += tmp[i, k] * B[j, k]
            val = Cint[i, j] + v1[i] * v1[j] + s
            if asym:
                val += v2[i] * v2[j]
            out[i, j] = val
            out[j, i] = val


@njit(cache=True)
def bekk_loglik(eps, Cint, A, B, G, sigma0, asym):
    """Sigma_t = Cint + A e e' A' [+ G n n' G'] + B Sigma_{t-1} B' with full coefficient matrices."""
    T, n = eps.shape
    S = sigma0.copy()
    Snew = np.empty((n, n))
    L = np.zeros((n, n))
    work = np.empty(n)
    v1 = np.empty(n)
    v2 = np.empty(n)
    tmp = np.empty((n, n))
    ll = 0.0
    for t in range(1, T):
        _bekk_step(Cint, A, B, G, eps[t - 1], S, Snew, asym, v1, v2, tmp)
        S, Snew = Snew, S
        if not _chol_inplace(S, L):
            return -np.inf
        ll += _gauss_logpdf_chol(L, eps[t], work)
    return ll


@njit(cache=True)
def bekk_diag_loglik(eps, Cint, a, b, g, sigma0, asym):
    """Diagonal BEKK: Sigma_ij = Cint_ij + a_i a_j e_i e_j + b_i b_j Sigma_ij [+ g_i g_j n_i n_j]."""
    T, n = eps.shape
    S = sigma0.copy()
    L = np.zeros((n, n))
    work = np.empty(n)
    bb = np.empty((n, n))
    for i in range(n):
        for j in range(n):
            bb[i, j] = b[i] * b[j]
    ll = 0.0
    for t in range(1, T):
        e = eps[t - 1]
        for i in range(n):
            ai = a[i] * e[i]
            gi = g[i] * min(e[i], 0.0)
            for j in range(i + 1):
                val = Cint[i, j] + ai * a[j] * e[j] + bb[i, j] * S[i, j]
                if asym:
                    val += gi * g[j] * min(e[j], 0.0)
                S[i, j] = val
                S[j, i] = val
        if not _chol_inplace(S, L):
            return -np.inf
        ll += _gauss_logpdf_chol(L, eps[t], work)
    return ll


@njit(cache=True)
def bekk_path(eps, Cint, A, B, G, sigma0, asym):
    T, n = eps.shape
    out = np.empty((T + 1, n, n))
    out[0] = sigma0
    v1 = np.empty(n)
    v2 = np.empty(n)
    tmp = np.empty((n, n))
    for t in range(1, T + 1):
        _bekk_step(Cint, A, B, G, eps[t - 1], out[t - 1], out[t], asym, v1, v2, tmp)
    return out


@njit(cache=True)
def variance_filter(eps, a0, Am, Bm, h0):
    """h_t = a0 + Am e_{t-1}^2 + Bm h_{t-1}; returns T+1 rows, the last being the one-step forecast."""
    T, n = eps.shape
    h = np.empty((T + 1, n))
    h[0] = h0
    e2 = np.empty(n)
    for t in range(1, T + 1):
        for i in range(n):
            e2[i] = eps[t - 1, i] ** 2
        for i in range(n):
            s = a0[i]
            for j in range(n):
                s += Am[i, j] * e2[j] + Bm[i, j] * h[t - 1, j]
            h[t, i] = s
    return h


@njit(cache=True)
def diag_gauss_loglik(eps, h):
    """Sum over rows 1..T-1 of independent Gaussian log-densities with variances h."""
    T, n = eps.shape
    ll = 0.0
    for t in range(1, T):
        for i in range(n):
            v = h[t, i]
            if not v > 0.0:
                return -np.inf
            ll -= 0.5 * (LOG2PI + math.log(v) + eps[t, i] ** 2 / v)
    return ll


@njit(cache=True)
def garchx_loglik(eps, x, y, a0, a1, b1, a2, b2, h0):
    """h_t = a0 + a1 e_{t-1}^2 + b1 h_{t-1} + a2 x_{t-1} + b2 y_{t-1}."""
    T = eps.shape[0]
    h = h0
    ll = 0.0
    for t in range(1, T):
        h = a0 + a1 * eps[t - 1] ** 2 + b1 * h + a2 * x[t - 1] + b2 * y[t - 1]
        if not (h > 0.0 and h < 1e300):
            return -np.inf
        ll -= 0.5 * (LOG2PI + math.log(h) + eps[t] ** 2 / h)
    return ll


@njit(cache=True)
def _lu_solve(J, F, out):
    """Solve J out = F by Gaussian elimination with partial pivoting (J, F overwritten).

    Returns the determinant of J (0.0 when singular, in which case out is untouched).
    """
    n = J.shape[0]
    det = 1.0
    for k in range(n):
        p = k
        for i in range(k + 1, n):
            if abs(J[i, k]) > abs(J[p, k]):
                p = i
        if J[p, k] == 0.0:
            return 0.0
        if p != k:
            det = -det
            for j in range(n):
                J[k, j], J[p, j] = J[p, j], J[k, j]
            F[k], F[p] = F[p], F[k]
        det *= J[k, k]
        for i in range(k + 1, n):
            f = J[i, k] / J[k, k]
            for j in range(k, n):
                J[i, j] -= f * J[k, j]
            F[i] -= f * F[k]
    for i in range(n - 1, -1, -1):
        s = F[i]
        for j in range(i + 1, n):
            s -= J[i, j] * out[j]
        out[i] = s / J[i, i]
    return det


@njit(cache=True)
def _g(z, theta, xi):
    return theta * z + xi * (abs(z) - SQRT_2_OVER_PI)


@njit(cache=True)
def stegarch_filter(eps, minv, k1, alpha1, rho0, rho1, lam1, theta, xi, logh0, max_newton):
    """Filter of the spatiotemporal EGARCH recursion given the factored system.

    ``minv`` is (I - lam0 W2)^-1 and ``k1`` is minv @ W1. At each t the
    innovation vector z_t solving eps_t = exp(H*_t(z_t) / 2) * z_t is found by
    Newton's method, where H*_t = c_t + rho0 k1 g(z_t). Returns the log-variance
    path (T+1 rows, last is the one-step forecast), the innovations, the
    log-likelihood (with the Jacobian of the z -> eps map) and an ok flag.
    """
    T, n = eps.shape
    H = np.empty((T + 1, n))
    Z = np.empty((T, n))
    H[0] = logh0
    for i in range(n):
        Z[0, i] = eps[0, i] * math.exp(-0.5 * logh0[i])
    rowsum = minv.sum(axis=1)
    rhs = np.empty(n)
    c = np.empty(n)
    z = np.empty(n)
    gz = np.empty(n)
    dg = np.empty(n)
    F = np.empty(n)
    J = np.empty((n, n))
    step = np.empty(n)
    ll = 0.0
    for t in range(1, T + 1):
        for i in range(n):
            rhs[i] = rho1 * _g(Z[t - 1, i], theta, xi) + lam1 * H[t - 1, i]
        for i in range(n):
            s = alpha1 * rowsum[i]
            for j in range(n):
                s += minv[i, j] * rhs[j]
            c[i] = s
        if t == T:
            for i in range(n):
                H[t, i] = c[i]
            break
        y = eps[t]
        for i in range(n):
            z[i] = y[i] * math.exp(-0.5 * c[i])
        converged = rho0 == 0.0
        for it in range(max_newton):
            for i in range(n):
                gz[i] = _g(z[i], theta, xi)
                dg[i] = theta + (xi if z[i] >= 0.0 else -xi)
            fmax = 0.0
            for i in range(n):
                s = c[i]
                for j in range(n):
                    s += rho0 * k1[i, j] * gz[j]
                H[t, i] = s
                if not abs(s) < 700.0:
                    return H, Z, -np.inf, False
                ex = math.exp(0.5 * s)
                F[i] = ex * z[i] - y[i]
                fmax = max(fmax, abs(F[i]) / (1e-300 + abs(y[i]) + ex))
                for j in range(n):
                    J[i, j] = 0.5 * ex * z[i] * rho0 * k1[i, j] * dg[j]
                J[i, i] += ex
            if converged or fmax < 1e-13:
                converged = True
                break
            if _lu_solve(J, F, step) == 0.0:
                return H, Z, -np.inf, False
            for i in range(n):
                z[i] -= step[i]
        if not converged:
            return H, Z, -np.inf, False
        if rho0 == 0.0:
            for i in range(n):
                H[t, i] = c[i]
                z[i] = y[i] * math.exp(-0.5 * c[i])
        # log|det J| = sum H/2 + log|det(I + diag(z/2) rho0 k1 diag(g'))|
        logdet = 0.0
        for i in range(n):
            logdet += 0.5 * H[t, i]
        if rho0 != 0.0:
            for i in range(n):
                dg[i] = theta + (xi if z[i] >= 0.0 else -xi)
            for i in range(n):
                for j in range(n):
                    J[i, j] = 0.5 * z[i] * rho0 * k1[i, j] * dg[j]
                J[i, i] += 1.0
            for i in range(n):
                F[i] = 0.0
            d = _lu_solve(J, F, step)
            if not d > 0.0:
                return H, Z, -np.inf, False
            logdet += math.log(d)
        for i in range(n):
            Z[t, i] = z[i]
            ll -= 0.5 * (LOG2PI + z[i] ** 2)
        ll -= logdet
    return H, Z, ll, True


@njit(cache=True)
def stegarch_simulate(z, minv, k1, alpha1, rho0, rho1, lam1, theta, xi, logh0):
    T, n = z.shape
    H = np.empty((T, n))
    eps = np.empty((T, n))
    H[0] = logh0
    rowsum = minv.sum(axis=1)
    rhs = np.empty(n)
    for i in range(n):
        eps[0, i] = math.exp(0.5 * H[0, i]) * z[0, i]
    for t in range(1, T):
        for i in range(n):
            rhs[i] = rho1 * _g(z[t - 1, i], theta, xi) + lam1 * H[t - 1, i]
        for i in range(n):
            s = alpha1 * rowsum[i]
            for j in range(n):
                s += minv[i, j] * rhs[j] + rho0 * k1[i, j] * _g(z[t, j], theta, xi)
            H[t, i] = s
            eps[t, i] = math.exp(0.5 * s) * z[t, i]
    return eps, H
