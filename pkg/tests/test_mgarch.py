import math

import numpy as np
import pytest
from scipy import stats

from spatiovol import _kernels as kern
from spatiovol import simulate as sim
from spatiovol.errors import DomainError
from spatiovol.mgarch import (
    BekkDiagParams,
    DccFit,
    DccParams,
    ProxBekkParams,
    bekk_fit,
    bekk_forecast_var,
    bekk_loglik,
    dcc_corr_loglik,
    dcc_fit,
    dcc_param_count,
    proxbekk_fit,
    proxbekk_loglik,
)
from spatiovol.numerics import OptProblem, is_pd, minimize
from spatiovol.univariate import Garch11Params


def _qbar(n, r):
    q = np.full((n, n), r)
    np.fill_diagonal(q, 1.0)
    return q


@pytest.fixture(scope="module")
def dcc_data():
    return sim.dcc_panel([Garch11Params(0.05, 0.08, 0.9)] * 3, 0.05, 0.9, _qbar(3, 0.4), 3000, 7)


def test_dcc_corr_loglik_matches_loop(rng):
    u = rng.normal(size=(200, 3))
    qbar = np.corrcoef(u, rowvar=False)
    l1, l2 = 0.06, 0.9
    Q = qbar.copy()
    ll = 0.0
    for t in range(1, 200):
        Q = (1 - l1 - l2) * qbar + l1 * np.outer(u[t - 1], u[t - 1]) + l2 * Q
        d = np.sqrt(np.diag(Q))
        R = Q / np.outer(d, d)
        ll += stats.multivariate_normal(cov=R).logpdf(u[t]) - stats.norm.logpdf(u[t]).sum()
    assert abs(dcc_corr_loglik(u, qbar, l1, l2) - ll) < 1e-9


def test_dcc_zero_loadings_is_ccc(dcc_data):
    fit = dcc_fit(dcc_data, n_starts=1, fix_loadings=(0.0, 0.0))
    Q = fit.q_path(dcc_data)
    assert np.max(np.abs(Q - fit.params.qbar)) == 0.0
    assert fit.k == dcc_param_count(3) == 14


def test_dcc_fit_paths_and_loglik(dcc_data):
    fit = dcc_fit(dcc_data, n_starts=1)
    assert abs(fit.params.lambda1 - 0.05) < 0.05 and abs(fit.params.lambda2 - 0.9) < 0.08
    R = fit.correlation_path(dcc_data)
    assert np.allclose(np.einsum("tii->ti", R), 1.0)
    assert all(is_pd(R[t]) for t in range(0, 3000, 97))
    h = fit.variance_path(dcc_data)
    assert h.shape == (3001, 3)
    # total loglik = univariate parts + correlation part
    u = dcc_data / np.sqrt(h[:-1])
    uni = sum(
        -0.5 * np.sum(np.log(2 * np.pi) + np.log(h[1:-1, i]) + dcc_data[1:, i] ** 2 / h[1:-1, i]) for i in range(3)
    )
    total = uni + dcc_corr_loglik(u, fit.params.qbar, fit.params.lambda1, fit.params.lambda2)
    assert abs(fit.loglik - total) < 1e-6 * abs(total)


def test_dcc_forecast_examples():
    qbar = np.eye(2)
    p0 = Garch11Params(0.1, 0.0, 0.8)
    fit = DccFit(model="dcc", k=8, loglik=0.0, t_eff=1, params=DccParams((p0, p0), 0.0, 0.0, qbar), h0=np.ones(2))
    e = np.array([[0.3, -2.0], [1.5, 0.2]])
    h = fit.variance_path(e)
    np.testing.assert_allclose(h[-1], 0.1 + 0.8 * h[-2], rtol=1e-15)
    # at the unconditional variance with eps^2 equal to it the forecast stays put
    p1 = Garch11Params(0.1, 0.1, 0.8)
    fit = DccFit(model="dcc", k=8, loglik=0.0, t_eff=1, params=DccParams((p1, p1), 0.0, 0.0, qbar), h0=np.ones(2))
    np.testing.assert_allclose(fit.variance_path(np.ones((4, 2))), 1.0, atol=1e-15)


def test_dcc_params_validation():
    with pytest.raises(DomainError):
        DccParams((), 0.5, 0.6, np.eye(2))


def test_bekk_loglik_matches_scipy(rng):
    n = 3
    e = rng.normal(size=(150, n))
    C = np.tril(rng.uniform(0.1, 0.3, (n, n)))
    A, B, G = np.diag([0.3, 0.2, 0.25]), np.diag([0.9, 0.93, 0.88]), np.diag([0.2, 0.1, 0.15])
    S = np.eye(n)
    ll = 0.0
    for t in range(1, 150):
        eta = np.minimum(e[t - 1], 0)
        S = C @ C.T + A @ np.outer(e[t - 1], e[t - 1]) @ A.T + G @ np.outer(eta, eta) @ G.T + B @ S @ B.T
        ll += stats.multivariate_normal(cov=S).logpdf(e[t])
    assert abs(bekk_loglik(e, C @ C.T, A, B, G, np.eye(n)) - ll) < 1e-9


def test_bekk_diag_kernel_matches_full_kernel(rng):
    e = rng.normal(size=(300, 4))
    C = np.tril(rng.uniform(0.05, 0.2, (4, 4)))
    a, b, g = rng.uniform(0.1, 0.3, 4), rng.uniform(0.85, 0.93, 4), rng.uniform(0, 0.2, 4)
    full = kern.bekk_loglik(e, C @ C.T, np.diag(a), np.diag(b), np.diag(g), np.eye(4), True)
    diag = kern.bekk_diag_loglik(e, C @ C.T, a, b, g, np.eye(4), True)
    assert abs(full - diag) < 1e-9


def test_bekk_forecast_examples():
    C = np.array([[0.5, 0.0], [0.2, 0.4]])
    p = BekkDiagParams(C, np.zeros(2), np.zeros(2))
    np.testing.assert_allclose(bekk_forecast_var(p, np.eye(2) * 7, np.array([3.0, -1.0])), np.diag(C @ C.T))
    pa = BekkDiagParams(C, np.array([0.3, 0.2]), np.array([0.9, 0.9]), np.array([0.5, 0.5]))
    ps = BekkDiagParams(C, np.array([0.3, 0.2]), np.array([0.9, 0.9]))
    pos = np.array([0.4, 1.2])
    np.testing.assert_array_equal(bekk_forecast_var(pa, np.eye(2), pos), bekk_forecast_var(ps, np.eye(2), pos))
    assert np.all(bekk_forecast_var(pa, np.eye(2), -pos) > bekk_forecast_var(ps, np.eye(2), -pos))


def test_bekk_constant_covariance_qmle():
    # with A = B = 0 the QMLE of C C' is the sample covariance of the rows entering the likelihood
    rng = np.random.default_rng(9)
    Sigma = np.array([[1.0, 0.3, 0.1], [0.3, 2.0, -0.4], [0.1, -0.4, 1.5]])
    e = rng.multivariate_normal(np.zeros(3), Sigma, size=20000)
    tril = np.tril_indices(3)
    zero = np.zeros((3, 3))

    def nll(theta):
        C = np.zeros((3, 3))
        C[tril] = theta
        return -bekk_loglik(e, C @ C.T, zero, zero, None, np.eye(3)) / 20000

    start = np.eye(3)[tril]
    r = minimize(OptProblem(nll, np.where(tril[0] == tril[1], 1e-6, -10), 10, start), tol=1e-12)
    C = np.zeros((3, 3))
    C[tril] = r.argmin
    target = np.linalg.cholesky(e[1:].T @ e[1:] / 19999)
    assert np.max(np.abs(C - target) / np.abs(target).max()) < 0.02


def test_bekk_fit_small(dcc_data):
    fit = bekk_fit(dcc_data, n_starts=1)
    p = fit.params
    assert fit.k == 12 and np.all(p.a_diag**2 + p.b_diag**2 < 1)
    assert abs(fit.loglik - bekk_loglik(dcc_data, *p.matrices()[:3], None, fit.sigma0)) < 1e-6 * abs(fit.loglik)
    S = fit.covariance_path(dcc_data)
    assert S.shape == (3001, 3, 3)
    np.testing.assert_allclose(fit.forecast_path(dcc_data)[-1], bekk_forecast_var(p, S[-2], dcc_data[-1]), rtol=1e-12)


def test_bekk_params_validation():
    with pytest.raises(DomainError):
        BekkDiagParams(np.array([[1.0, 0.1], [0.0, 1.0]]), np.zeros(2), np.zeros(2))
    with pytest.raises(DomainError):
        BekkDiagParams(np.array([[0.0, 0.0], [0.1, 1.0]]), np.zeros(2), np.zeros(2))


def test_proxbekk_reductions(rng):
    W = sim.complete_weights(3)
    p = ProxBekkParams(0.0, 0.2, 0.3, 0.1, 0.9, 0.02, w=W)
    Cint, A, B = p.matrices()
    np.testing.assert_array_equal(Cint, 0.2 * np.eye(3))
    # with s1 = 0 and no W terms the model is a diagonal BEKK with C = diag(sqrt(v))
    e = rng.normal(size=(400, 3))
    q = ProxBekkParams(0.0, 0.2, 0.3, 0.0, 0.9, 0.0, w=W)
    b = BekkDiagParams(np.sqrt(0.2) * np.eye(3), np.full(3, 0.3), np.full(3, 0.9))
    sigma0 = np.cov(e, rowvar=False)
    assert abs(proxbekk_loglik(e, q, sigma0) - bekk_loglik(e, *b.matrices()[:3], None, sigma0)) < 1e-6
    # heterogeneous with equal entries equals homogeneous
    h = ProxBekkParams(np.full(3, 0.2), np.full(3, 0.2), np.full(3, 0.3), np.full(3, 0.1), np.full(3, 0.9), np.full(3, 0.02), w=W)
    g = ProxBekkParams(0.2, 0.2, 0.3, 0.1, 0.9, 0.02, w=W)
    for x, y in zip(h.matrices(), g.matrices()):
        np.testing.assert_allclose(x, y, atol=1e-15)


def test_proxbekk_fit_small():
    W = sim.complete_weights(3)
    Cint, A, B = ProxBekkParams(0.3, 0.05, 0.25, 0.05, 0.9, 0.03, w=W).matrices()
    x = sim.bekk_panel(Cint, A, B, 3000, 1)
    fit = proxbekk_fit(x, W, n_starts=1)
    assert fit.k == 6 and fit.model == "stbekk"
    assert abs(fit.loglik - proxbekk_loglik(x, fit.params, fit.sigma0)) < 1e-6 * abs(fit.loglik)
    with pytest.raises(DomainError):
        proxbekk_fit(x, sim.complete_weights(4))
