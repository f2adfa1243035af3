import math

import numpy as np
import pytest

from spatiovol import _kernels as kern
from spatiovol import simulate as sim
from spatiovol.errors import DomainError, InstrumentRankError, InvalidParamError
from spatiovol.spatial import (
    DstarchParams,
    SpGarchXParams,
    StEgarchParams,
    StGarchParams,
    dstarch_fit,
    dstarch_forecast,
    g_news,
    log_sq,
    logarch_fit,
    spgarchx_fit,
    spgarchx_forecast,
    stegarch_filter,
    stegarch_fit,
    stegarch_forecast,
    stgarch_fit,
    stgarch_forecast,
    stgarch_loglik,
)
from spatiovol.univariate import Garch11Params, garch11_forecast, garch11_loglik, garch11_qmle


def _ring(n):
    return np.roll(np.eye(n), 1, axis=1)


# ---------------------------------------------------------------- DST-ARCH


def test_dstarch_forecast_examples(rng):
    W = sim.circulant_weights(5, 2)
    p0 = DstarchParams(0.0, rng.uniform(size=5), rng.normal(size=5))
    star = rng.normal(size=5)
    np.testing.assert_array_equal(dstarch_forecast(p0, star, W), p0.gamma * star + p0.phi0)
    W2 = np.array([[0.0, 1.0], [1.0, 0.0]])
    p = DstarchParams(0.5, np.array([0.2, 0.3]), np.array([-0.4, 0.1]))
    r = p.gamma * np.array([1.5, -2.0]) + p.phi0
    hand = np.array([r[0] + 0.5 * r[1], 0.5 * r[0] + r[1]]) / 0.75
    assert np.max(np.abs(dstarch_forecast(p, np.array([1.5, -2.0]), W2) - hand)) < 1e-12
    # constant input on a row-stochastic W: 1 is an eigenvector with eigenvalue 1
    pc = DstarchParams(0.3, np.full(5, 0.4), np.full(5, -0.2))
    out = dstarch_forecast(pc, np.full(5, 2.0), W)
    np.testing.assert_allclose(out, (0.4 * 2.0 - 0.2) / 0.7, atol=1e-14)


def test_dstarch_params_validation():
    with pytest.raises(InvalidParamError):
        DstarchParams(1.0, np.zeros(2), np.zeros(2))
    with pytest.raises(InvalidParamError):
        DstarchParams(0.1, np.zeros(2), np.zeros(3))


@pytest.fixture(scope="module")
def dst_panel():
    W = sim.circulant_weights(6, 2)
    return W, sim.dstarch_panel(0.4, np.linspace(0.1, 0.3, 6), np.full(6, -0.5), W, 4000, 21)


def test_dstarch_eigen_and_direct_paths_agree(dst_panel):
    W, x = dst_panel
    a = dstarch_fit(x, W, use_eigen=True)
    b = dstarch_fit(x, W, use_eigen=False)
    assert a.notes["path"] == "eigen" and b.notes["path"] == "direct"
    assert abs(a.params.rho - b.params.rho) < 1e-12
    assert np.max(np.abs(a.params.gamma - b.params.gamma)) < 1e-12
    assert abs(a.objective - b.objective) < 1e-9


def test_dstarch_eigen_requires_symmetry():
    with pytest.raises(DomainError):
        dstarch_fit(np.random.default_rng(0).normal(size=(300, 4)), _ring(4), use_eigen=True)


def test_dstarch_forecast_path_matches_closed_form(dst_panel):
    W, x = dst_panel
    fit = dstarch_fit(x, W)
    path = fit.log_forecast_path(x)
    assert path.shape == x.shape
    np.testing.assert_allclose(path[-1], dstarch_forecast(fit.params, log_sq(x[-1]), W), atol=1e-12)
    assert fit.k == 7 and fit.bic == pytest.approx(7 * math.log(3999) - 2 * fit.loglik)


def test_dstarch_rho_zero_dgp_matches_ols():
    W = sim.circulant_weights(8, 5)
    gamma = np.linspace(0.1, 0.4, 8)
    x = sim.dstarch_panel(0.0, gamma, np.full(8, -0.5), W, 20000, 5)
    fit = dstarch_fit(x, W)
    assert abs(fit.params.rho) < 0.05
    # the GMM gamma, re-solved at rho = 0, is the per-asset OLS slope
    ols = logarch_fit(x)
    gm0 = dstarch_fit(x, W, fix_rho=0.0)
    assert np.max(np.abs(gm0.params.gamma - ols.params.gamma)) < 1e-3
    assert np.max(np.abs(fit.params.gamma - ols.params.gamma)) < 0.05
    assert ols.k == 8 and gm0.model == "logarch"


def test_dstarch_needs_links():
    x = np.random.default_rng(1).normal(size=(300, 3))
    with pytest.raises(InstrumentRankError):
        dstarch_fit(x, np.zeros((3, 3)))


def test_log_sq_floor():
    out = log_sq(np.array([0.0, 1.0, np.e]))
    np.testing.assert_allclose(out, [math.log(1e-16), 0.0, 2.0], atol=1e-15)


# ---------------------------------------------------------------- spatial GARCH-X


def test_spgarchx_forecast_examples():
    W = np.array([[0.0, 1.0], [1.0, 0.0]])
    p = SpGarchXParams(np.array([0.1, 0.2]), np.array([0.05, 0.1]), np.array([0.9, 0.8]), np.zeros(2), np.zeros(2))
    e, h = np.array([0.5, -1.5]), np.array([1.2, 0.7])
    got = spgarchx_forecast(p, e, h, W)
    for i in range(2):
        assert got[i] == garch11_forecast(e[i], h[i], Garch11Params(p.a0[i], p.a1[i], p.b1[i]))
    # n = 2 by hand: 0.1 + 0.05*0.25 + 0.9*1.2 + 0.02*2.25 + 0.03*0.7 = 1.2585
    q = SpGarchXParams(np.array([0.1, 0.2]), np.array([0.05, 0.1]), np.array([0.9, 0.8]), np.array([0.02, 0.04]), np.array([0.03, 0.01]))
    got = spgarchx_forecast(q, e, h, W)
    assert abs(got[0] - 1.2585) < 1e-14
    assert abs(got[1] - (0.2 + 0.1 * 2.25 + 0.8 * 0.7 + 0.04 * 0.25 + 0.01 * 1.2)) < 1e-14
    assert np.all(spgarchx_forecast(q, np.zeros(2), np.zeros(2), W) >= q.a0)


def test_spgarchx_params_validation():
    with pytest.raises(InvalidParamError):
        SpGarchXParams(np.zeros(2), np.zeros(2), np.zeros(2), np.zeros(2), np.zeros(2))
    with pytest.raises(InvalidParamError):
        SpGarchXParams(np.ones(2), -np.ones(2), np.zeros(2), np.zeros(2), np.zeros(2))


def test_spgarchx_decouples_without_spillovers():
    W = _ring(4)
    x = sim.spgarchx_panel(0.05, 0.08, 0.75, 0.0, 0.0, W, 20000, 3)
    fit = spgarchx_fit(x, W)
    p = fit.params
    assert np.all(p.a2 < 0.03) and np.all(p.b2 < 0.03)
    for i in range(4):
        u = garch11_qmle(x[:, i], n_starts=1).params
        assert abs(p.a0[i] - u.omega) < 0.02 and abs(p.a1[i] - u.alpha) < 0.02 and abs(p.b1[i] - u.beta) < 0.02
    h = fit.variance_path(x)
    np.testing.assert_allclose(h[-1], spgarchx_forecast(p, x[-1], h[-2], W), rtol=1e-13)
    assert fit.k == 20 and fit.notes["outer_iterations"] >= 1


def test_spgarchx_frozen_spatial_terms():
    W = _ring(3)
    x = sim.spgarchx_panel(0.05, 0.08, 0.75, 0.05, 0.1, W, 2000, 4)
    fit = spgarchx_fit(x, W, freeze_spatial=True)
    assert np.all(fit.params.a2 == 0) and np.all(fit.params.b2 == 0)


# ---------------------------------------------------------------- STGARCH


def test_stgarch_nested_univariate_likelihood(rng):
    W = sim.circulant_weights(4, 2)
    x = rng.normal(size=(500, 4))
    p = StGarchParams(0.1, 0.08, 0.0, 0.85, 0.0)
    h0 = x.var(axis=0)
    pooled = sum(garch11_loglik(x[:, i], Garch11Params(0.1, 0.08, 0.85), h0[i]) for i in range(4))
    assert abs(stgarch_loglik(x, p, W, h0) - pooled) < 1e-9


def test_stgarch_constant_and_forecasts(rng):
    W = sim.circulant_weights(4, 2)
    x = rng.normal(size=(50, 4))
    H = StGarchParams(0.3, 0.0, 0.0, 0.0, 0.0)
    path = kern.variance_filter(x, *H.system(W), np.ones(4))
    np.testing.assert_array_equal(path[1:], 0.3)
    p = StGarchParams(0.1, 0.07, 0.0, 0.9, 0.0)
    e, h = rng.normal(size=4), rng.uniform(0.5, 2, 4)
    np.testing.assert_allclose(stgarch_forecast(p, e, h, W), [garch11_forecast(e[i], h[i], Garch11Params(0.1, 0.07, 0.9)) for i in range(4)], rtol=1e-15)
    with pytest.raises(InvalidParamError):
        StGarchParams(0.1, 0.3, 0.3, 0.3, 0.2)


def test_stgarch_fit_small():
    W = _ring(4)
    x = sim.stgarch_panel(0.05, 0.05, 0.05, 0.70, 0.10, W, 3000, 8)
    fit = stgarch_fit(x, W, n_starts=1)
    assert fit.k == 5
    assert abs(fit.loglik - stgarch_loglik(x, fit.params, W, fit.h0)) < 1e-6 * abs(fit.loglik)
    h = fit.variance_path(x)
    np.testing.assert_allclose(h[-1], stgarch_forecast(fit.params, x[-1], h[-2], W), rtol=1e-13)
    with pytest.raises(DomainError):
        stgarch_fit(x[:400], W)


# ---------------------------------------------------------------- STEGARCH


STEG = StEgarchParams(-0.05, 0.2, 1.0, 0.2, 0.7, -0.1, 0.2)


def test_g_news():
    assert g_news(0.0, 0.3, 0.5) == pytest.approx(-0.5 * math.sqrt(2 / math.pi))
    assert g_news(1.0, 0.3, 0.0) == 0.3


def test_stegarch_decoupled_scalar_loop(rng):
    # rho0 = lambda0 = 0: each asset follows its own EGARCH-type recursion
    p = StEgarchParams(-0.1, 0.0, 0.5, 0.0, 0.9, -0.2, 0.3)
    W = sim.complete_weights(3)
    e = rng.normal(size=(300, 3))
    H, Z, ll = stegarch_filter(e, p, W, logh0=np.zeros(3))
    llo = 0.0
    for i in range(3):
        lh = 0.0
        for t in range(300):
            if t > 0:
                z = e[t - 1, i] / math.exp(lh / 2)
                lh = p.alpha1 + p.lambda1 * lh + p.rho1 * (p.theta * z + p.xi * (abs(z) - math.sqrt(2 / math.pi)))
            assert abs(H[t, i] - lh) < 1e-12
            if t > 0:
                llo += -0.5 * (math.log(2 * math.pi) + lh + e[t, i] ** 2 / math.exp(lh))
    assert abs(ll - llo) < 1e-8 * abs(llo)


def test_stegarch_filter_inverts_simulation():
    W = sim.complete_weights(4)
    rng = np.random.default_rng(31)
    n, T = 4, 500
    z = rng.standard_normal((T, n))
    M = np.linalg.inv(np.eye(n) - STEG.lambda0 * W)
    H = np.zeros((T, n))
    eps = np.zeros((T, n))
    H[0] = -0.3
    eps[0] = np.exp(H[0] / 2) * z[0]
    gz = lambda v: g_news(v, STEG.theta, STEG.xi)
    for t in range(1, T):
        H[t] = M @ (STEG.alpha1 + STEG.rho0 * W @ gz(z[t]) + STEG.rho1 * gz(z[t - 1]) + STEG.lambda1 * H[t - 1])
        eps[t] = np.exp(H[t] / 2) * z[t]
    Hf, Zf, _ = stegarch_filter(eps, STEG, W, logh0=H[0])
    assert np.max(np.abs(Zf[:T] - z)) < 1e-10
    assert np.max(np.abs(Hf[:T] - H)) < 1e-10
    np.testing.assert_allclose(Hf[T], stegarch_forecast(STEG, Hf[T - 1], Zf[T - 1], W), atol=1e-12)


def test_stegarch_forecast_hand_n2():
    p = StEgarchParams(0.1, 0.0, 0.8, 0.0, 0.6, 0.2, 0.3)
    W = np.array([[0.0, 1.0], [1.0, 0.0]])
    H, z = np.array([0.5, -0.2]), np.array([1.0, -2.0])
    c = math.sqrt(2 / math.pi)
    hand = [0.1 + 0.8 * (0.2 * 1.0 + 0.3 * (1.0 - c)) + 0.6 * 0.5, 0.1 + 0.8 * (-0.4 + 0.3 * (2.0 - c)) - 0.12]
    np.testing.assert_allclose(stegarch_forecast(p, H, z, W), hand, atol=1e-15)


def test_stegarch_permutation_equivariance():
    W = sim.circulant_weights(5, 2)
    x = sim.stegarch_panel(*STEG.__dict__.values(), W, W, 400, 2)
    perm = np.array([3, 0, 4, 1, 2])
    P = np.eye(5)[perm]
    H, Z, ll = stegarch_filter(x, STEG, W, logh0=np.zeros(5))
    Hp, Zp, llp = stegarch_filter(x[:, perm], STEG, P @ W @ P.T, logh0=np.zeros(5))
    assert np.max(np.abs(Hp - H[:, perm])) < 1e-11 and abs(ll - llp) < 1e-9


def test_stegarch_params_validation():
    with pytest.raises(InvalidParamError):
        StEgarchParams(0, 0, 1, 1.0, 0.5, 0, 0)
    with pytest.raises(InvalidParamError):
        StEgarchParams(0, 0, 1, 0.1, 1.0, 0, 0)


def test_stegarch_fit_small():
    W = sim.complete_weights(3)
    x = sim.stegarch_panel(*STEG.__dict__.values(), W, W, 2000, 6)
    fit = stegarch_fit(x, W, n_starts=1)
    assert fit.k == 7 and fit.params.rho1 == 1.0
    _, _, ll = stegarch_filter(x, fit.params, W, logh0=fit.logh0)
    assert abs(fit.loglik - ll) < 1e-6 * abs(ll)
    assert fit.log_forecast_path(x).shape == x.shape
