import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from spatiovol import simulate as sim
from spatiovol.errors import DomainError, StateError, StateWarning, ZeroVarianceError
from spatiovol.evaluate import (
    ForecastRecord,
    best_config,
    bic,
    dm_matrix,
    dm_test,
    forecast_loop,
    loss_series,
    proxy,
    rank_by_mean_loss,
    rmsfe_mafe,
)
from spatiovol.mgarch import bekk_fit
from spatiovol.spatial import StGarchFit, StGarchParams, stgarch_fit


def _records(lh, px):
    return [ForecastRecord(t, "m", None, np.atleast_1d(lh[t]), np.atleast_1d(px[t])) for t in range(len(lh))]


def test_rmsfe_mafe_examples(rng):
    x = rng.normal(size=(5, 3))
    assert rmsfe_mafe(_records(x, x)) == (0.0, 0.0)
    assert rmsfe_mafe(_records(np.array([[1.0]]), np.array([[3.0]]))) == (2.0, 2.0)
    with pytest.raises(DomainError):
        rmsfe_mafe([])


@settings(max_examples=80, deadline=None)
@given(st.integers(1, 12), st.integers(1, 5), st.integers(0, 2**31))
def test_metric_invariants(T, n, seed):
    rng = np.random.default_rng(seed)
    lh, px = rng.normal(size=(T, n)), rng.normal(scale=4, size=(T, n))
    recs = _records(lh, px)
    r, m = rmsfe_mafe(recs)
    assert m <= r + 1e-15
    assert abs(np.mean(loss_series(recs)) - r**2) < 1e-12
    assert all(abs(rec.loss - l) < 1e-15 for rec, l in zip(recs, loss_series(recs)))


def test_proxy_floor():
    np.testing.assert_array_equal(proxy(np.array([0.0, 1.0])), [math.log(1e-16), 0.0])


def test_bic_examples():
    assert bic(0.0, 0, 10) == 0.0
    assert abs(bic(0.0, 2, math.e**2) - 4.0) < 1e-15


def test_bic_on_nested_fits():
    x = sim.bekk_panel(np.eye(2) * 0.05, np.diag([0.3, 0.3]), np.diag([0.9, 0.9]), 2000, 3, G=np.diag([0.2, 0.2]))
    small = bekk_fit(x, n_starts=1)
    big = bekk_fit(x, asymmetric=True, n_starts=1)
    assert big.loglik >= small.loglik - 1e-6
    assert big.bic == pytest.approx(bic(big.loglik, big.k, big.t_eff))
    assert small.bic == pytest.approx(small.k * math.log(1999) - 2 * small.loglik)


def test_dm_examples(rng):
    a = rng.gamma(2.0, size=100)
    r = dm_test(a, a)
    assert (r.statistic, r.pvalue) == (0.0, 1.0)
    with pytest.raises(ZeroVarianceError):
        dm_test(a + 1.0, a)
    with pytest.raises(DomainError):
        dm_test(a[:20], a[:20])
    with pytest.raises(DomainError):
        dm_test(a, a[:-1])


def test_dm_statistic_oracle(rng):
    a, b = rng.gamma(2.0, size=252), rng.gamma(2.1, size=252)
    d = a - b
    stat = d.mean() / math.sqrt(d.var(ddof=1) / 252)
    r = dm_test(a, b)
    assert abs(r.statistic - stat) < 1e-12
    assert abs(r.pvalue - math.erfc(abs(stat) / math.sqrt(2))) < 1e-12
    assert abs(dm_test(b, a).statistic + r.statistic) < 1e-12 and dm_test(b, a).pvalue == r.pvalue
    h = dm_test(a, b, harvey=True)
    assert abs(h.statistic - stat * math.sqrt(251 / 252)) < 1e-12


def test_dm_size(rng):
    rej = sum(dm_test(rng.standard_normal(252), np.zeros(252)).pvalue < 0.05 for _ in range(1000))
    assert 35 <= rej <= 65


def test_ranking_fixture_and_ties():
    losses = {"DSTARCH": 6.514, "STGARCH": 7.859, "SpGARCH-X": 8.345, "DCC": 8.491,
              "ABEKK": 8.504, "BEKK": 8.591, "STEGARCH": 11.973, "STBEKK": 32.658}
    assert rank_by_mean_loss(dict(reversed(list(losses.items())))) == {m: i + 1 for i, m in enumerate(losses)}
    assert rank_by_mean_loss({"b": 1.0, "a": 1.0}) == {"b": 1, "a": 2}


def test_best_config_first_listed_wins():
    assert best_config({("m", "x"): 2.0, ("m", "y"): 1.0, ("m", "z"): 1.0, ("k", None): 3.0}) == {"m": "y", "k": None}


def test_dm_matrix(rng):
    base = rng.gamma(2.0, size=252)
    losses = {
        ("a", "w1"): base + 0.0 + 0.3 * rng.standard_normal(252),
        ("a", "w2"): base + 1.0 + 0.3 * rng.standard_normal(252),
        ("b", None): base + 0.5 + 0.3 * rng.standard_normal(252),
        ("c", "w1"): base + 2.0 + 0.3 * rng.standard_normal(252),
    }
    table = dm_matrix(losses)
    assert table.models == ("a", "b", "c") and table.matrices == ("w1", None, "w1")
    assert table.rank == (1, 2, 3)
    assert np.max(np.abs(table.statistic + table.statistic.T)) < 1e-12
    assert np.all(np.diag(table.pvalue) == 1.0)
    assert [r["model"] for r in table.ranking_rows()] == ["a", "b", "c"]
    same = dm_matrix({("x", None): base, ("y", None): base.copy()})
    assert same.pvalue[0, 1] == 1.0
    with pytest.raises(DomainError):
        dm_matrix({("x", None): base})


@pytest.fixture(scope="module")
def st_fit():
    W = np.roll(np.eye(3), 1, axis=1)
    x = sim.stgarch_panel(0.05, 0.05, 0.05, 0.7, 0.1, W, 1500, 2)
    return stgarch_fit(x[:1000], W, n_starts=1), x


def test_forecast_loop_uses_data_through_t_minus_1(st_fit):
    fit, x = st_fit
    recs = forecast_loop(fit, x, 1200)
    assert len(recs) == 300 and recs[0].date == 1200
    for t in (1200, 1350, 1499):
        manual = np.log(fit.variance_path(x[:t])[-1])
        np.testing.assert_allclose(recs[t - 1200].log_hhat, manual, rtol=1e-14)
        np.testing.assert_array_equal(recs[t - 1200].proxy, proxy(x[t]))


def test_forecast_loop_is_deterministic(st_fit):
    fit, x = st_fit
    a, b = forecast_loop(fit, x, 1300), forecast_loop(fit, x, 1300)
    assert all(np.array_equal(r.log_hhat, s.log_hhat) for r, s in zip(a, b))


def test_forecast_loop_constant_model(rng):
    W = np.roll(np.eye(2), 1, axis=1)
    fit = StGarchFit(model="const", k=1, loglik=0.0, t_eff=1, params=StGarchParams(0.3, 0, 0, 0, 0), w=W, h0=np.full(2, 0.3))
    recs = forecast_loop(fit, rng.normal(size=(100, 2)), 50)
    assert all(np.array_equal(r.log_hhat, np.full(2, math.log(0.3))) for r in recs)


class _Diverging(StGarchFit):
    def log_forecast_path(self, eps):
        out = np.zeros(eps.shape)
        out[80:] = np.inf
        return out


def test_forecast_loop_divergence():
    W = np.roll(np.eye(2), 1, axis=1)
    fit = _Diverging(model="div", k=1, loglik=0.0, t_eff=1, params=StGarchParams(0.3, 0, 0, 0, 0), w=W, h0=np.ones(2))
    x = np.ones((100, 2))
    with pytest.warns(StateWarning):
        recs = forecast_loop(fit, x, 60)
    assert len(recs) == 21
    with pytest.raises(StateError):
        forecast_loop(fit, x, 60, strict=True)
    with pytest.raises(StateError):
        forecast_loop(fit, x, 90)
    with pytest.raises(DomainError):
        forecast_loop(fit, x, 100)
