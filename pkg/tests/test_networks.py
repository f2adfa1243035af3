import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from spatiovol.errors import DomainError, ZeroDistanceError, ZeroRowWarning
from spatiovol.networks import (
    DistanceMatrix,
    GrangerFilter,
    WeightMatrix,
    apply_granger,
    distance_correlation,
    distance_euclidean,
    distance_piccolo,
    granger_filter,
    inverse_distance_weights,
    knn_weights,
    piccolo_from_coefs,
    read_weights,
    spillover_matrix,
    spillover_weights,
    write_weights,
)


def _dm(d):
    return DistanceMatrix(np.asarray(d, float), "euclidean")


def test_euclidean_basic():
    x = np.array([[0.0, 3.0, 0.0], [0.0, 4.0, 0.0]])
    d = distance_euclidean(x).d
    assert d[0, 1] == 5.0 and d[0, 2] == 0.0


def test_euclidean_matches_double_loop(rng):
    x = rng.normal(size=(10, 4))
    d = distance_euclidean(x).d
    for i in range(4):
        for j in range(4):
            assert abs(d[i, j] - np.sqrt(sum((x[t, i] - x[t, j]) ** 2 for t in range(10)))) < 1e-12


def test_correlation_distance_extremes(rng):
    a = rng.normal(size=2000)
    b = rng.normal(size=2000)
    d = distance_correlation(np.column_stack([a, 2 * a + 1, -a])).d
    assert abs(d[0, 1]) < 1e-7 and abs(d[0, 2] - 2.0) < 1e-12
    x = np.column_stack([a - a.mean(), b - b.mean()])
    x[:, 1] -= x[:, 0] * (x[:, 0] @ x[:, 1]) / (x[:, 0] @ x[:, 0])
    assert abs(distance_correlation(x).d[0, 1] - np.sqrt(2)) < 1e-12


def test_piccolo_identical_and_padding():
    x = np.random.default_rng(5).standard_normal((500, 1))
    assert distance_piccolo(np.column_stack([x, x])).d[0, 1] == 0.0
    d = piccolo_from_coefs([np.array([0.4]), np.array([0.1, -0.2])])
    assert abs(d[0, 1] - np.sqrt(0.3**2 + 0.2**2)) < 1e-15


def test_piccolo_recovers_ar_gap():
    rng = np.random.default_rng(6)
    T = 20000
    cols = []
    for phi in (0.5, 0.2):
        s = np.zeros(T)
        u = rng.standard_normal(T)
        for t in range(1, T):
            s[t] = phi * s[t - 1] + u[t]
        cols.append(np.exp(s / 2) * 1e-3)  # log of the square is an AR(1) in s
    d = distance_piccolo(np.column_stack(cols)).d[0, 1]
    assert abs(d - 0.3) < 0.05


def test_inverse_distance_small_cases():
    w = inverse_distance_weights(_dm([[0, 7.3], [7.3, 0]])).w
    np.testing.assert_array_equal(w, [[0, 1], [1, 0]])
    w = inverse_distance_weights(_dm(np.ones((3, 3)) - np.eye(3))).w
    np.testing.assert_array_equal(w, 0.5 * (np.ones((3, 3)) - np.eye(3)))


def test_inverse_distance_zero_raises():
    with pytest.raises(ZeroDistanceError) as exc:
        inverse_distance_weights(_dm([[0, 0, 1], [0, 0, 1], [1, 1, 0]]), labels=("a", "b", "c"))
    assert "a" in str(exc.value) and "b" in str(exc.value)


@settings(max_examples=60, deadline=None)
@given(arrays(np.float64, (6, 6), elements=st.floats(0.01, 100)))
def test_inverse_distance_invariants(a):
    d = a + a.T
    np.fill_diagonal(d, 0)
    w = inverse_distance_weights(_dm(d)).w
    assert np.all(np.abs(w.sum(axis=1) - 1) <= 1e-12)
    assert np.all(np.diag(w) == 0) and np.all(w >= 0)


def test_weight_matrix_validation():
    with pytest.raises(DomainError):
        WeightMatrix(np.eye(2), "x", False, True)
    with pytest.raises(DomainError):
        WeightMatrix(np.array([[0, 0.5], [1, 0]]), "x", False, True)
    WeightMatrix(np.array([[0, 0.0], [1, 0]]), "x", True, True)


def _gf(g):
    g = np.asarray(g)
    return GrangerFilter(g, np.where(g == 1, 0.01, 0.5), np.ones_like(g))


def test_apply_granger_identity_and_zero_row():
    w = inverse_distance_weights(_dm([[0, 1, 2], [1, 0, 3], [2, 3, 0]]))
    out = apply_granger(w, _gf(np.ones((3, 3)) - np.eye(3)))
    np.testing.assert_array_equal(out.w, w.w)
    assert out.directed
    with pytest.warns(ZeroRowWarning):
        out = apply_granger(w, _gf([[0, 0, 0], [1, 0, 1], [1, 1, 0]]))
    assert out.zero_rows == (0,) and np.all(out.w[0] == 0)


def test_apply_granger_matches_hand_mask(rng):
    d = rng.uniform(0.5, 3, (4, 4))
    d = d + d.T
    np.fill_diagonal(d, 0)
    w = inverse_distance_weights(_dm(d))
    g = (rng.uniform(size=(4, 4)) < 0.6).astype(int)
    np.fill_diagonal(g, 0)
    g[:, 0] = 1
    g[0, 0] = 0
    g[0, 1] = 1
    out = apply_granger(w, _gf(g)).w
    for i in range(4):
        row = [w.w[i, j] * g[i, j] for j in range(4)]
        s = sum(row)
        for j in range(4):
            assert abs(out[i, j] - row[j] / s) < 1e-12


def test_granger_direction():
    hits = 0
    for seed in range(20):
        rng = np.random.default_rng(100 + seed)
        x = rng.standard_normal(5000)
        y = np.empty(5000)
        y[0] = 0
        y[1:] = 0.8 * x[:-1] + rng.standard_normal(4999)
        g = granger_filter(np.column_stack([x, y])).g
        hits += g[1, 0] == 1 and g[0, 1] == 0
    assert hits >= 19


def test_knn_rules():
    d = _dm([[0, 1, 2], [1, 0, 3], [2, 3, 0]])
    w = knn_weights(d, 1).w
    np.testing.assert_array_equal(w, [[0, 1, 0], [1, 0, 0], [1, 0, 0]])
    full = knn_weights(_dm(1 - np.eye(6)), 5).w
    np.testing.assert_allclose(full, 0.2 * (1 - np.eye(6)), atol=1e-15)
    # tie at the k-th slot: distance 1 to both 1 and 2, lower index wins
    tie = knn_weights(_dm([[0, 1, 1, 3], [1, 0, 2, 2], [1, 2, 0, 2], [3, 2, 2, 0]]), 1).w
    assert tie[0, 1] == 1 and tie[0, 2] == 0
    with pytest.raises(DomainError):
        knn_weights(d, 3)


def test_spillover_weights_single_entry_row():
    p = np.array([[1, 0.04, 0.5], [0.5, 1, 0.5], [0.01, 0.02, 1]])
    with pytest.warns(ZeroRowWarning):
        w = spillover_weights(p)
    assert w.w[0, 1] == 1.0 and w.zero_rows == (1,)
    np.testing.assert_allclose(w.w[2], [0.99 / 1.97, 0.98 / 1.97, 0], atol=1e-15)


def test_spillover_matrix_direction():
    # coupled EGARCH paths: asset 0's shocks enter asset 1's log-variance; the
    # reverse link is a false positive in roughly 6-9% of seeds
    c = np.sqrt(2 / np.pi)
    hits = 0
    for seed in range(100):
        rng = np.random.default_rng(200 + seed)
        T = 3000
        z = rng.standard_normal((T, 2))
        lh = np.zeros((T, 2))
        for t in range(1, T):
            g0 = abs(z[t - 1, 0]) - c
            lh[t, 0] = -0.01 + 0.95 * lh[t - 1, 0] + 0.2 * g0
            lh[t, 1] = -0.01 + 0.90 * lh[t - 1, 1] + 0.1 * (abs(z[t - 1, 1]) - c) + 0.3 * g0
        x = np.exp(lh / 2) * z
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            w = spillover_matrix(x)
        hits += w.w[1, 0] > 0 and w.w[0, 1] == 0
        assert np.all((np.abs(w.w.sum(axis=1) - 1) <= 1e-12) | (w.w.sum(axis=1) == 0))
    assert hits / 100 > 0.9, hits


def test_weights_roundtrip(tmp_path):
    w = knn_weights(_dm([[0, 1, 2], [1, 0, 3], [2, 3, 0]]), 1)
    write_weights(w, ("a", "b", "c"), tmp_path / "w.csv")
    back, tickers = read_weights(tmp_path / "w.csv")
    assert tickers == ("a", "b", "c")
    np.testing.assert_array_equal(back.w, w.w)
    assert back.kind == w.kind and back.directed == w.directed
