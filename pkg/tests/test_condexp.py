import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from spartsm.condexp import (
    CondExpConfig,
    bin_paired,
    estimate_cond_exp,
    group_cond_exp,
    nw_cond_exp,
    nw_predict,
    nw_weights,
    silverman_bandwidth,
)
from spartsm.model import FeatureMap, TimedDataset


def _paired(seed, n=30, d=2):
    r = np.random.default_rng(seed)
    return TimedDataset.paired(r.uniform(0, 1, n), r.normal(size=(n, d)))


@given(st.integers(2, 40), st.floats(1e-4, 10.0), st.booleans(), st.integers(0, 2**31))
def test_weights_are_row_stochastic(n, h, loo, seed):
    t = np.random.default_rng(seed).uniform(0, 1, n)
    W = nw_weights(t, h, loo)
    assert np.all(np.isfinite(W)) and np.all(W >= 0)
    np.testing.assert_allclose(W.sum(axis=1), 1.0, rtol=1e-12)
    if loo:
        assert np.all(np.diag(W) == 0)


def test_huge_bandwidth_gives_global_mean(rng):
    t = rng.uniform(0, 1, 25)
    F = rng.normal(size=(25, 3))
    np.testing.assert_allclose(nw_cond_exp(F, t, 1e6), np.tile(F.mean(0), (25, 1)), atol=1e-10)


def test_tiny_bandwidth_gives_own_value(rng):
    t = np.sort(rng.uniform(0, 1, 25)) + np.arange(25) * 1e-3  # distinct
    F = rng.normal(size=(25, 3))
    np.testing.assert_allclose(nw_cond_exp(F, t, 1e-6), F, atol=1e-12)


@given(st.floats(-5, 5), st.integers(0, 2**31))
def test_constant_features_reproduced(cval, seed):
    t = np.random.default_rng(seed).uniform(0, 1, 15)
    F = np.full((15, 2), cval)
    np.testing.assert_allclose(nw_cond_exp(F, t, 0.1), F, atol=1e-12)


def test_nw_matches_naive_loop(rng):
    t = rng.uniform(0, 1, 12)
    F = rng.normal(size=(12, 2))
    h = 0.2
    naive = np.zeros_like(F)
    for i in range(12):
        k = np.array([np.exp(-0.5 * ((t[i] - s) / h) ** 2) for s in t])
        naive[i] = k @ F / k.sum()
    np.testing.assert_allclose(nw_cond_exp(F, t, h), naive, rtol=1e-12)
    np.testing.assert_allclose(nw_predict(F, t, t, h), naive, rtol=1e-12)


def test_bandwidth_validation(rng):
    with pytest.raises(ValueError):
        nw_weights(np.zeros(3), 0.0)
    with pytest.raises(ValueError):
        nw_cond_exp(np.ones((3, 1)), np.zeros(2), 0.1)


def test_silverman_rule():
    t = np.linspace(0, 1, 100)
    assert silverman_bandwidth(t) == pytest.approx(1.06 * np.std(t) * 100 ** (-0.2))
    assert silverman_bandwidth(np.zeros(5)) == 1.0


def test_group_means_exact():
    ds = TimedDataset.grouped([0.0, 1.0], [np.array([[1.0], [3.0]]), np.array([[2.0], [4.0], [9.0]])])
    fm = FeatureMap.gaussian_pairwise(1)
    np.testing.assert_allclose(group_cond_exp(ds, fm), [[5.0], [(4 + 16 + 81) / 3]])
    est = estimate_cond_exp(ds, fm.transform(ds.obs))
    assert est.method == "group"
    np.testing.assert_allclose(est.means[:2, 0], 5.0)


@given(st.integers(1, 30), st.integers(0, 2**31))
def test_bin_paired_partitions_rows(n_bins, seed):
    ds = _paired(seed, n=60)
    binned = bin_paired(ds, n_bins)
    assert binned.n == ds.n
    assert binned.n_blocks <= n_bins
    assert binned.block_sizes.sum() == ds.n
    # every row is stamped with the midpoint of its own bin
    mids = binned.block_times[binned.block]
    assert np.all(np.abs(mids - binned.times) == 0)
    np.testing.assert_allclose(np.sort(binned.obs, axis=0), np.sort(ds.obs, axis=0))


def test_bin_paired_validation():
    ds = _paired(0, n=10)
    with pytest.raises(ValueError):
        bin_paired(ds, 0)
    with pytest.raises(ValueError):
        bin_paired(ds, 11)


def test_estimate_dispatch(rng):
    ds = _paired(1)
    F = FeatureMap.gaussian_pairwise(2).transform(ds.obs)
    assert estimate_cond_exp(ds, F).method == "nw"
    est = estimate_cond_exp(ds, F, CondExpConfig(method="binned", n_bins=3))
    assert est.method == "binned" and est.means.shape == F.shape
    with pytest.raises(ValueError):
        estimate_cond_exp(ds, F, CondExpConfig(method="group"))
    with pytest.raises(ValueError):
        estimate_cond_exp(ds, F, CondExpConfig(method="bogus"))
