import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from spartsm.changepoint import (
    apply_interval_rules,
    default_grid,
    detect_changes,
    detect_pipeline,
    grid_search_cv,
    null_covariance,
    threshold_runs,
)
from spartsm.condexp import CondExpConfig, bin_paired
from spartsm.model import FeatureMap, TimeBasis, TimedDataset
from spartsm.simulate import mean_shift_series
from spartsm.solver import fit_diff_param

SQUARE = FeatureMap.custom(1, 1, lambda x: x**2)


def _null_blocks(rng, m=20, size=10):
    return TimedDataset.grouped(np.linspace(0, 1, m), [rng.normal(size=(size, 1)) for _ in range(m)])


interval_lists = st.lists(
    st.tuples(st.floats(0, 1), st.floats(0, 0.2)).map(lambda p: (p[0], min(1.0, p[0] + p[1]))),
    max_size=8,
)


# --- interval rules ----------------------------------------------------------


def test_interval_rule_example():
    assert apply_interval_rules([(0.40, 0.41), (0.43, 0.60)], 0.015, 0.025) == [(0.43, 0.60)]
    # without the width filter the pair would merge
    assert apply_interval_rules([(0.40, 0.41), (0.43, 0.60)], 0.0, 0.025) == [(0.40, 0.60)]
    assert apply_interval_rules([], 0.01, 0.02) == []
    with pytest.raises(ValueError):
        apply_interval_rules([], -1, 0)


@given(interval_lists, st.floats(0, 0.05), st.floats(0, 0.05))
def test_interval_rules_idempotent_sorted_disjoint(ivs, sp, pp):
    once = apply_interval_rules(ivs, sp, pp)
    assert apply_interval_rules(once, sp, pp) == once
    for (a1, b1), (a2, b2) in zip(once, once[1:]):
        assert b1 < a2
        assert a2 - b1 >= pp


@given(interval_lists, st.floats(0, 0.05), st.floats(0, 0.05))
def test_filtered_intervals_inside_raw_union(ivs, sp, pp):
    out = apply_interval_rules(ivs, sp, pp)
    for a, b in out:
        assert any(abs(a - s) < 1e-15 for s, _ in ivs)
        assert any(abs(b - e) < 1e-15 for _, e in ivs)


def test_threshold_runs():
    grid = np.linspace(0, 1, 8)
    assert threshold_runs(grid, [0, 1, 1, 0, 0, 1, 0, 1]) == [(1, 2), (5, 5), (7, 7)]
    assert threshold_runs(grid, np.zeros(8)) == []


# --- null covariance ---------------------------------------------------------


def test_null_variance_matches_monte_carlo():
    basis = TimeBasis.linear()
    est, pred = [], []
    for s in np.random.SeedSequence(3).spawn(500):
        ds = _null_blocks(np.random.default_rng(s))
        est.append(fit_diff_param(ds, SQUARE, basis, condexp=CondExpConfig(method="group")).alpha[0, 0])
        pred.append(null_covariance(ds, SQUARE, basis).alpha_cov[0, 0])
    assert np.mean(pred) == pytest.approx(np.var(est, ddof=1), rel=0.2)


def test_constant_features_give_zero_covariance(rng):
    ds = _null_blocks(rng)
    nc = null_covariance(ds, FeatureMap.custom(1, 2, lambda x: np.r_[1.0, x[0] ** 2]), TimeBasis.linear())
    # the constant feature has zero gradient variance; Sigma_A is singular there
    assert nc.ridge > 0
    np.testing.assert_allclose(nc.Sigma_B[0], 0.0, atol=1e-20)
    const = TimedDataset.grouped(np.linspace(0, 1, 5), [np.ones((3, 1))] * 5)
    nc = null_covariance(const, SQUARE, TimeBasis.linear())
    np.testing.assert_allclose(nc.Sigma_B, 0.0)
    np.testing.assert_allclose(nc.alpha_cov, 0.0)


def test_doubling_block_size_halves_variance(rng):
    base = [rng.normal(size=(10, 1)) for _ in range(20)]
    t = np.linspace(0, 1, 20)
    one = null_covariance(TimedDataset.grouped(t, base), SQUARE, TimeBasis.linear())
    two = null_covariance(TimedDataset.grouped(t, [np.vstack([b, b]) for b in base]), SQUARE, TimeBasis.linear())
    # identical moments, twice the samples: the variance halves up to the ddof correction
    assert two.alpha_cov[0, 0] / one.alpha_cov[0, 0] == pytest.approx(0.5 * 9 / 19 * 20 / 10, rel=1e-10)


def test_dtheta_covariance_psd_and_se(rng):
    ds = TimedDataset.grouped(np.linspace(0, 1, 15), [rng.normal(size=(8, 2)) for _ in range(15)])
    nc = null_covariance(ds, FeatureMap.gaussian_pairwise(2), TimeBasis.fourier(2))
    np.testing.assert_allclose(nc.Sigma_A, nc.Sigma_A.T)
    np.testing.assert_allclose(nc.Sigma_B, nc.Sigma_B.T)
    grid = np.linspace(0, 1, 11)
    cov = nc.dtheta_cov(grid)
    assert cov.shape == (11, 3, 3)
    assert np.linalg.eigvalsh(cov).min() >= -1e-8
    np.testing.assert_allclose(nc.dtheta_se(grid), np.sqrt(np.einsum("gkk->gk", cov)), rtol=1e-10)


def test_null_covariance_needs_two_per_block():
    ds = TimedDataset.grouped([0.0, 1.0], [np.ones((1, 1)), np.ones((3, 1))])
    with pytest.raises(ValueError):
        null_covariance(ds, SQUARE, TimeBasis.linear())


# --- detection -----------------------------------------------------------------


def _mean_shift_report(seed, after=2.0, **kw):
    ds = bin_paired(mean_shift_series(after=after, seed=seed), 1000)
    return detect_pipeline(ds, FeatureMap.univariate_moments(), TimeBasis.fourier(4), **kw)


def test_mean_shift_detected_at_change():
    for seed in range(3):
        _, _, rep = _mean_shift_report(seed)
        assert rep.covers(0.5)
        # stat shape and threshold
        assert rep.stat.shape == (200, 2)
        assert rep.threshold == pytest.approx(1.959964, abs=1e-6)


def test_no_exceedance_gives_empty_report(rng):
    ds = _null_blocks(rng)
    fit = fit_diff_param(ds, SQUARE, TimeBasis.linear(), condexp=CondExpConfig(method="group"))
    nc = null_covariance(ds, SQUARE, TimeBasis.linear())
    rep = detect_changes(fit, nc, delta=1e-12)
    assert rep.intervals == [] and rep.raw_intervals == []
    with pytest.raises(ValueError):
        detect_changes(fit, nc, grid=np.array([0.5, 0.2]))


def test_report_invariant_under_affine_time_axis():
    ds = mean_shift_series(seed=5)
    raw = 3.0 + 7.0 * ds.times
    shifted = TimedDataset.paired(raw, ds.obs, domain=(3.0, 10.0))
    fm, basis = FeatureMap.univariate_moments(), TimeBasis.fourier(4)
    _, _, a = detect_pipeline(bin_paired(ds, 1000), fm, basis)
    _, _, b = detect_pipeline(bin_paired(shifted, 1000), fm, basis)
    np.testing.assert_allclose(b.filtered_intervals, a.filtered_intervals, atol=1e-12)
    out = json.loads(b.to_json())
    assert out["time_domain"] == [3.0, 10.0]
    for iv in out["intervals"]:
        assert iv["start_raw"] == pytest.approx(3.0 + 7.0 * iv["start"])


def test_stat_csv(tmp_path):
    _, _, rep = _mean_shift_report(1)
    path = tmp_path / "stat.csv"
    rep.write_stat_csv(path)
    data = np.loadtxt(path, delimiter=",", skiprows=1)
    assert data.shape == (len(default_grid()), 3)


def test_grid_search_cv(rng):
    ds = TimedDataset.paired(rng.uniform(0, 1, 120), rng.normal(size=(120, 1)))
    res = grid_search_cv(ds, FeatureMap.univariate_moments(), TimeBasis.linear(),
                         bandwidths=[0.05, 0.2], lambdas=[0.0, 0.1], n_folds=3)
    assert res.scores.shape == (2, 2)
    assert res.best_bandwidth in (0.05, 0.2) and res.best_lambda in (0.0, 0.1)
    with pytest.raises(ValueError):
        grid_search_cv(ds, FeatureMap.univariate_moments(), TimeBasis.linear(), n_folds=1)
