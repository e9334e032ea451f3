import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from spartsm.eval import (
    auc_experiment,
    coverage_experiment,
    edge_detection_run,
    entry_time_scores,
    inference_setting,
    normality_check,
    power_curve,
    roc_from_scores,
    write_json,
)
from spartsm.model import FeatureMap, TimedDataset
from spartsm.objective import build_objective


def _mann_whitney_auc(scores, labels):
    """Independent route: P(score_pos > score_neg) + P(tie) / 2 over all pairs."""
    pos, neg = scores[labels], scores[~labels]
    diff = pos[:, None] - neg[None, :]
    return float(np.mean(diff > 0) + 0.5 * np.mean(diff == 0))


scored_labels = st.integers(4, 60).flatmap(
    lambda k: st.tuples(
        st.lists(st.integers(0, 8).map(float), min_size=k, max_size=k),
        st.lists(st.booleans(), min_size=k, max_size=k),
    )
).filter(lambda p: 0 < sum(p[1]) < len(p[1]))


# --- ROC ------------------------------------------------------------------------


@given(scored_labels)
def test_auc_matches_pairwise_count(data):
    s, y = np.array(data[0]), np.array(data[1])
    roc = roc_from_scores(s, y)
    assert roc.auc == pytest.approx(_mann_whitney_auc(s, y), abs=1e-12)
    assert np.all(np.diff(roc.fpr) >= 0) and np.all(np.diff(roc.tpr) >= 0)
    assert roc.fpr[0] == 0 and roc.tpr[-1] == 1 and roc.fpr[-1] == 1


@given(scored_labels)
def test_reversed_scores_complement(data):
    s, y = np.array(data[0]), np.array(data[1])
    assert roc_from_scores(-s, y).auc == pytest.approx(1 - roc_from_scores(s, y).auc, abs=1e-12)


@given(scored_labels)
def test_auc_invariant_under_increasing_transform(data):
    s, y = np.array(data[0]), np.array(data[1])
    assert roc_from_scores(np.exp(s) + 3 * s**3, y).auc == pytest.approx(roc_from_scores(s, y).auc, abs=1e-12)


def test_roc_examples(rng, tmp_path):
    y = np.array([True, True, False, False])
    assert roc_from_scores(np.array([4.0, 3.0, 2.0, 1.0]), y).auc == 1.0
    labels = rng.uniform(size=1000) < 0.3
    assert roc_from_scores(rng.normal(size=1000), labels).auc == pytest.approx(0.5, abs=0.05)
    with pytest.raises(ValueError):
        roc_from_scores(np.ones(3), np.ones(3, dtype=bool))
    roc = roc_from_scores(np.array([1.0, 2.0, 3.0]), np.array([False, True, True]))
    roc.write_csv(tmp_path / "roc.csv")
    assert (tmp_path / "roc.csv").read_text().startswith("threshold,fpr,tpr")


def test_entry_time_scores(rng):
    ds = TimedDataset.paired(rng.uniform(0, 1, 200), rng.normal(size=(200, 3)))
    obj = build_objective(ds, FeatureMap.gaussian_pairwise(3))
    lams, scores = entry_time_scores(obj, n_lambdas=10)
    assert lams[0] == pytest.approx(np.abs(2 * obj.c).max())
    assert np.all(np.diff(lams) < 0)
    assert set(np.unique(scores)) <= set(lams) | {0.0}


def test_edge_detection_run_reproducible():
    a = edge_detection_run("ggm-linear", 8, 800, 3, p=0.2)
    b = edge_detection_run("ggm-linear", 8, 800, 3, p=0.2)
    assert a.auc == b.auc and a.truth == b.truth
    assert a.auc > 0.6
    with pytest.raises(ValueError):
        edge_detection_run("bogus", 8, 100, 0)


def test_auc_experiment_thread_invariant():
    one = [r.auc for r in auc_experiment("ggm-sine", 6, 300, 3, 1, threads=1, p=0.3)]
    two = [r.auc for r in auc_experiment("ggm-sine", 6, 300, 3, 1, threads=2, p=0.3)]
    assert one == two


# --- coverage -----------------------------------------------------------------


def test_coverage_degenerate_generator():
    gen, fm, j, truth = inference_setting("random", d=5, n=300)
    fixed = gen(np.random.default_rng(0))
    res = coverage_experiment(lambda rng: fixed, truth, 5, 0.95, j, 1, fm)
    assert res.miss_rate in (0.0, 1.0)
    assert np.all(res.alpha_tilde == res.alpha_tilde[0])


def test_coverage_reproducible_across_threads():
    gen, fm, j, truth = inference_setting("deterministic", d=6, n=300)
    a = coverage_experiment(gen, truth, 12, 0.95, j, 4, fm, threads=1)
    b = coverage_experiment(gen, truth, 12, 0.95, j, 4, fm, threads=3)
    np.testing.assert_array_equal(a.alpha_tilde, b.alpha_tilde)
    np.testing.assert_array_equal(a.sigma_hat, b.sigma_hat)
    assert a.summary() == b.summary()
    with pytest.raises(ValueError):
        coverage_experiment(gen, truth, 0, 0.95, j, 4, fm)


def test_inference_setting_truth():
    _, fm, j, truth = inference_setting("deterministic", d=5)
    assert fm.edge_of(j) == (0, 1) and truth == -1.0
    assert inference_setting("random", d=5)[3] == 0.0
    with pytest.raises(ValueError):
        inference_setting("other")


# --- power ----------------------------------------------------------------------


def test_power_curve_size_monotone_and_top():
    pc = power_curve([0.0, 2.0, 5.0, 10.0], R=300, seed=3)
    assert pc.rejection[0] == pytest.approx(0.05, abs=0.03)
    assert np.all(np.diff(pc.rejection) >= -0.03)
    assert pc.rejection[-1] >= 0.9
    again = power_curve([0.0], R=20, seed=3)
    assert again.rejection[0] == power_curve([0.0], R=20, seed=3).rejection[0]
    with pytest.raises(ValueError):
        power_curve([], R=5)


# --- normality --------------------------------------------------------------------


def test_normality_examples(rng, tmp_path):
    good = normality_check(rng.standard_normal(1000))
    assert good.ks_pass_at_1pct
    assert good.critical == pytest.approx(1.628 / np.sqrt(1000))
    zeros = normality_check(np.zeros(1000))
    assert zeros.ks_stat == pytest.approx(0.5) and not zeros.ks_pass_at_1pct
    assert not normality_check(rng.uniform(-2, 2, 1000)).ks_pass_at_1pct
    with pytest.raises(ValueError):
        normality_check(np.zeros(10))
    good.write_qq_csv(tmp_path / "qq.csv")
    qq = np.loadtxt(tmp_path / "qq.csv", delimiter=",", skiprows=1)
    assert qq.shape == (1000, 2) and np.all(np.diff(qq[:, 1]) >= 0)
    write_json(tmp_path / "s.json", good.summary())
    assert json.loads((tmp_path / "s.json").read_text())["R"] == 1000


def test_normal_residuals_pass_rate():
    passes = [normality_check(np.random.default_rng(s).standard_normal(1000)).ks_pass_at_1pct
              for s in np.random.SeedSequence(0).spawn(300)]
    assert np.mean(passes) >= 0.97
