"""Experiment harnesses: edge-detection ROC/AUC, confidence-interval
coverage, power curves and normality diagnostics.

Replications draw from child seeds of one root seed (see
:func:`spartsm.simulate.spawn_seeds`), so results do not depend on the
number of worker threads.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy import stats

from .condexp import CondExpConfig
from .inference import InferenceReport, run_pipeline
from .model import FeatureMap, TimedDataset, WeightFunction
from .objective import build_objective
from .parallel import map_ordered
from .simulate import (
    deterministic_inference_path,
    linear_ggm_path,
    random_inference_path,
    sample_ggm_path,
    sample_truncated_ggm,
    sine_ggm_path,
    spawn_seeds,
)
from .solver import LassoConfig, lambda_max, lasso_path

KS_CRIT_1PCT = 1.628


# ----------------------------------------------------------------------------
# ROC
# ----------------------------------------------------------------------------


@dataclass
class RocCurve:
    thresholds: np.ndarray
    fpr: np.ndarray
    tpr: np.ndarray
    auc: float

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            wr = csv.writer(fh)
            wr.writerow(["threshold", "fpr", "tpr"])
            for row in zip(self.thresholds, self.fpr, self.tpr):
                wr.writerow([f"{v:.10g}" for v in row])


def roc_from_scores(scores, labels) -> RocCurve:
    """Threshold sweep from the highest score down; equal scores enter
    together, so ties contribute a diagonal segment."""
    scores = np.asarray(scores, dtype=float)
    labels = np.asarray(labels, dtype=bool)
    if scores.shape != labels.shape or scores.ndim != 1:
        raise ValueError("scores and labels must be 1-D of equal length")
    n_pos = int(labels.sum())
    n_neg = len(labels) - n_pos
    if n_pos == 0 or n_neg == 0:
        raise ValueError("labels need at least one positive and one negative")
    order = np.argsort(-scores, kind="stable")
    s, y = scores[order], labels[order]
    last_of_group = np.r_[np.flatnonzero(np.diff(s) != 0), len(s) - 1]
    tp = np.cumsum(y)[last_of_group]
    fp = np.cumsum(~y)[last_of_group]
    tpr = np.r_[0.0, tp / n_pos]
    fpr = np.r_[0.0, fp / n_neg]
    thresholds = np.r_[np.inf, s[last_of_group]]
    auc = float(np.sum(np.diff(fpr) * (tpr[1:] + tpr[:-1]) / 2.0))
    return RocCurve(thresholds, fpr, tpr, auc)


def entry_time_scores(obj, n_lambdas: int = 30, min_ratio: float = 1e-3,
                      cfg: LassoConfig = LassoConfig()) -> tuple[np.ndarray, np.ndarray]:
    """Score each coordinate by the largest penalty on a log grid at which
    it is nonzero (0 if it never enters)."""
    top = lambda_max(obj)
    if top == 0.0:
        return np.zeros(n_lambdas), np.zeros(obj.dim)
    lams = top * np.logspace(0.0, math.log10(min_ratio), n_lambdas)
    scores = np.zeros(obj.dim)
    for lam, sol in zip(lams, lasso_path(obj, lams, cfg)):
        fresh = (sol.alpha_hat != 0) & (scores == 0)
        scores[fresh] = lam
    return lams, scores


def off_diagonal(fmap: FeatureMap) -> np.ndarray:
    pairs = fmap.pairs
    return np.flatnonzero(pairs[:, 0] != pairs[:, 1])


@dataclass
class AucRun:
    seed: int
    auc: float
    roc: RocCurve
    n_changes: int
    truth: dict


def edge_detection_run(model: str, d: int, n: int, seed, n_lambdas: int = 30,
                       condexp: Optional[CondExpConfig] = None, **path_kw) -> AucRun:
    """One ROC replication on a simulated GGM.

    ``model`` is ``"ggm-linear"``, ``"ggm-sine"`` or ``"ggm-truncated"``
    (linear ramp restricted to the positive orthant).  Only off-diagonal
    pairs are scored.
    """
    rng = np.random.default_rng(seed)
    if model == "ggm-linear":
        path = linear_ggm_path(d, seed=rng, **path_kw)
        ds = sample_ggm_path(path, n, rng)
    elif model == "ggm-sine":
        path = sine_ggm_path(d, seed=rng, **path_kw)
        ds = sample_ggm_path(path, n, rng)
    elif model == "ggm-truncated":
        kw = {"p": 0.1, "diag": 2.0, **path_kw}
        for _ in range(20):
            path = linear_ggm_path(d, seed=rng, **kw)
            try:
                ds = sample_truncated_ggm(path, n, rng)
                break
            except RuntimeError:
                continue  # acceptance guard tripped: draw another path
        else:
            raise RuntimeError("no truncated path passed the acceptance guard")
    else:
        raise ValueError(f"unknown model {model!r}")
    fmap = FeatureMap.gaussian_pairwise(d)
    obj = build_objective(ds, fmap, WeightFunction(), condexp)
    _, scores = entry_time_scores(obj, n_lambdas)
    idx = off_diagonal(fmap)
    labels = path.change_labels(fmap)[idx]
    roc = roc_from_scores(scores[idx], labels)
    seed_id = seed.entropy if isinstance(seed, np.random.SeedSequence) else seed
    return AucRun(int(np.asarray(seed_id).ravel()[0]) if seed_id is not None else -1, roc.auc, roc,
                  int(labels.sum()), path.truth_record())


def auc_experiment(model: str, d: int, n: int, reps: int, root_seed: int, threads: int = 1,
                   **kw) -> list[AucRun]:
    seeds = spawn_seeds(root_seed, reps)
    return map_ordered(lambda ss: edge_detection_run(model, d, n, ss, **kw), seeds, threads)


# ----------------------------------------------------------------------------
# Coverage and power
# ----------------------------------------------------------------------------


def inference_setting(name: str, d: int = 20, n: int = 400, target_slope: Optional[float] = None):
    """Data generator and target for the inference experiments.

    Returns ``(generator, fmap, target_index, truth)`` where ``generator``
    maps a numpy Generator to a fresh dataset and ``truth`` is the
    feature-space coefficient of the target pair ``(0, 1)``.
    """
    fmap = FeatureMap.gaussian_pairwise(d)
    j = fmap.index_of(0, 1)
    if name == "deterministic":
        slope = 1.0 if target_slope is None else target_slope
        make = lambda rng: deterministic_inference_path(d, seed=rng, target_slope=slope)
    elif name == "random":
        slope = 0.0 if target_slope is None else target_slope
        make = lambda rng: random_inference_path(d, seed=rng, target_slope=slope)
    else:
        raise ValueError(f"unknown inference setting {name!r}")

    def generator(rng):
        return sample_ggm_path(make(rng), n, rng)

    # Off-diagonal Gaussian feature: natural parameter is -Theta_ij.
    return generator, fmap, j, -slope


@dataclass
class CoverageResult:
    miss_rate: float
    misses: int
    reps: int
    level: float
    truth: float
    alpha_tilde: np.ndarray
    sigma_hat: np.ndarray
    residuals: np.ndarray
    n: int

    def summary(self) -> dict:
        return {"miss_rate": self.miss_rate, "misses": self.misses, "reps": self.reps,
                "level": self.level, "truth": self.truth, "n": self.n}


def coverage_experiment(
    generator: Callable[[np.random.Generator], TimedDataset],
    truth: float,
    R: int,
    level: float,
    target: int,
    seed: int,
    fmap: FeatureMap,
    lambdas=None,
    condexp: Optional[CondExpConfig] = None,
    threads: int = 1,
) -> CoverageResult:
    """Fraction of level-``level`` intervals for coordinate ``target`` that
    miss ``truth`` over ``R`` fresh datasets."""
    if R < 1:
        raise ValueError("R must be >= 1")
    delta = 1.0 - level

    def one(ss):
        ds = generator(np.random.default_rng(ss))
        rep = run_pipeline(ds, fmap, condexp_cfg=condexp, lambdas=lambdas, targets=[target], delta=delta)
        return rep

    reports: list[InferenceReport] = map_ordered(one, spawn_seeds(seed, R), threads)
    res = [r.by_index(target) for r in reports]
    at = np.array([r.alpha_tilde for r in res])
    sh = np.array([r.sigma_hat for r in res])
    lo = np.array([r.ci[0] for r in res])
    hi = np.array([r.ci[1] for r in res])
    miss = int(np.sum((truth < lo) | (truth > hi)))
    n = reports[0].n
    resid = math.sqrt(n) * (at - truth) / sh
    return CoverageResult(miss / R, miss, R, level, float(truth), at, sh, resid, n)


@dataclass
class PowerCurve:
    effects: np.ndarray
    rejection: np.ndarray
    reps: int
    level: float

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            wr = csv.writer(fh)
            wr.writerow(["effect", "rejection_rate"])
            for e, r in zip(self.effects, self.rejection):
                wr.writerow([f"{e:.10g}", f"{r:.10g}"])


def power_curve(effect_grid: Sequence[float], R: int, level: float = 0.95, seed: int = 0,
                setting: str = "deterministic", d: int = 20, n: int = 400, lambdas=None,
                threads: int = 1) -> PowerCurve:
    """Rejection rate of ``H0: d/dt Theta_01 = 0`` as the true slope of that
    pair varies over ``effect_grid``.  Every effect reuses the same child
    seeds, so the curves are paired across effects."""
    effects = np.asarray(effect_grid, dtype=float)
    if effects.size == 0:
        raise ValueError("effect grid is empty")
    rates = []
    for e in effects:
        gen, fmap, j, _ = inference_setting(setting, d, n, target_slope=float(e))

        def one(ss, gen=gen, fmap=fmap, j=j):
            ds = gen(np.random.default_rng(ss))
            return run_pipeline(ds, fmap, lambdas=lambdas, targets=[j], delta=1.0 - level).results[0].reject

        rates.append(np.mean(map_ordered(one, spawn_seeds(seed, R), threads)))
    return PowerCurve(effects, np.array(rates), R, level)


# ----------------------------------------------------------------------------
# Normality
# ----------------------------------------------------------------------------


@dataclass
class NormalityResult:
    ks_stat: float
    critical: float
    ks_pass_at_1pct: bool
    qq_points: np.ndarray = field(repr=False)  # (R, 2): theoretical, sample

    def summary(self) -> dict:
        return {"ks_stat": self.ks_stat, "critical": self.critical, "ks_pass_at_1pct": self.ks_pass_at_1pct,
                "R": int(len(self.qq_points))}

    def write_qq_csv(self, path) -> None:
        np.savetxt(path, self.qq_points, delimiter=",", header="theoretical,sample", comments="", fmt="%.10g")


def normality_check(residuals) -> NormalityResult:
    """Kolmogorov-Smirnov distance to N(0, 1) against the asymptotic 1%
    critical value ``1.628 / sqrt(R)``."""
    r = np.asarray(residuals, dtype=float)
    if r.ndim != 1 or len(r) < 50:
        raise ValueError("need at least 50 residuals")
    ks = float(stats.kstest(r, "norm").statistic)
    crit = KS_CRIT_1PCT / math.sqrt(len(r))
    R = len(r)
    theo = stats.norm.ppf((np.arange(1, R + 1) - 0.5) / R)
    qq = np.column_stack([theo, np.sort(r)])
    return NormalityResult(ks, crit, ks < crit, qq)


def write_json(path, payload: dict) -> None:
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
