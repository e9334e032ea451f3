"""Change detection from the fitted differential parameter.

Under the null ``d/dt theta* = 0`` the per-sample gradient of the objective
does not depend on the unknown parameter, so the sampling covariance of the
fitted coefficients can be estimated from within-block moments alone.  A
coordinate is flagged at time ``t`` when its standardized derivative
``|d/dt theta_hat_j(t)| / se_j(t)`` exceeds the two-sided normal quantile.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
import scipy.linalg
from scipy import stats

from .condexp import CondExpConfig, bin_paired, group_means, nw_predict, silverman_bandwidth
from .model import FeatureMap, TimeBasis, TimedDataset, WeightFunction
from .objective import build_objective_general
from .solver import DiffParamFit, LassoConfig, fit_diff_param

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class NullCovariance:
    """Plug-in null covariance of the flattened coefficients.

    ``Sigma_A`` sums the expected Hessians and ``Sigma_B`` the gradient
    variances over time blocks; ``alpha_cov`` is the sandwich
    ``Sigma_A^-1 (sum_j Var_j / n_j) Sigma_A^-1``, which reduces to
    ``Sigma_A^-1 Sigma_B Sigma_A^-1 / n`` for equal block sizes ``n``.
    """

    Sigma_A: np.ndarray
    Sigma_B: np.ndarray
    alpha_cov: np.ndarray
    basis: TimeBasis
    k: int
    ridge: float = 0.0

    @property
    def b(self) -> int:
        return self.basis.b

    def projector(self, t) -> np.ndarray:
        """Block-diagonal ``(len(t), b k, k)`` map from coefficients to
        ``d/dt theta(t)``."""
        dphi = np.atleast_2d(self.basis.dphi(np.atleast_1d(t)))
        G = len(dphi)
        P = np.zeros((G, self.k * self.b, self.k))
        for j in range(self.k):
            P[:, j * self.b:(j + 1) * self.b, j] = dphi
        return P

    def dtheta_cov(self, t) -> np.ndarray:
        """``(len(t), k, k)`` covariance of ``d/dt theta_hat(t)``."""
        P = self.projector(t)
        return np.einsum("gpk,pq,gql->gkl", P, self.alpha_cov, P)

    def dtheta_se(self, t) -> np.ndarray:
        """``(len(t), k)`` standard errors (diagonal of :meth:`dtheta_cov`)."""
        dphi = np.atleast_2d(self.basis.dphi(np.atleast_1d(t)))
        b = self.b
        var = np.empty((len(dphi), self.k))
        for j in range(self.k):
            block = self.alpha_cov[j * b:(j + 1) * b, j * b:(j + 1) * b]
            var[:, j] = np.einsum("gp,pq,gq->g", dphi, block, dphi)
        return np.sqrt(np.maximum(var, 0.0))


def _as_blocks(dataset: TimedDataset, n_bins: int) -> TimedDataset:
    if dataset.is_grouped:
        return dataset
    return bin_paired(dataset, n_bins)


def null_covariance(
    dataset: TimedDataset,
    fmap: FeatureMap,
    basis: TimeBasis,
    w: WeightFunction = WeightFunction(),
    n_bins: int = 20,
) -> NullCovariance:
    """Within-block plug-in estimate of the null coefficient covariance.

    Paired data is binned first.  Every block needs at least two samples;
    gradient variances use the unbiased ``1/(n_j - 1)`` normalisation.
    """
    ds = _as_blocks(dataset, n_bins)
    sizes = ds.block_sizes
    if sizes.min() < 2:
        raise ValueError("every time block needs at least two samples")
    F = fmap.transform(ds.obs)
    t = ds.times
    g, dg = w.g(t), w.dg(t)
    dphi, d2phi = basis.dphi(t), basis.d2phi(t)
    n, k = F.shape
    b = basis.b
    Fc = F - group_means(F, ds.block)[ds.block]
    design = (Fc[:, :, None] * dphi[:, None, :]).reshape(n, k * b)
    grad = 2.0 * (F[:, :, None] * (dg[:, None] * dphi + g[:, None] * d2phi)[:, None, :]).reshape(n, k * b)
    grad_c = grad - group_means(grad, ds.block)[ds.block]

    per_row = sizes[ds.block].astype(float)
    Sigma_A = (design * (2.0 * g / per_row)[:, None]).T @ design
    Sigma_B = (grad_c / (per_row - 1.0)[:, None]).T @ grad_c
    V = (grad_c / ((per_row - 1.0) * per_row)[:, None]).T @ grad_c
    Sigma_A = 0.5 * (Sigma_A + Sigma_A.T)
    Sigma_B = 0.5 * (Sigma_B + Sigma_B.T)
    V = 0.5 * (V + V.T)

    dim = k * b
    ridge = 0.0
    A = Sigma_A
    try:
        cho = scipy.linalg.cho_factor(A, lower=True)
    except np.linalg.LinAlgError:
        ridge = 1e-8 * float(np.trace(Sigma_A)) / dim
        if ridge <= 0:
            ridge = 1e-8
        logger.warning("Sigma_A is singular; adding ridge %.3g", ridge)
        A = Sigma_A + ridge * np.eye(dim)
        cho = scipy.linalg.cho_factor(A, lower=True)
    half = scipy.linalg.cho_solve(cho, V)
    alpha_cov = scipy.linalg.cho_solve(cho, half.T).T
    alpha_cov = 0.5 * (alpha_cov + alpha_cov.T)
    return NullCovariance(Sigma_A, Sigma_B, alpha_cov, basis, k, ridge)


# ----------------------------------------------------------------------------
# Intervals
# ----------------------------------------------------------------------------


def threshold_runs(grid: np.ndarray, exceed: np.ndarray) -> list[tuple[int, int]]:
    """Index pairs ``(first, last)`` of maximal runs where ``exceed`` holds."""
    e = np.asarray(exceed, dtype=bool).astype(int)
    edges = np.diff(np.r_[0, e, 0])
    starts = np.flatnonzero(edges == 1)
    ends = np.flatnonzero(edges == -1) - 1
    return list(zip(starts.tolist(), ends.tolist()))


def apply_interval_rules(intervals: Sequence[tuple[float, float]], eps_sp: float, eps_pp: float) -> list[tuple[float, float]]:
    """Drop intervals narrower than ``eps_sp``, then merge neighbours whose
    gap is below ``eps_pp``.  Overlapping or touching intervals always merge."""
    if eps_sp < 0 or eps_pp < 0:
        raise ValueError("eps_sp and eps_pp must be non-negative")
    kept = sorted((float(a), float(b)) for a, b in intervals if b - a >= eps_sp)
    merged: list[tuple[float, float]] = []
    for a, b in kept:
        if merged and (a <= merged[-1][1] or a - merged[-1][1] < eps_pp):
            merged[-1] = (merged[-1][0], max(merged[-1][1], b))
        else:
            merged.append((a, b))
    return merged


@dataclass
class ChangeInterval:
    start: float
    end: float
    coordinate: int
    sign: int
    peak_stat: float


@dataclass
class ChangeReport:
    times: np.ndarray
    stat: np.ndarray  # (G, k)
    estimate: np.ndarray  # (G, k) d/dt theta_hat on the grid
    threshold: float
    delta: float
    raw_intervals: list[tuple[float, float]]
    intervals: list[ChangeInterval]
    eps_sp: float
    eps_pp: float
    time_domain: tuple[float, float] = (0.0, 1.0)
    feature_labels: Optional[list] = field(default=None, repr=False)

    @property
    def filtered_intervals(self) -> list[tuple[float, float]]:
        return [(iv.start, iv.end) for iv in self.intervals]

    def to_raw(self, t):
        a, b = self.time_domain
        return a + np.asarray(t, dtype=float) * (b - a)

    def covers(self, t: float) -> bool:
        return any(iv.start <= t <= iv.end for iv in self.intervals)

    def to_dict(self) -> dict:
        return {
            "delta": self.delta,
            "threshold": self.threshold,
            "eps_sp": self.eps_sp,
            "eps_pp": self.eps_pp,
            "time_domain": list(self.time_domain),
            "grid_size": int(len(self.times)),
            "raw_intervals": [[a, b] for a, b in self.raw_intervals],
            "intervals": [
                {
                    "start": iv.start,
                    "end": iv.end,
                    "start_raw": float(self.to_raw(iv.start)),
                    "end_raw": float(self.to_raw(iv.end)),
                    "coordinate": iv.coordinate,
                    "label": None if self.feature_labels is None else self.feature_labels[iv.coordinate],
                    "sign": iv.sign,
                    "peak_stat": iv.peak_stat,
                }
                for iv in self.intervals
            ],
        }

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), **kw)

    def write_stat_csv(self, path) -> None:
        k = self.stat.shape[1]
        header = ",".join(["t"] + [f"stat_{j + 1}" for j in range(k)])
        np.savetxt(path, np.column_stack([self.to_raw(self.times), self.stat]), delimiter=",",
                   header=header, comments="", fmt="%.10g")


def default_grid(size: int = 200) -> np.ndarray:
    return np.linspace(0.0, 1.0, size)


def detect_changes(
    fit: DiffParamFit,
    nullcov: NullCovariance,
    grid: Optional[np.ndarray] = None,
    delta: float = 0.05,
    eps_sp: float = 0.01,
    eps_pp: float = 0.02,
    time_domain: tuple[float, float] = (0.0, 1.0),
    feature_labels: Optional[list] = None,
) -> ChangeReport:
    """Threshold the standardized derivative on ``grid`` and clean up the
    resulting intervals."""
    grid = default_grid() if grid is None else np.asarray(grid, dtype=float)
    if grid.ndim != 1 or len(grid) == 0:
        raise ValueError("grid must be a non-empty 1-D array")
    if np.any(np.diff(grid) < 0) or grid[0] < 0 or grid[-1] > 1:
        raise ValueError("grid must be sorted inside [0, 1]")
    if not 0 < delta < 1:
        raise ValueError("delta must lie in (0, 1)")
    est = fit.param.evaluate(grid)
    est = est.reshape(len(grid), -1)
    se = nullcov.dtheta_se(grid)
    with np.errstate(divide="ignore", invalid="ignore"):
        stat = np.where(se > 0, np.abs(est) / np.where(se > 0, se, 1.0), np.where(est == 0, 0.0, np.inf))
    z = float(stats.norm.ppf(1.0 - delta / 2.0))
    runs = threshold_runs(grid, np.any(stat > z, axis=1))
    raw = [(float(grid[a]), float(grid[b])) for a, b in runs]
    kept = apply_interval_rules(raw, eps_sp, eps_pp)
    intervals = []
    for a, b in kept:
        inside = np.flatnonzero((grid >= a) & (grid <= b))
        sub = stat[inside]
        g_idx, coord = np.unravel_index(np.argmax(sub), sub.shape)
        sign = int(np.sign(est[inside[g_idx], coord]))
        intervals.append(ChangeInterval(a, b, int(coord), sign, float(sub[g_idx, coord])))
    return ChangeReport(grid, stat, est, z, delta, raw, intervals, eps_sp, eps_pp,
                        tuple(time_domain), feature_labels)


def detect_pipeline(
    dataset: TimedDataset,
    fmap: FeatureMap,
    basis: TimeBasis,
    w: WeightFunction = WeightFunction(),
    lam: float = 0.0,
    n_bins: int = 20,
    grid: Optional[np.ndarray] = None,
    delta: float = 0.05,
    eps_sp: float = 0.01,
    eps_pp: float = 0.02,
) -> tuple[DiffParamFit, NullCovariance, ChangeReport]:
    """Bin (if paired), fit with block means, estimate the null covariance
    and detect."""
    ds = _as_blocks(dataset, n_bins)
    fit = fit_diff_param(ds, fmap, basis, w, CondExpConfig(method="group"), lam)
    nullcov = null_covariance(ds, fmap, basis, w)
    labels = None
    if fmap.pairs is not None:
        labels = [list(map(int, p)) for p in fmap.pairs]
    report = detect_changes(fit, nullcov, grid, delta, eps_sp, eps_pp, dataset.time_domain, labels)
    return fit, nullcov, report


# ----------------------------------------------------------------------------
# Hyperparameter selection
# ----------------------------------------------------------------------------


@dataclass
class CVResult:
    bandwidths: np.ndarray
    lambdas: np.ndarray
    scores: np.ndarray  # (len(bandwidths), len(lambdas)) mean validation loss
    best_bandwidth: float
    best_lambda: float


def _subset(ds: TimedDataset, rows: np.ndarray) -> TimedDataset:
    if not ds.is_grouped:
        return TimedDataset(ds.times[rows], ds.obs[rows], None, ds.time_domain)
    _, block = np.unique(ds.block[rows], return_inverse=True)
    return TimedDataset(ds.times[rows], ds.obs[rows], block, ds.time_domain)


def grid_search_cv(
    dataset: TimedDataset,
    fmap: FeatureMap,
    basis: TimeBasis,
    bandwidths: Optional[Sequence[float]] = None,
    lambdas: Sequence[float] = (0.0,),
    n_folds: int = 5,
    seed=0,
    w: WeightFunction = WeightFunction(),
    cfg: LassoConfig = LassoConfig(),
) -> CVResult:
    """K-fold search over ``(bandwidth, lambda)``.

    Each candidate is fitted on the training folds and scored by the
    unpenalized objective on the held-out fold.  Paired data is split by
    row and held-out conditional means come from a Nadaraya-Watson fit to
    the training rows; grouped data is split by block and uses the
    held-out block means (the bandwidth then plays no role).
    """
    if n_folds < 2:
        raise ValueError("need at least two folds")
    rng = np.random.default_rng(seed)
    if bandwidths is None:
        h0 = silverman_bandwidth(dataset.times)
        bandwidths = h0 * np.array([0.5, 1.0, 2.0])
    bandwidths = np.asarray(bandwidths, dtype=float)
    lambdas = np.asarray(lambdas, dtype=float)
    units = dataset.n_blocks if dataset.is_grouped else dataset.n
    if units < n_folds:
        raise ValueError("fewer samples (or blocks) than folds")
    fold_of_unit = rng.permutation(np.arange(units) % n_folds)
    fold = fold_of_unit[dataset.block] if dataset.is_grouped else fold_of_unit
    F_all = fmap.transform(dataset.obs)
    scores = np.zeros((len(bandwidths), len(lambdas)))
    for f in range(n_folds):
        tr, va = np.flatnonzero(fold != f), np.flatnonzero(fold == f)
        train, valid = _subset(dataset, tr), _subset(dataset, va)
        for a, h in enumerate(bandwidths):
            if dataset.is_grouped:
                ce_train = CondExpConfig(method="group")
                means_va = group_means(F_all[va], valid.block)[valid.block]
            else:
                ce_train = CondExpConfig(method="nw", bandwidth=float(h))
                means_va = nw_predict(F_all[tr], train.times, valid.times, float(h))
            val_obj = build_objective_general(valid, fmap, basis, w, means_va, features=F_all[va])
            for c, lam in enumerate(lambdas):
                fit = fit_diff_param(train, fmap, basis, w, ce_train, float(lam), cfg)
                scores[a, c] += val_obj.value(fit.alpha) / n_folds
    a, c = np.unravel_index(np.argmin(scores), scores.shape)
    return CVResult(bandwidths, lambdas, scores, float(bandwidths[a]), float(lambdas[c]))
