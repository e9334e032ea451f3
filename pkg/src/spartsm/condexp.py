"""Time-conditional expectations ``E_{q_t}[f(x)]`` from samples."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .model import FeatureMap, TimedDataset


@dataclass(frozen=True)
class CondExpConfig:
    """How to estimate the conditional mean of the features.

    ``method`` is ``"auto"`` (group means for grouped data, Nadaraya-Watson
    otherwise), ``"nw"``, ``"group"`` or ``"binned"``.
    """

    method: str = "auto"
    bandwidth: Optional[float] = None
    leave_one_out: bool = False
    n_bins: int = 20


@dataclass(frozen=True)
class CondExpEstimate:
    """Row-aligned estimates: ``means[i]`` estimates ``E_{q_{t_i}}[f]``."""

    method: str
    means: np.ndarray
    bandwidth: Optional[float] = None
    n_bins: Optional[int] = None


def silverman_bandwidth(times) -> float:
    """``1.06 * sd(t) * n^(-1/5)``; falls back to 1.0 for degenerate times."""
    times = np.asarray(times, dtype=float)
    sd = float(np.std(times))
    if len(times) < 2 or sd == 0.0:
        return 1.0
    return 1.06 * sd * len(times) ** (-0.2)


def nw_weights(times, bandwidth: float, leave_one_out: bool = False) -> np.ndarray:
    """Row-normalised Gaussian kernel weights ``W[i, j] ~ K(t_j, t_i)``."""
    if not bandwidth > 0:
        raise ValueError(f"bandwidth must be positive, got {bandwidth}")
    t = np.asarray(times, dtype=float)
    diff = (t[:, None] - t[None, :]) / bandwidth
    logk = -0.5 * diff**2
    if leave_one_out:
        if len(t) < 2:
            raise ValueError("leave-one-out needs at least two points")
        np.fill_diagonal(logk, -np.inf)
    # Row-wise max shift keeps tiny bandwidths from underflowing to 0/0.
    logk -= logk.max(axis=1, keepdims=True)
    K = np.exp(logk)
    return K / K.sum(axis=1, keepdims=True)


def nw_cond_exp(features, times, bandwidth: float, leave_one_out: bool = False) -> np.ndarray:
    """Nadaraya-Watson estimate of the feature mean at every sample time."""
    F = np.asarray(features, dtype=float)
    if F.ndim == 1:
        F = F[:, None]
    if F.shape[0] < 1:
        raise ValueError("need at least one sample")
    if F.shape[0] != len(times):
        raise ValueError("features and times disagree on n")
    return nw_weights(times, bandwidth, leave_one_out) @ F


def nw_predict(features, times, query_times, bandwidth: float) -> np.ndarray:
    """Nadaraya-Watson estimate at new times from ``(times, features)``."""
    if not bandwidth > 0:
        raise ValueError(f"bandwidth must be positive, got {bandwidth}")
    F = np.asarray(features, dtype=float)
    t = np.asarray(times, dtype=float)
    q = np.asarray(query_times, dtype=float)
    logk = -0.5 * ((q[:, None] - t[None, :]) / bandwidth) ** 2
    logk -= logk.max(axis=1, keepdims=True)
    K = np.exp(logk)
    return (K / K.sum(axis=1, keepdims=True)) @ F


def group_means(features, block: np.ndarray) -> np.ndarray:
    """Per-block means of feature rows, one row per block."""
    F = np.asarray(features, dtype=float)
    counts = np.bincount(block)
    sums = np.zeros((len(counts), F.shape[1]))
    np.add.at(sums, block, F)
    return sums / counts[:, None]


def group_cond_exp(dataset: TimedDataset, fmap: FeatureMap) -> np.ndarray:
    """``(m, k)`` matrix of block averages of ``f``."""
    if not dataset.is_grouped:
        raise ValueError("group_cond_exp needs a grouped dataset")
    return group_means(fmap.transform(dataset.obs), dataset.block)


def bin_paired(dataset: TimedDataset, n_bins: int) -> TimedDataset:
    """Group paired rows into equal-width time bins on ``[0, 1]``.

    Each block is stamped with its bin midpoint; empty bins are dropped.
    """
    if dataset.is_grouped:
        raise ValueError("dataset is already grouped")
    if not 1 <= n_bins <= dataset.n:
        raise ValueError(f"need 1 <= n_bins <= n, got n_bins={n_bins}, n={dataset.n}")
    idx = np.minimum((dataset.times * n_bins).astype(int), n_bins - 1)
    used = np.unique(idx)
    mids = (used + 0.5) / n_bins
    blocks = [dataset.obs[idx == b] for b in used]
    # Stay on the unit domain; the raw domain is carried along for export.
    binned = TimedDataset.grouped(mids, blocks, domain=(0.0, 1.0))
    return TimedDataset(binned.times, binned.obs, binned.block, dataset.time_domain)


def estimate_cond_exp(
    dataset: TimedDataset, features: np.ndarray, config: CondExpConfig = CondExpConfig()
) -> CondExpEstimate:
    """Row-aligned conditional means for either dataset layout."""
    method = config.method
    if method == "auto":
        method = "group" if dataset.is_grouped else "nw"
    if method == "group":
        if not dataset.is_grouped:
            raise ValueError("group means need a grouped dataset; use 'binned' or 'nw'")
        means = group_means(features, dataset.block)[dataset.block]
        return CondExpEstimate("group", means)
    if method == "binned":
        if dataset.is_grouped:
            raise ValueError("dataset is already grouped")
        n_bins = min(config.n_bins, dataset.n)
        idx = np.minimum((dataset.times * n_bins).astype(int), n_bins - 1)
        _, block = np.unique(idx, return_inverse=True)
        means = group_means(features, block)[block]
        return CondExpEstimate("binned", means, n_bins=n_bins)
    if method == "nw":
        h = config.bandwidth if config.bandwidth is not None else silverman_bandwidth(dataset.times)
        means = nw_cond_exp(features, dataset.times, h, config.leave_one_out)
        return CondExpEstimate("nw", means, bandwidth=h)
    raise ValueError(f"unknown conditional-expectation method {config.method!r}")
