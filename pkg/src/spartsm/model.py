"""Core domain types: feature maps, time bases, the weighting function and
time-indexed datasets.

All times inside the package live on the unit interval.  Raw time stamps are
mapped there once, when a :class:`TimedDataset` is built.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Optional, Sequence

import numpy as np


def _frozen(a, dtype=float) -> np.ndarray:
    a = np.array(a, dtype=dtype, copy=True)
    a.setflags(write=False)
    return a


# ----------------------------------------------------------------------------
# Feature maps
# ----------------------------------------------------------------------------


class FeatureKind(str, Enum):
    GAUSSIAN_PAIRWISE = "gaussian_pairwise"
    ISING_PAIRWISE = "ising_pairwise"
    CUSTOM = "custom"


@dataclass(frozen=True)
class FeatureMap:
    """Sufficient statistic ``f: R^d -> R^k``.

    Pairwise maps use upper-triangular row-major ordering of ``(i, j)``
    pairs, i.e. the order of :func:`numpy.triu_indices`.  Gaussian maps keep
    the diagonal (``i == j``), Ising maps drop it since ``x_i**2 == x_i`` on
    binary data.
    """

    kind: FeatureKind
    d: int
    k: int
    evaluator: Optional[Callable[[np.ndarray], np.ndarray]] = None
    vectorized: bool = False

    @classmethod
    def gaussian_pairwise(cls, d: int) -> "FeatureMap":
        if d < 1:
            raise ValueError(f"d must be positive, got {d}")
        return cls(FeatureKind.GAUSSIAN_PAIRWISE, d, d * (d + 1) // 2)

    @classmethod
    def ising_pairwise(cls, d: int) -> "FeatureMap":
        if d < 2:
            raise ValueError(f"Ising features need d >= 2, got {d}")
        return cls(FeatureKind.ISING_PAIRWISE, d, d * (d - 1) // 2)

    @classmethod
    def custom(cls, d: int, k: int, evaluator: Callable, vectorized: bool = False) -> "FeatureMap":
        """``evaluator`` maps one observation to ``k`` values, or the whole
        ``(n, d)`` matrix to ``(n, k)`` when ``vectorized`` is set."""
        return cls(FeatureKind.CUSTOM, d, k, evaluator, vectorized)

    @classmethod
    def univariate_moments(cls) -> "FeatureMap":
        """``f(x) = [x, x**2]`` for scalar observations."""
        return cls.custom(1, 2, lambda X: np.column_stack([X[:, 0], X[:, 0] ** 2]), vectorized=True)

    @property
    def pairs(self) -> Optional[np.ndarray]:
        """``(k, 2)`` array of ``(i, j)`` pairs, or None for custom maps."""
        if self.kind is FeatureKind.GAUSSIAN_PAIRWISE:
            return np.column_stack(np.triu_indices(self.d))
        if self.kind is FeatureKind.ISING_PAIRWISE:
            return np.column_stack(np.triu_indices(self.d, 1))
        return None

    def edge_of(self, index: int) -> Optional[tuple[int, int]]:
        pairs = self.pairs
        if pairs is None:
            return None
        i, j = pairs[index]
        return int(i), int(j)

    def index_of(self, i: int, j: int) -> int:
        """Feature index of the pair ``(i, j)`` (order of i, j is ignored)."""
        i, j = min(i, j), max(i, j)
        d = self.d
        if i < 0 or j >= d:
            raise ValueError(f"pair ({i}, {j}) out of range for d={d}")
        if self.kind is FeatureKind.GAUSSIAN_PAIRWISE:
            return i * d - i * (i - 1) // 2 + (j - i)
        if self.kind is FeatureKind.ISING_PAIRWISE:
            if i == j:
                raise ValueError("Ising features have no diagonal terms")
            return i * (d - 1) - i * (i - 1) // 2 + (j - i - 1)
        raise ValueError("custom feature maps have no pair layout")

    def __call__(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.shape != (self.d,):
            raise ValueError(f"expected observation of length {self.d}, got {x.shape}")
        return self.transform(x[None, :])[0]

    def transform(self, X) -> np.ndarray:
        """Apply the map row-wise to an ``(n, d)`` matrix."""
        X = np.asarray(X, dtype=float)
        if X.ndim != 2 or X.shape[1] != self.d:
            raise ValueError(f"expected (n, {self.d}) observations, got {X.shape}")
        if self.kind is FeatureKind.CUSTOM:
            if self.vectorized:
                out = np.asarray(self.evaluator(X), dtype=float).reshape(len(X), -1)
            else:
                out = np.array([np.asarray(self.evaluator(row), dtype=float) for row in X])
                out = out.reshape(len(X), -1)
            if out.shape[1] != self.k:
                raise ValueError(f"custom evaluator returned {out.shape[1]} features, expected {self.k}")
            return out
        iu, ju = self.pairs.T
        return X[:, iu] * X[:, ju]


# ----------------------------------------------------------------------------
# Time bases
# ----------------------------------------------------------------------------


class BasisKind(str, Enum):
    LINEAR = "linear"
    FOURIER = "fourier"
    CUSTOM = "custom"


@dataclass(frozen=True)
class TimeBasis:
    """Basis ``phi(t)`` with its first two derivatives.

    ``phi``, ``dphi`` and ``d2phi`` accept a scalar or a 1-D array of times
    and return shape ``(b,)`` or ``(len(t), b)`` respectively.
    """

    kind: BasisKind
    b: int
    _phi: Callable = field(repr=False)
    _dphi: Callable = field(repr=False)
    _d2phi: Callable = field(repr=False)

    @classmethod
    def linear(cls) -> "TimeBasis":
        return cls(
            BasisKind.LINEAR,
            1,
            lambda t: t[:, None],
            lambda t: np.ones((len(t), 1)),
            lambda t: np.zeros((len(t), 1)),
        )

    @classmethod
    def fourier(cls, b: int) -> "TimeBasis":
        """``[sin(t), cos(t), ..., sin(b t / 2), cos(b t / 2)]``."""
        if b < 2 or b % 2:
            raise ValueError(f"Fourier basis needs an even b >= 2, got {b}")
        m = np.repeat(np.arange(1, b // 2 + 1, dtype=float), 2)
        is_sin = np.tile([True, False], b // 2)

        def phi(t):
            mt = t[:, None] * m
            return np.where(is_sin, np.sin(mt), np.cos(mt))

        def dphi(t):
            mt = t[:, None] * m
            return m * np.where(is_sin, np.cos(mt), -np.sin(mt))

        def d2phi(t):
            return -(m**2) * phi(t)

        return cls(BasisKind.FOURIER, b, phi, dphi, d2phi)

    @classmethod
    def custom(cls, b: int, phi: Callable, dphi: Callable, d2phi: Callable) -> "TimeBasis":
        """Wrap user functions mapping an array of times to ``(len(t), b)``."""
        return cls(BasisKind.CUSTOM, b, phi, dphi, d2phi)

    def _eval(self, fn, t):
        arr = np.asarray(t, dtype=float)
        out = np.asarray(fn(np.atleast_1d(arr)), dtype=float).reshape(-1, self.b)
        return out[0] if arr.ndim == 0 else out

    def phi(self, t):
        return self._eval(self._phi, t)

    def dphi(self, t):
        return self._eval(self._dphi, t)

    def d2phi(self, t):
        return self._eval(self._d2phi, t)

    def describe(self) -> dict:
        return {"kind": self.kind.value, "b": self.b}


# ----------------------------------------------------------------------------
# Weighting function
# ----------------------------------------------------------------------------


@dataclass(frozen=True)
class WeightFunction:
    """``g(t) = -(t - t_start)(t - t_end)``, zero on both ends of the domain."""

    t_start: float = 0.0
    t_end: float = 1.0

    def g(self, t):
        t = np.asarray(t, dtype=float)
        return -(t - self.t_start) * (t - self.t_end)

    def dg(self, t):
        t = np.asarray(t, dtype=float)
        return -(2.0 * t - self.t_start - self.t_end)


def eval_weight(w: WeightFunction, t: float) -> tuple[float, float]:
    return float(w.g(t)), float(w.dg(t))


# ----------------------------------------------------------------------------
# Datasets
# ----------------------------------------------------------------------------


def normalize_times(raw_times, domain: Sequence[float]) -> np.ndarray:
    """Affine map of ``domain = [a, b]`` onto ``[0, 1]``."""
    a, b = float(domain[0]), float(domain[1])
    if not b > a:
        raise ValueError(f"degenerate time domain [{a}, {b}]")
    raw = np.asarray(raw_times, dtype=float)
    if np.any(raw < a) or np.any(raw > b):
        raise ValueError(f"times fall outside the domain [{a}, {b}]")
    return (raw - a) / (b - a)


@dataclass(frozen=True)
class TimedDataset:
    """Time-stamped observations on the unit time domain.

    Rows are stored flat: ``times[i]`` and ``obs[i]`` describe observation
    ``i``.  For grouped data ``block[i]`` is the index of the block the row
    belongs to; for paired data it is ``None``.  ``time_domain`` records the
    raw interval that was mapped onto ``[0, 1]``.
    """

    times: np.ndarray
    obs: np.ndarray
    block: Optional[np.ndarray] = None
    time_domain: tuple[float, float] = (0.0, 1.0)

    @classmethod
    def paired(cls, times, obs, domain: Optional[Sequence[float]] = None) -> "TimedDataset":
        times = np.asarray(times, dtype=float).ravel()
        obs = _check_obs(obs, len(times))
        domain = _infer_domain(times, domain)
        t = normalize_times(times, domain)
        order = np.argsort(t, kind="stable")
        return cls(_frozen(t[order]), _frozen(obs[order]), None, (float(domain[0]), float(domain[1])))

    @classmethod
    def grouped(cls, times, blocks, domain: Optional[Sequence[float]] = None) -> "TimedDataset":
        times = np.asarray(times, dtype=float).ravel()
        if len(times) != len(blocks):
            raise ValueError("one time stamp per block is required")
        blocks = [np.atleast_2d(np.asarray(b, dtype=float)) for b in blocks]
        if any(b.shape[0] == 0 or b.size == 0 for b in blocks):
            raise ValueError("empty block")
        d = blocks[0].shape[1]
        if any(b.shape[1] != d for b in blocks):
            raise ValueError("blocks disagree on the observation dimension")
        domain = _infer_domain(times, domain)
        t = normalize_times(times, domain)
        order = np.argsort(t, kind="stable")
        obs = np.vstack([blocks[j] for j in order])
        obs = _check_obs(obs, len(obs))
        sizes = np.array([len(blocks[j]) for j in order])
        block = np.repeat(np.arange(len(order)), sizes)
        row_t = np.repeat(t[order], sizes)
        return cls(_frozen(row_t), _frozen(obs), _frozen(block, int), (float(domain[0]), float(domain[1])))

    @property
    def is_grouped(self) -> bool:
        return self.block is not None

    @property
    def n(self) -> int:
        return len(self.times)

    @property
    def d(self) -> int:
        return self.obs.shape[1]

    @property
    def n_blocks(self) -> int:
        return int(self.block[-1]) + 1 if self.is_grouped else self.n

    @property
    def block_times(self) -> np.ndarray:
        if not self.is_grouped:
            return self.times
        first = np.r_[0, np.flatnonzero(np.diff(self.block)) + 1]
        return self.times[first]

    @property
    def block_sizes(self) -> np.ndarray:
        if not self.is_grouped:
            return np.ones(self.n, dtype=int)
        return np.bincount(self.block)

    def blocks(self) -> list[np.ndarray]:
        if not self.is_grouped:
            return [row[None, :] for row in self.obs]
        cuts = np.cumsum(self.block_sizes)[:-1]
        return np.split(self.obs, cuts)

    def row_weights(self) -> np.ndarray:
        """Weights reproducing the per-block average of per-row averages."""
        if not self.is_grouped:
            return np.full(self.n, 1.0 / self.n)
        sizes = self.block_sizes
        return 1.0 / (self.n_blocks * sizes[self.block])

    def raw_times(self) -> np.ndarray:
        a, b = self.time_domain
        return a + self.times * (b - a)


def _check_obs(obs, n) -> np.ndarray:
    obs = np.asarray(obs, dtype=float)
    if obs.ndim == 1:
        obs = obs[:, None]
    if obs.ndim != 2 or obs.shape[0] != n:
        raise ValueError(f"expected {n} observation rows, got shape {obs.shape}")
    if not np.all(np.isfinite(obs)):
        bad = np.flatnonzero(~np.all(np.isfinite(obs), axis=1))
        raise ValueError(f"non-finite observations in rows {bad[:10].tolist()}")
    return obs


def _infer_domain(times, domain):
    if len(times) == 0:
        raise ValueError("dataset is empty")
    if not np.all(np.isfinite(times)):
        raise ValueError("non-finite time stamps")
    if domain is None:
        return float(np.min(times)), float(np.max(times))
    return float(domain[0]), float(domain[1])


def read_csv(path, layout: str = "paired", domain=None) -> TimedDataset:
    """Load ``t,x1,...,xd`` CSV.  In the grouped layout, rows sharing a time
    stamp form one block."""
    with open(path, newline="") as fh:
        header = next(csv.reader(fh))
    if not header or header[0].strip() != "t":
        raise ValueError(f"{path}: first column must be 't'")
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    if data.shape[1] != len(header):
        raise ValueError(f"{path}: rows have {data.shape[1]} columns, header has {len(header)}")
    t, X = data[:, 0], data[:, 1:]
    if layout == "paired":
        return TimedDataset.paired(t, X, domain)
    if layout == "grouped":
        uniq, inv = np.unique(t, return_inverse=True)
        blocks = [X[inv == j] for j in range(len(uniq))]
        return TimedDataset.grouped(uniq, blocks, domain)
    raise ValueError(f"unknown layout {layout!r}")


def write_csv(path, dataset: TimedDataset, raw_times: bool = True, fmt: str = "%.10g") -> None:
    t = dataset.raw_times() if raw_times else dataset.times
    header = ",".join(["t"] + [f"x{i + 1}" for i in range(dataset.d)])
    np.savetxt(path, np.column_stack([t, dataset.obs]), delimiter=",", header=header, comments="", fmt=fmt)


# ----------------------------------------------------------------------------
# Differential parameter
# ----------------------------------------------------------------------------


@dataclass(frozen=True)
class DiffParam:
    """``d/dt theta(t) = alpha.T @ dphi(t)`` with ``alpha`` of shape ``(b, k)``."""

    alpha: np.ndarray
    basis: TimeBasis

    def __post_init__(self):
        alpha = np.atleast_2d(np.asarray(self.alpha, dtype=float))
        if alpha.shape[0] != self.basis.b:
            raise ValueError(f"alpha has {alpha.shape[0]} rows, basis has b={self.basis.b}")
        object.__setattr__(self, "alpha", _frozen(alpha))

    @property
    def feature_dim(self) -> int:
        return self.alpha.shape[1]

    def evaluate(self, t):
        """Vector of length k for scalar t, ``(len(t), k)`` for an array."""
        return self.basis.dphi(t) @ self.alpha


def eval_diff_param(dp: DiffParam, t: float) -> np.ndarray:
    return dp.evaluate(float(t))
