"""Ground-truth generators: time-varying Gaussian graphical models (plain and
truncated to the positive orthant), time-varying Ising models, and 1-D
Gaussian families with closed-form time scores.

Every sampler takes an explicit seed or :class:`numpy.random.Generator`.
Independent replications are seeded with :func:`spawn_seeds`, which splits a
root seed through :class:`numpy.random.SeedSequence`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .model import FeatureMap, TimedDataset


def as_generator(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def spawn_seeds(root_seed: int, count: int) -> list[np.random.SeedSequence]:
    """Independent child seed sequences; child ``r`` depends only on
    ``(root_seed, r)``."""
    return np.random.SeedSequence(root_seed).spawn(count)


# ----------------------------------------------------------------------------
# Precision paths
# ----------------------------------------------------------------------------


@dataclass(frozen=True)
class PrecisionPath:
    """``Theta(t) = theta0 + Theta'(t)`` with a sparse symmetric change.

    Each changing pair ``(i, j)`` in ``change_mask`` carries a coefficient
    ``coef``: under ``"sine"`` the entry moves as ``coef * sin(freq * t)``,
    under ``"linear"`` as ``coef * t``.  Pairs may sit on the diagonal.
    """

    theta0: np.ndarray
    change_kind: str
    change_mask: tuple[tuple[int, int], ...]
    coef: tuple[float, ...]
    freq: float = 10.0
    seed: Optional[int] = None
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        t0 = np.array(self.theta0, dtype=float)
        if t0.ndim != 2 or t0.shape[0] != t0.shape[1]:
            raise ValueError("theta0 must be square")
        if not np.allclose(t0, t0.T, atol=1e-12):
            raise ValueError("theta0 must be symmetric")
        t0.setflags(write=False)
        object.__setattr__(self, "theta0", t0)
        if self.change_kind not in ("sine", "linear"):
            raise ValueError(f"unknown change kind {self.change_kind!r}")
        if len(self.change_mask) != len(self.coef):
            raise ValueError("one coefficient per changing pair is required")
        grid = np.linspace(0.0, 1.0, 50)
        eig = np.linalg.eigvalsh(self.evaluate(grid))
        if eig.min() <= 0:
            bad = grid[np.argmin(eig.min(axis=1))]
            raise ValueError(f"Theta(t) is not positive definite at t={bad:.3f}")

    @property
    def d(self) -> int:
        return self.theta0.shape[0]

    def _profile(self, t):
        if self.change_kind == "sine":
            return np.sin(self.freq * t), self.freq * np.cos(self.freq * t)
        return t, np.ones_like(t)

    def _delta(self) -> np.ndarray:
        D = np.zeros((self.d, self.d))
        for (i, j), a in zip(self.change_mask, self.coef):
            D[i, j] = D[j, i] = a
        return D

    def evaluate(self, t):
        """``(d, d)`` for scalar t, ``(n, d, d)`` for an array."""
        t_arr = np.asarray(t, dtype=float)
        h, _ = self._profile(np.atleast_1d(t_arr))
        out = self.theta0[None] + h[:, None, None] * self._delta()[None]
        return out[0] if t_arr.ndim == 0 else out

    def derivative(self, t):
        t_arr = np.asarray(t, dtype=float)
        _, dh = self._profile(np.atleast_1d(t_arr))
        out = dh[:, None, None] * self._delta()[None]
        return out[0] if t_arr.ndim == 0 else out

    def feature_dtheta(self, t, fmap: Optional[FeatureMap] = None) -> np.ndarray:
        """Ground-truth ``d/dt theta(t)`` in Gaussian pairwise feature space.

        The density is ``exp(-x'Theta x / 2)``, so the natural parameter of
        ``x_i**2`` is ``-Theta_ii / 2`` and that of ``x_i x_j`` (i < j) is
        ``-Theta_ij``.
        """
        fmap = fmap or FeatureMap.gaussian_pairwise(self.d)
        dT = self.derivative(t)
        iu, ju = fmap.pairs.T
        scale = np.where(iu == ju, -0.5, -1.0)
        return dT[..., iu, ju] * scale

    def alpha_star(self, fmap: Optional[FeatureMap] = None) -> np.ndarray:
        """Linear-basis coefficients (only meaningful for linear changes)."""
        if self.change_kind != "linear":
            raise ValueError("alpha_star is constant only for linear changes")
        return self.feature_dtheta(0.5, fmap)

    def change_labels(self, fmap: Optional[FeatureMap] = None) -> np.ndarray:
        """Boolean per feature: does the natural parameter move at all?"""
        fmap = fmap or FeatureMap.gaussian_pairwise(self.d)
        D = self._delta() != 0
        iu, ju = fmap.pairs.T
        return D[iu, ju]

    def truth_record(self) -> dict:
        return {
            "d": self.d,
            "change_kind": self.change_kind,
            "mask": [list(map(int, p)) for p in self.change_mask],
            "coef": list(map(float, self.coef)),
            "freq": self.freq,
            "params": self.params,
            "seed": self.seed,
        }


def build_theta0(d: int, style: str, seed, diag: Optional[float] = None) -> np.ndarray:
    """Dense symmetric base precision.

    ``"estimation"``: ``A ~ N(0,1)``, off-diagonal of ``A'A / d / 2`` with
    the diagonal set to ``diag`` (default 2).  ``"inference"``:
    ``A ~ U(0,1)``, ``0.01 A'A`` with the diagonal set to ``diag``
    (default 12).
    """
    if d < 2:
        raise ValueError(f"d must be >= 2, got {d}")
    rng = as_generator(seed)
    if style == "estimation":
        A = rng.standard_normal((d, d))
        T = A.T @ A / d / 2.0
        fill = 2.0 if diag is None else diag
    elif style == "inference":
        A = rng.uniform(0.0, 1.0, (d, d))
        T = 0.01 * (A.T @ A)
        fill = 12.0 if diag is None else diag
    else:
        raise ValueError(f"unknown style {style!r}")
    T = 0.5 * (T + T.T)
    np.fill_diagonal(T, fill)
    return T


def _bernoulli_pairs(d, p, rng, exclude=(), min_changes=0, max_tries=1000):
    iu, ju = np.triu_indices(d, 1)
    keep = np.array([(i, j) not in exclude for i, j in zip(iu, ju)], dtype=bool)
    for _ in range(max_tries):
        hit = (rng.uniform(size=len(iu)) < p) & keep
        if hit.sum() >= min_changes:
            return [(int(i), int(j)) for i, j in zip(iu[hit], ju[hit])]
    raise RuntimeError("could not draw a mask with the requested number of changes")


def _redraw_until_pd(build, rng, max_tries):
    for attempt in range(1, max_tries + 1):
        try:
            path = build()
        except ValueError as exc:
            if "positive definite" not in str(exc):
                raise
            continue
        path.params["attempts"] = attempt
        return path
    raise ValueError(f"no positive definite path in {max_tries} draws")


def sine_ggm_path(d: int = 20, p: float = 0.02, amp: float = 0.5, freq: float = 10.0,
                  diag: float = 2.0, seed=None, min_changes: int = 1, max_tries: int = 50) -> PrecisionPath:
    """Random pairs move as ``amp * sin(freq t)``.

    Draws that are not positive definite on ``[0, 1]`` are discarded and
    redrawn from the same stream; the number of attempts is recorded.
    """
    rng = as_generator(seed)

    def build():
        theta0 = build_theta0(d, "estimation", rng, diag)
        mask = _bernoulli_pairs(d, p, rng, min_changes=min_changes)
        return PrecisionPath(theta0, "sine", tuple(mask), (amp,) * len(mask), freq, _seed_int(seed),
                             {"model": "ggm-sine", "p": p, "amp": amp, "diag": diag})

    return _redraw_until_pd(build, rng, max_tries)


def linear_ggm_path(d: int = 40, p: float = 0.023, slope: float = 0.45, diag: float = 1.0,
                    seed=None, min_changes: int = 1, max_tries: int = 50) -> PrecisionPath:
    """Random pairs move as ``slope * t``; redrawn until positive definite."""
    rng = as_generator(seed)

    def build():
        theta0 = build_theta0(d, "estimation", rng, diag)
        mask = _bernoulli_pairs(d, p, rng, min_changes=min_changes)
        return PrecisionPath(theta0, "linear", tuple(mask), (slope,) * len(mask), seed=_seed_int(seed),
                             params={"model": "ggm-linear", "p": p, "slope": slope, "diag": diag})

    return _redraw_until_pd(build, rng, max_tries)


def deterministic_inference_path(d: int = 20, seed=None, target_slope: float = 1.0) -> PrecisionPath:
    """Chain edges ``(i, i+1)`` plus ``(0, 2), (0, 3), (0, 4)`` move as ``t``.

    ``target_slope`` overrides the slope of the edge of interest ``(0, 1)``.
    """
    theta0 = build_theta0(d, "inference", seed)
    mask = [(i, i + 1) for i in range(d - 1)] + [(0, i) for i in (2, 3, 4) if i < d]
    coef = [target_slope if pair == (0, 1) else 1.0 for pair in mask]
    if target_slope == 0.0:
        keep = [i for i, c in enumerate(coef) if c != 0.0]
        mask, coef = [mask[i] for i in keep], [coef[i] for i in keep]
    return PrecisionPath(theta0, "linear", tuple(mask), tuple(coef), seed=_seed_int(seed),
                         params={"model": "inference-deterministic", "target_slope": target_slope})


def random_inference_path(d: int = 20, p: float = 0.2, seed=None, target=(0, 1),
                          target_slope: float = 0.0) -> PrecisionPath:
    """Pairs other than ``target`` move as ``t`` with probability ``p``; the
    target moves with ``target_slope`` (constant by default)."""
    rng = as_generator(seed)
    theta0 = build_theta0(d, "inference", rng)
    mask = _bernoulli_pairs(d, p, rng, exclude={tuple(target)})
    coef = [1.0] * len(mask)
    if target_slope != 0.0:
        mask = [tuple(target)] + mask
        coef = [target_slope] + coef
    return PrecisionPath(theta0, "linear", tuple(mask), tuple(coef), seed=_seed_int(seed),
                         params={"model": "inference-random", "p": p, "target_slope": target_slope})


def _seed_int(seed):
    return int(seed) if isinstance(seed, (int, np.integer)) else None


# ----------------------------------------------------------------------------
# Gaussian samplers
# ----------------------------------------------------------------------------


def _draw_times(rng, n, layout, m):
    if layout == "paired":
        return np.sort(rng.uniform(0.0, 1.0, n)), None
    if layout == "grouped":
        if m is None or m < 1:
            raise ValueError("grouped layout needs m >= 1 time points")
        t = np.linspace(0.0, 1.0, m)
        return np.repeat(t, n), t
    raise ValueError(f"unknown layout {layout!r}")


def _cholesky_stack(path: PrecisionPath, t):
    Th = path.evaluate(t)
    try:
        return np.linalg.cholesky(Th)
    except np.linalg.LinAlgError:
        for ti, M in zip(t, Th):
            try:
                np.linalg.cholesky(M)
            except np.linalg.LinAlgError:
                raise np.linalg.LinAlgError(f"Theta(t) not positive definite at t={ti:.6f}") from None
        raise


def _gaussian_draws(L, z):
    # Theta = L L'  =>  x = L'^{-1} z has covariance Theta^{-1}.
    return np.linalg.solve(np.swapaxes(L, -1, -2), z[..., None])[..., 0]


def sample_ggm_path(path: PrecisionPath, n: int, seed=None, layout: str = "paired",
                    m: Optional[int] = None) -> TimedDataset:
    """``x ~ N(0, Theta(t)^{-1})``.

    Paired: ``n`` uniform times, one draw each.  Grouped: ``m`` equispaced
    times on ``[0, 1]`` with ``n`` draws each.
    """
    rng = as_generator(seed)
    t_rows, t_blocks = _draw_times(rng, n, layout, m)
    L = _cholesky_stack(path, t_rows)
    X = _gaussian_draws(L, rng.standard_normal((len(t_rows), path.d)))
    if layout == "paired":
        return TimedDataset.paired(t_rows, X, (0.0, 1.0))
    return TimedDataset.grouped(t_blocks, np.split(X, m), (0.0, 1.0))


def truncated_acceptance(path: PrecisionPath, rng, draws: int = 10_000) -> float:
    t = rng.uniform(0.0, 1.0, draws)
    X = _gaussian_draws(_cholesky_stack(path, t), rng.standard_normal((draws, path.d)))
    return float(np.mean(np.all(X > 0, axis=1)))


def sample_truncated_ggm(path: PrecisionPath, n: int, seed=None, chunk: int = 64,
                         min_acceptance: float = 1e-4) -> TimedDataset:
    """Rejection sampling of ``N(0, Theta(t)^{-1})`` restricted to ``x > 0``."""
    rng = as_generator(seed)
    acc = truncated_acceptance(path, rng)
    if acc < min_acceptance:
        raise RuntimeError(f"truncated sampler acceptance {acc:.2e} is below the guard {min_acceptance:g}")
    t = np.sort(rng.uniform(0.0, 1.0, n))
    L = _cholesky_stack(path, t)
    # x = L'^{-1} z; invert the factors once and reuse them for every draw.
    M = np.linalg.inv(np.swapaxes(L, -1, -2))
    X = np.full((n, path.d), np.nan)
    # About one expected acceptance per batch keeps wasted draws low.
    batch = int(min(max(1.0 / max(acc, 1e-4), 16), 20_000))
    pending = np.arange(n)
    while len(pending):
        for start in range(0, len(pending), chunk):
            idx = pending[start:start + chunk]
            z = rng.standard_normal((len(idx), batch, path.d))
            draws = z @ np.swapaxes(M[idx], 1, 2)
            ok = np.all(draws > 0, axis=2)
            hit = ok.any(axis=1)
            first = ok.argmax(axis=1)
            X[idx[hit]] = draws[hit, first[hit]]
        pending = pending[np.isnan(X[pending, 0])]
    return TimedDataset.paired(t, X, (0.0, 1.0))


# ----------------------------------------------------------------------------
# Ising models
# ----------------------------------------------------------------------------


@dataclass(frozen=True)
class IsingPath:
    """Couplings ``Theta(t) = theta0 + t * slopes`` over pairs ``i < j``.

    The density is ``exp(sum_{i<j} Theta_ij(t) x_i x_j) / Z`` on ``{0,1}^d``,
    so the pairwise feature coefficients are ``d/dt Theta_ij`` directly.
    """

    theta0: np.ndarray
    slopes: np.ndarray
    seed: Optional[int] = None

    @property
    def d(self) -> int:
        return self.theta0.shape[0]

    def __call__(self, t):
        t = np.atleast_1d(np.asarray(t, dtype=float))
        return self.theta0[None] + t[:, None, None] * self.slopes[None]

    def alpha_star(self) -> np.ndarray:
        iu, ju = np.triu_indices(self.d, 1)
        return self.slopes[iu, ju].copy()

    def truth_record(self) -> dict:
        iu, ju = np.nonzero(np.triu(self.slopes, 1))
        return {
            "d": self.d,
            "change_kind": "linear",
            "mask": [[int(i), int(j)] for i, j in zip(iu, ju)],
            "coef": [float(self.slopes[i, j]) for i, j in zip(iu, ju)],
            "params": {"model": "ising"},
            "seed": self.seed,
        }


def random_ising_path(d: int = 10, p: float = 0.1, base_scale: float = 0.3, slope: float = 1.0,
                      seed=None) -> IsingPath:
    rng = as_generator(seed)
    iu, ju = np.triu_indices(d, 1)
    theta0 = np.zeros((d, d))
    theta0[iu, ju] = rng.normal(0.0, base_scale, len(iu))
    slopes = np.zeros((d, d))
    hit = rng.uniform(size=len(iu)) < p
    slopes[iu[hit], ju[hit]] = slope * rng.choice([-1.0, 1.0], hit.sum())
    theta0 = theta0 + theta0.T
    slopes = slopes + slopes.T
    return IsingPath(theta0, slopes, _seed_int(seed))


def sample_ising_path(theta_path: Callable, d: int, n: int, seed=None, n_sweeps: int = 200,
                      burn_in: int = 50, layout: str = "paired", m: Optional[int] = None) -> TimedDataset:
    """Gibbs sampling on ``{0,1}^d`` with one independent chain per sample.

    ``theta_path`` maps an array of times to ``(len(t), d, d)`` symmetric
    couplings (the diagonal is ignored).  Each chain starts from a uniform
    random state and runs ``burn_in + n_sweeps`` full sweeps; the site order
    of every sweep is a seeded random permutation shared by all chains.
    """
    if d > 64:
        raise ValueError("Gibbs sampler is limited to d <= 64")
    rng = as_generator(seed)
    t_rows, t_blocks = _draw_times(rng, n, layout, m)
    Th = np.array(theta_path(t_rows), dtype=float)
    if Th.shape != (len(t_rows), d, d):
        raise ValueError(f"theta_path returned {Th.shape}, expected {(len(t_rows), d, d)}")
    Th = Th.copy()
    Th[:, np.arange(d), np.arange(d)] = 0.0
    X = (rng.uniform(size=(len(t_rows), d)) < 0.5).astype(float)
    for _ in range(burn_in + n_sweeps):
        order = rng.permutation(d)
        u = rng.uniform(size=(d, len(t_rows)))
        for s, i in enumerate(order):
            field_i = np.einsum("nj,nj->n", Th[:, i, :], X)
            X[:, i] = (u[s] < 1.0 / (1.0 + np.exp(-field_i))).astype(float)
    if layout == "paired":
        return TimedDataset.paired(t_rows, X, (0.0, 1.0))
    return TimedDataset.grouped(t_blocks, np.split(X, m), (0.0, 1.0))


# ----------------------------------------------------------------------------
# One-dimensional Gaussian families with exact time scores
# ----------------------------------------------------------------------------


@dataclass(frozen=True)
class GaussianOracle:
    """``x ~ N(mu(t), sigma(t)^2)`` with natural parameters
    ``[mu / sigma^2, -1 / (2 sigma^2)]`` for features ``[x, x^2]``."""

    kind: str
    mu: Callable
    dmu: Callable
    sigma: Callable
    dsigma: Callable

    def sample(self, n: int, seed=None, layout: str = "paired", m: Optional[int] = None) -> TimedDataset:
        rng = as_generator(seed)
        t_rows, t_blocks = _draw_times(rng, n, layout, m)
        x = self.mu(t_rows) + self.sigma(t_rows) * rng.standard_normal(len(t_rows))
        if layout == "paired":
            return TimedDataset.paired(t_rows, x[:, None], (0.0, 1.0))
        return TimedDataset.grouped(t_blocks, np.split(x[:, None], m), (0.0, 1.0))

    def moments(self, t) -> np.ndarray:
        """``[E x, E x^2]`` at time t."""
        mu, s = self.mu(t), self.sigma(t)
        return np.stack([mu, s**2 + mu**2], axis=-1)

    def dtheta(self, t) -> np.ndarray:
        mu, dmu, s, ds = self.mu(t), self.dmu(t), self.sigma(t), self.dsigma(t)
        d_inv_var = -2.0 * ds / s**3  # d/dt sigma^-2
        return np.stack([dmu / s**2 + mu * d_inv_var, -0.5 * d_inv_var], axis=-1)

    def time_score(self, x, t):
        """Closed-form ``d/dt log q_t(x)``, written per family."""
        x = np.asarray(x, dtype=float)
        mu, dmu, s, ds = self.mu(t), self.dmu(t), self.sigma(t), self.dsigma(t)
        d_inv_var = -2.0 * ds / s**3
        d_half_inv_var = 0.5 * d_inv_var
        if self.kind == "fixed_mean_time_var":
            return -(x**2) * d_half_inv_var + x * mu * d_inv_var - mu**2 * d_half_inv_var - ds / s
        if self.kind == "time_mean_fixed_var":
            return (2.0 * x * dmu - 2.0 * mu * dmu) / (2.0 * s**2)
        return (-(x**2) * d_half_inv_var + x * dmu / s**2 + x * mu * d_inv_var
                - mu * dmu / s**2 - mu**2 * d_half_inv_var - ds / s)


def gaussian_oracle_family(kind: str, mu0: float = 0.5, mu_slope: float = 1.0,
                           sigma0: float = 1.0, sigma_slope: float = 0.5) -> GaussianOracle:
    """One of ``fixed_mean_time_var``, ``time_mean_fixed_var``,
    ``time_mean_time_var`` with linear ``mu(t)`` and ``sigma(t)``."""
    const = lambda v: (lambda t: np.full_like(np.asarray(t, dtype=float), v))
    if kind == "fixed_mean_time_var":
        mu, dmu = const(mu0), const(0.0)
        sigma, dsigma = (lambda t: sigma0 + sigma_slope * np.asarray(t, dtype=float)), const(sigma_slope)
    elif kind == "time_mean_fixed_var":
        mu, dmu = (lambda t: mu0 + mu_slope * np.asarray(t, dtype=float)), const(mu_slope)
        sigma, dsigma = const(sigma0), const(0.0)
    elif kind == "time_mean_time_var":
        mu, dmu = (lambda t: mu0 + mu_slope * np.asarray(t, dtype=float)), const(mu_slope)
        sigma, dsigma = (lambda t: sigma0 + sigma_slope * np.asarray(t, dtype=float)), const(sigma_slope)
    else:
        raise ValueError(f"unknown Gaussian family {kind!r}")
    if sigma0 <= 0 or sigma0 + sigma_slope <= 0:
        raise ValueError("sigma(t) must stay positive on [0, 1]")
    return GaussianOracle(kind, mu, dmu, sigma, dsigma)


def mean_shift_series(T: int = 5000, change_at: float = 0.5, before: float = 0.0, after: float = 2.0,
                      sigma: float = 1.0, seed=None) -> TimedDataset:
    """Equispaced univariate series whose mean jumps at ``change_at``."""
    rng = as_generator(seed)
    t = np.linspace(0.0, 1.0, T)
    x = np.where(t < change_at, before, after) + sigma * rng.standard_normal(T)
    return TimedDataset.paired(t, x[:, None], (0.0, 1.0))
