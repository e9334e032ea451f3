"""l1-regularised minimisation of ``v'Hv + 2c'v + lam * |v|_1``.

Both the sparse fit and the inverse-Hessian columns used for debiasing are
problems of this form, so they share one accelerated proximal gradient
routine (FISTA with function-value restarts, which keeps the objective
monotone).
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .model import DiffParam, FeatureMap, TimeBasis, TimedDataset, WeightFunction
from .objective import (
    GeneralObjective,
    QuadraticObjective,
    SingularSystemError,
    build_objective_general,
    closed_form_minimizer,
    default_ridge,
    per_sample_gradients,
)

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class LassoConfig:
    lam: float = 0.0
    max_iter: int = 10000
    tol: float = 1e-8
    step: str = "lipschitz"  # or "backtracking"
    acceleration: bool = True
    kkt_tol: float = 1e-6

    def __post_init__(self):
        if not self.tol > 0:
            raise ValueError("tol must be positive")
        if self.max_iter < 1:
            raise ValueError("max_iter must be >= 1")
        if self.lam < 0:
            raise ValueError("lambda must be non-negative")
        if self.step not in ("lipschitz", "backtracking"):
            raise ValueError(f"unknown step rule {self.step!r}")


@dataclass
class LassoSolution:
    alpha_hat: np.ndarray
    iterations: int
    converged: bool
    final_subgradient_gap: float
    objective: float
    support: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=int))
    objective_trace: np.ndarray = field(default_factory=lambda: np.zeros(0), repr=False)


def soft_threshold(v, tau):
    """``sign(v) * max(|v| - tau, 0)``, elementwise."""
    if np.any(np.asarray(tau) < 0):
        raise ValueError("tau must be non-negative")
    out = np.sign(v) * np.maximum(np.abs(v) - tau, 0.0)
    return float(out) if np.ndim(out) == 0 else out


def kkt_residual(grad: np.ndarray, x: np.ndarray, lam: float) -> float:
    """Distance of ``-grad`` from ``lam * subdifferential(|x|_1)``, max-norm."""
    on = x != 0
    r_on = np.abs(grad[on] + lam * np.sign(x[on]))
    r_off = np.maximum(np.abs(grad[~on]) - lam, 0.0)
    return float(max(r_on.max(initial=0.0), r_off.max(initial=0.0)))


def power_lambda_max(H: np.ndarray, iters: int = 100) -> float:
    """Largest eigenvalue of a PSD matrix by power iteration."""
    v = np.ones(H.shape[0]) / math.sqrt(H.shape[0])
    lam = 0.0
    for _ in range(iters):
        w = H @ v
        nrm = np.linalg.norm(w)
        if nrm == 0.0:
            return 0.0
        lam = float(v @ w)
        v = w / nrm
    return max(lam, float(v @ H @ v))


def minimize_l1_quadratic(H: np.ndarray, c: np.ndarray, cfg: LassoConfig, x0=None,
                          lipschitz: float | None = None) -> LassoSolution:
    """Minimise ``v'Hv + 2c'v + cfg.lam * |v|_1``.

    Starts from ``x0`` (zero by default).  A precomputed ``lipschitz``
    constant of the smooth gradient skips the power iteration.
    """
    H = np.asarray(H, dtype=float)
    c = np.asarray(c, dtype=float)
    if not (np.all(np.isfinite(H)) and np.all(np.isfinite(c))):
        raise ValueError("H and c must be finite")
    lam = cfg.lam
    p = len(c)

    def smooth(v):
        return float(v @ (H @ v) + 2.0 * c @ v)

    def total(v):
        return smooth(v) + lam * float(np.abs(v).sum())

    # Safety factor: power iteration approaches lambda_max from below.
    L = 2.0 * power_lambda_max(H) / 0.95 if lipschitz is None else float(lipschitz)
    x = np.zeros(p) if x0 is None else np.array(x0, dtype=float)
    if L == 0.0:
        # Purely linear objective: zero is optimal iff it satisfies KKT.
        x = np.zeros(p)
        gap = kkt_residual(2.0 * c, x, lam)
        return LassoSolution(x, 0, gap <= cfg.kkt_tol * (1 + lam), gap, 0.0, np.zeros(0, dtype=int))

    y = x.copy()
    tk = 1.0
    fx = total(x)
    trace = [fx]
    converged = False
    it = 0
    for it in range(1, cfg.max_iter + 1):
        grad_y = 2.0 * (H @ y) + 2.0 * c
        if cfg.step == "backtracking":
            L, x_new = _backtrack(smooth, y, grad_y, lam, L)
        else:
            x_new = soft_threshold(y - grad_y / L, lam / L)
        f_new = total(x_new)
        if cfg.acceleration and f_new > fx:
            # Restart: drop momentum and take a plain proximal step from x.
            tk = 1.0
            grad_x = 2.0 * (H @ x) + 2.0 * c
            if cfg.step == "backtracking":
                L, x_new = _backtrack(smooth, x, grad_x, lam, L)
            else:
                x_new = soft_threshold(x - grad_x / L, lam / L)
            f_new = total(x_new)
        step = np.linalg.norm(x_new - x)
        scale = max(1.0, np.linalg.norm(x))
        if cfg.acceleration:
            t_next = 0.5 * (1.0 + math.sqrt(1.0 + 4.0 * tk * tk))
            y = x_new + ((tk - 1.0) / t_next) * (x_new - x)
            tk = t_next
        else:
            y = x_new
        x, fx = x_new, f_new
        trace.append(fx)
        if step <= cfg.tol * scale:
            gap = kkt_residual(2.0 * (H @ x) + 2.0 * c, x, lam)
            if gap <= cfg.kkt_tol * (1.0 + lam):
                converged = True
                break
    gap = kkt_residual(2.0 * (H @ x) + 2.0 * c, x, lam)
    if not converged:
        logger.warning("l1 solver stopped after %d iterations, KKT gap %.3g", it, gap)
    return LassoSolution(x, it, converged, gap, total(x), np.flatnonzero(x), np.array(trace))


def _backtrack(smooth, y, grad_y, lam, L):
    fy = smooth(y)
    while True:
        x = soft_threshold(y - grad_y / L, lam / L)
        d = x - y
        if smooth(x) <= fy + grad_y @ d + 0.5 * L * (d @ d) + 1e-15 * abs(fy):
            return L, x
        L *= 2.0


def lasso_minimize(obj: QuadraticObjective, cfg: LassoConfig, x0=None) -> LassoSolution:
    """Sparse time score matching fit."""
    return minimize_l1_quadratic(obj.H, obj.c, cfg, x0)


def lambda_max(obj: QuadraticObjective) -> float:
    """Smallest penalty for which the all-zero fit is optimal."""
    return float(np.abs(2.0 * obj.c).max())


def lasso_path(obj: QuadraticObjective, lambdas, cfg: LassoConfig = LassoConfig()) -> list[LassoSolution]:
    """Fits along ``lambdas`` (sorted large to small), each warm-started
    from the previous solution."""
    lambdas = np.asarray(lambdas, dtype=float)
    if np.any(np.diff(lambdas) > 0):
        raise ValueError("lambdas must be non-increasing")
    L = 2.0 * power_lambda_max(obj.H) / 0.95
    out, x = [], None
    for lam in lambdas:
        sol = minimize_l1_quadratic(obj.H, obj.c, _with_lambda(cfg, float(lam)), x, L)
        out.append(sol)
        x = sol.alpha_hat
    return out


def solve_inverse_hessian_column(obj: QuadraticObjective, j: int, lambda_j: float, cfg: LassoConfig = LassoConfig()) -> LassoSolution:
    """Minimise ``0.5 w'(2H)w - w_j + lambda_j |w|_1``.

    Written as ``w'Hw + 2c'w`` with ``c = -e_j / 2``, the same solver applies.
    """
    if not 0 <= j < obj.dim:
        raise IndexError(f"target {j} out of range for dimension {obj.dim}")
    c = np.zeros(obj.dim)
    c[j] = -0.5
    return minimize_l1_quadratic(obj.H, c, _with_lambda(cfg, lambda_j))


def _with_lambda(cfg: LassoConfig, lam: float) -> LassoConfig:
    return LassoConfig(lam, cfg.max_iter, cfg.tol, cfg.step, cfg.acceleration, cfg.kkt_tol)


def default_lambdas(n: int, k: int, s_omega_j: int | None = None) -> tuple[float, float]:
    """``sqrt(2 log k / n)`` for the fit, ``sqrt(s log k / n)`` per column."""
    if n < 1 or k < 1:
        raise ValueError("n and k must be positive")
    s = max(s_omega_j or 1, 1)
    return math.sqrt(2.0 * math.log(k) / n), math.sqrt(s * math.log(k) / n)


def sigma_scaled_lambda(obj: QuadraticObjective, alpha_pilot=None, delta: float = 0.0) -> float:
    """``2 sigma (sqrt(2 log k / n) + delta)`` with ``sigma^2`` the largest
    per-coordinate variance of the per-sample gradients at ``alpha_pilot``
    (zero by default)."""
    if alpha_pilot is None:
        alpha_pilot = np.zeros(obj.dim)
    rows = per_sample_gradients(obj, alpha_pilot)
    sigma = math.sqrt(float(rows.var(axis=0).max()))
    return 2.0 * sigma * (math.sqrt(2.0 * math.log(obj.dim) / obj.n) + delta)


@dataclass
class DiffParamFit:
    """Fitted ``d/dt theta(t)`` plus what is needed to reproduce it."""

    param: DiffParam
    lam: float
    support: np.ndarray
    converged: bool
    objective: float
    ridge: float = 0.0
    objective_model: GeneralObjective | None = field(default=None, repr=False)

    @property
    def alpha(self) -> np.ndarray:
        return self.param.alpha

    def to_dict(self) -> dict:
        return {
            "basis": self.param.basis.describe(),
            "alpha": self.param.alpha.tolist(),
            "lambda": self.lam,
            "support": self.support.tolist(),
            "converged": self.converged,
            "objective": self.objective,
            "ridge": self.ridge,
        }


def fit_diff_param(
    dataset: TimedDataset,
    fmap: FeatureMap,
    basis: TimeBasis,
    w: WeightFunction = WeightFunction(),
    condexp=None,
    lam: float = 0.0,
    cfg: LassoConfig = LassoConfig(),
) -> DiffParamFit:
    """Lasso fit for ``lam > 0``; closed form (ridge on failure) at ``lam == 0``."""
    gen = build_objective_general(dataset, fmap, basis, w, condexp)
    quad = gen.quad
    ridge = 0.0
    if lam == 0.0:
        try:
            v = closed_form_minimizer(quad)
        except SingularSystemError:
            ridge = max(default_ridge(quad), 1e-300)
            logger.warning("singular objective, refitting with ridge %.3g", ridge)
            v = closed_form_minimizer(quad, ridge)
        converged, value = True, quad.value(v)
    else:
        sol = lasso_minimize(quad, _with_lambda(cfg, lam))
        v, converged, value = sol.alpha_hat, sol.converged, sol.objective
    alpha = gen.unflatten(v)
    support = np.flatnonzero(np.any(alpha != 0, axis=0))
    return DiffParamFit(DiffParam(alpha, basis), float(lam), support, converged, float(value), ridge, gen)
