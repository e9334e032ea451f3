"""Debiased estimates, standard errors, confidence intervals and tests for
individual coordinates of the differential parameter."""

from __future__ import annotations

import json
import logging
import math
from dataclasses import asdict, dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy import stats

from .condexp import CondExpConfig, estimate_cond_exp
from .model import FeatureMap, TimedDataset, WeightFunction
from .parallel import map_ordered
from .objective import QuadraticObjective, build_objective, per_sample_gradients
from .solver import LassoConfig, default_lambdas, lasso_minimize, solve_inverse_hessian_column

logger = logging.getLogger(__name__)

SIGMA_FLOOR = 1e-12


def debias(alpha_hat, omega_j, grad_at_hat, j: int) -> float:
    """One Newton step for coordinate ``j``: ``alpha_hat[j] - omega_j' grad``."""
    alpha_hat = np.asarray(alpha_hat, dtype=float)
    omega_j = np.asarray(omega_j, dtype=float)
    grad_at_hat = np.asarray(grad_at_hat, dtype=float)
    if not (np.all(np.isfinite(alpha_hat)) and np.all(np.isfinite(omega_j)) and np.all(np.isfinite(grad_at_hat))):
        raise ValueError("debias inputs must be finite")
    return float(alpha_hat[j] - omega_j @ grad_at_hat)


def empirical_gradient_covariance(psg) -> np.ndarray:
    """Centered covariance of the rows of ``psg`` with 1/n normalisation."""
    psg = np.asarray(psg, dtype=float)
    if psg.ndim != 2 or psg.shape[0] < 2:
        raise ValueError("need at least two per-sample gradient rows")
    centered = psg - psg.mean(axis=0)
    S = centered.T @ centered / psg.shape[0]
    return 0.5 * (S + S.T)


def sigma_hat(omega_j, Sigma_hat) -> tuple[float, bool]:
    """``sqrt(omega' Sigma omega)`` and whether the 1e-12 floor was applied."""
    omega_j = np.asarray(omega_j, dtype=float)
    return _root_with_floor(float(omega_j @ np.asarray(Sigma_hat, dtype=float) @ omega_j))


def _root_with_floor(q: float) -> tuple[float, bool]:
    if q < -1e-10:
        raise ValueError(f"negative variance {q:.3g}: covariance estimate is not PSD")
    s = math.sqrt(max(q, 0.0))
    if s < SIGMA_FLOOR:
        return SIGMA_FLOOR, True
    return s, False


def _sigma_from_rows(omega_j, centered_rows) -> float:
    # omega' S omega without forming S: mean of squared projections.
    proj = centered_rows @ omega_j
    return float(proj @ proj) / centered_rows.shape[0]


@dataclass
class TargetResult:
    feature_index: int
    edge: Optional[tuple[int, int]]
    alpha_hat: float
    alpha_tilde: float
    sigma_hat: float
    z: float
    ci: tuple[float, float]
    reject: bool
    lambda_j: float
    omega_converged: bool = True
    sigma_clamped: bool = False


@dataclass
class InferenceReport:
    n: int
    k: int
    lambda_lasso: float
    level: float
    results: list[TargetResult]
    alpha_hat: np.ndarray = field(repr=False)
    lasso_converged: bool = True
    warnings: list[str] = field(default_factory=list)

    def by_index(self, j: int) -> TargetResult:
        for r in self.results:
            if r.feature_index == j:
                return r
        raise KeyError(j)

    def to_dict(self) -> dict:
        rows = []
        for r in self.results:
            d = asdict(r)
            d["edge"] = list(r.edge) if r.edge is not None else None
            d["ci"] = list(r.ci)
            rows.append(d)
        return {
            "metadata": {
                "n": self.n,
                "k": self.k,
                "lambda_lasso": self.lambda_lasso,
                "level": self.level,
                "lasso_converged": self.lasso_converged,
                "warnings": list(self.warnings),
            },
            "results": rows,
        }

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), **kw)


def _resolve_lambdas(lambdas, n, k, targets):
    default_fit, default_col = default_lambdas(n, k)
    if lambdas is None:
        return default_fit, np.full(len(targets), default_col)
    lam_fit, lam_col = lambdas
    lam_fit = default_fit if lam_fit is None else float(lam_fit)
    if lam_col is None:
        lam_col = default_col
    lam_col = np.broadcast_to(np.asarray(lam_col, dtype=float), (len(targets),)).copy()
    return lam_fit, lam_col


def run_pipeline(
    dataset: TimedDataset,
    fmap: FeatureMap,
    w: WeightFunction = WeightFunction(),
    condexp_cfg: Optional[CondExpConfig] = None,
    lambdas=None,
    targets: Optional[Sequence[int]] = None,
    delta: float = 0.05,
    solver_cfg: LassoConfig = LassoConfig(),
    threads: int = 1,
    objective: Optional[QuadraticObjective] = None,
) -> InferenceReport:
    """Fit, debias and test the linear-basis coefficients.

    ``lambdas`` is ``(lambda_fit, lambda_cols)``; either entry may be None
    for the default, and ``lambda_cols`` may be a scalar or one value per
    target.  ``targets`` defaults to every coordinate when ``d <= 30``.
    A prebuilt ``objective`` skips the conditional-mean and assembly steps.
    """
    if not 0 < delta < 1:
        raise ValueError("delta must lie in (0, 1)")
    if objective is None:
        F = fmap.transform(dataset.obs)
        est = estimate_cond_exp(dataset, F, condexp_cfg or CondExpConfig())
        objective = build_objective(dataset, fmap, w, est, features=F)
    obj = objective
    k = obj.dim
    if targets is None:
        if fmap.d > 30:
            raise ValueError("targets must be given explicitly when d > 30")
        targets = range(k)
    targets = [int(j) for j in targets]
    if any(not 0 <= j < k for j in targets):
        raise IndexError(f"targets must lie in [0, {k})")
    lam_fit, lam_cols = _resolve_lambdas(lambdas, obj.n, k, targets)

    fit = lasso_minimize(obj, LassoConfig(lam_fit, solver_cfg.max_iter, solver_cfg.tol, solver_cfg.step,
                                          solver_cfg.acceleration, solver_cfg.kkt_tol))
    warnings = []
    if not fit.converged:
        warnings.append(f"lasso did not converge (KKT gap {fit.final_subgradient_gap:.3g})")
    alpha_hat = fit.alpha_hat
    grad = obj.gradient(alpha_hat)
    rows = per_sample_gradients(obj, alpha_hat)
    if rows.shape[0] < 2:
        raise ValueError("need at least two samples for the variance estimate")
    centered = rows - rows.mean(axis=0)
    zq = float(stats.norm.ppf(1.0 - delta / 2.0))
    root_n = math.sqrt(obj.n)

    def work(item):
        j, lam_j = item
        col = solve_inverse_hessian_column(obj, j, lam_j, solver_cfg)
        omega = col.alpha_hat
        a_tilde = debias(alpha_hat, omega, grad, j)
        q = _sigma_from_rows(omega, centered)
        s, clamped = _root_with_floor(q)
        half = zq * s / root_n
        lo, hi = a_tilde - half, a_tilde + half
        return TargetResult(
            feature_index=j,
            edge=fmap.edge_of(j) if fmap.pairs is not None and obj.b == 1 else None,
            alpha_hat=float(alpha_hat[j]),
            alpha_tilde=a_tilde,
            sigma_hat=s,
            z=root_n * a_tilde / s,
            ci=(lo, hi),
            reject=not (lo <= 0.0 <= hi),
            lambda_j=float(lam_j),
            omega_converged=col.converged,
            sigma_clamped=clamped,
        )

    results = map_ordered(work, zip(targets, lam_cols), threads)
    for r in results:
        if not r.omega_converged:
            warnings.append(f"inverse-Hessian column {r.feature_index} did not converge")
        if r.sigma_clamped:
            warnings.append(f"sigma_hat for coordinate {r.feature_index} clamped at {SIGMA_FLOOR:g}")
    for msg in warnings:
        logger.warning(msg)
    return InferenceReport(obj.n, k, lam_fit, 1.0 - delta, results, alpha_hat, fit.converged, warnings)


def standardized_residuals(reports: Sequence[InferenceReport], alpha_star, j: int) -> np.ndarray:
    """``sqrt(n) (alpha_tilde_j - alpha*_j) / sigma_hat_j`` per replication.

    ``alpha_star`` is a scalar (shared truth) or one value per report.
    """
    if len(reports) < 2:
        raise ValueError("need at least two replications")
    truth = np.broadcast_to(np.asarray(alpha_star, dtype=float), (len(reports),))
    out = np.empty(len(reports))
    for r, (rep, a) in enumerate(zip(reports, truth)):
        res = rep.by_index(j)
        out[r] = math.sqrt(rep.n) * (res.alpha_tilde - a) / res.sigma_hat
    return out
