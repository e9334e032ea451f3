"""The time score matching objective.

With ``d/dt theta(t) = alpha.T dphi(t)`` the sample objective is exactly
quadratic in the flattened coefficients ``v``::

    L(v) = v' H v + 2 c' v
    H    = sum_i w_i g(t_i) z_i z_i'
    c    = sum_i w_i f(x_i) (x) [g'(t_i) dphi(t_i) + g(t_i) d2phi(t_i)]
    z_i  = (f(x_i) - E_hat[f | t_i]) (x) dphi(t_i)

where ``(x)`` is the Kronecker product and ``w_i`` are row weights (``1/n``
for paired data, ``1/(m n_j)`` for grouped data).  Flattening is
feature-major: ``v[j * b + l] == alpha[l, j]``.  For the linear basis
``b == 1`` and ``v`` is simply the length-k coefficient vector.

The constant that does not depend on the model is never computed.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
import scipy.linalg

from .condexp import CondExpConfig, CondExpEstimate, estimate_cond_exp
from .model import FeatureMap, TimeBasis, TimedDataset, WeightFunction


class SingularSystemError(np.linalg.LinAlgError):
    """Raised when ``H + ridge * I`` cannot be factorised."""


@dataclass(frozen=True)
class QuadraticObjective:
    H: np.ndarray
    c: np.ndarray
    n: int
    design: np.ndarray  # (n, p) rows z_i
    linear_rows: np.ndarray  # (n, p) rows whose weighted sum is c
    g: np.ndarray
    dg: np.ndarray
    row_weights: np.ndarray
    b: int = 1

    @property
    def dim(self) -> int:
        return len(self.c)

    @property
    def k(self) -> int:
        return self.dim // self.b

    @property
    def centered_features(self) -> np.ndarray:
        return self.design

    def value(self, v) -> float:
        v = np.asarray(v, dtype=float)
        return float(v @ self.H @ v + 2.0 * self.c @ v)

    def gradient(self, v) -> np.ndarray:
        return 2.0 * (self.H @ np.asarray(v, dtype=float)) + 2.0 * self.c

    def hessian(self) -> np.ndarray:
        return 2.0 * self.H


def _assemble(dataset, F, basis, w, means) -> QuadraticObjective:
    if means.shape != F.shape:
        raise ValueError(f"conditional means {means.shape} do not match features {F.shape}")
    t = dataset.times
    g = w.g(t)
    dg = w.dg(t)
    dphi = basis.dphi(t)
    d2phi = basis.d2phi(t)
    n, k = F.shape
    b = basis.b
    Ft = F - means
    design = (Ft[:, :, None] * dphi[:, None, :]).reshape(n, k * b)
    lin = (F[:, :, None] * (dg[:, None] * dphi + g[:, None] * d2phi)[:, None, :]).reshape(n, k * b)
    rw = dataset.row_weights()
    H = (design * (rw * g)[:, None]).T @ design
    H = 0.5 * (H + H.T)
    c = rw @ lin
    return QuadraticObjective(H, c, n, design, lin, g, dg, rw, b)


def _means_for(dataset, F, condexp):
    if condexp is None:
        condexp = estimate_cond_exp(dataset, F, CondExpConfig())
    if isinstance(condexp, CondExpConfig):
        condexp = estimate_cond_exp(dataset, F, condexp)
    if isinstance(condexp, CondExpEstimate):
        return condexp.means
    return np.asarray(condexp, dtype=float)


def build_objective(
    dataset: TimedDataset,
    fmap: FeatureMap,
    w: WeightFunction = WeightFunction(),
    condexp=None,
    features: Optional[np.ndarray] = None,
) -> QuadraticObjective:
    """Quadratic objective for the linear basis ``phi(t) = t``.

    ``condexp`` may be a :class:`CondExpEstimate`, a :class:`CondExpConfig`
    or ``None`` (default estimator for the layout).  Precomputed
    ``features`` skip re-evaluating ``fmap``.
    """
    F = fmap.transform(dataset.obs) if features is None else np.asarray(features, dtype=float)
    return _assemble(dataset, F, TimeBasis.linear(), w, _means_for(dataset, F, condexp))


class GeneralObjective:
    """Objective over a ``(b, k)`` coefficient matrix for an arbitrary basis."""

    def __init__(self, quad: QuadraticObjective, basis: TimeBasis):
        self.quad = quad
        self.basis = basis

    @property
    def shape(self) -> tuple[int, int]:
        return self.basis.b, self.quad.k

    def flatten(self, alpha) -> np.ndarray:
        alpha = np.asarray(alpha, dtype=float).reshape(self.shape)
        return alpha.T.ravel()

    def unflatten(self, v) -> np.ndarray:
        b, k = self.shape
        return np.asarray(v, dtype=float).reshape(k, b).T

    def value(self, alpha) -> float:
        return self.quad.value(self.flatten(alpha))

    def gradient(self, alpha) -> np.ndarray:
        return self.unflatten(self.quad.gradient(self.flatten(alpha)))

    def hvp(self, direction) -> np.ndarray:
        return self.unflatten(2.0 * self.quad.H @ self.flatten(direction))

    __call__ = value


def build_objective_general(
    dataset: TimedDataset,
    fmap: FeatureMap,
    basis: TimeBasis,
    w: WeightFunction = WeightFunction(),
    condexp=None,
    features: Optional[np.ndarray] = None,
) -> GeneralObjective:
    F = fmap.transform(dataset.obs) if features is None else np.asarray(features, dtype=float)
    quad = _assemble(dataset, F, basis, w, _means_for(dataset, F, condexp))
    return GeneralObjective(quad, basis)


def default_ridge(obj: QuadraticObjective) -> float:
    return 1e-10 * float(np.trace(obj.H)) / obj.dim


def closed_form_minimizer(obj: QuadraticObjective, ridge: float = 0.0) -> np.ndarray:
    """``argmin v'Hv + 2c'v = -(H + ridge I)^{-1} c``."""
    if ridge < 0:
        raise ValueError("ridge must be non-negative")
    A = obj.H + ridge * np.eye(obj.dim)
    try:
        cho = scipy.linalg.cho_factor(A, lower=True)
    except np.linalg.LinAlgError as exc:
        raise SingularSystemError(f"H + {ridge:g} I is not positive definite; retry with a ridge") from exc
    return -scipy.linalg.cho_solve(cho, obj.c)


def per_sample_gradients(obj: QuadraticObjective, alpha) -> np.ndarray:
    """Rows ``grad m(x_i, t_i)`` scaled so that their plain mean is the
    objective gradient (relevant for grouped data with unequal blocks)."""
    v = np.asarray(alpha, dtype=float).ravel()
    scale = obj.n * obj.row_weights
    proj = obj.design @ v
    rows = 2.0 * (obj.g * proj)[:, None] * obj.design + 2.0 * obj.linear_rows
    return rows * scale[:, None]
