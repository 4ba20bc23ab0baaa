"""Evidential classification losses over Dirichlet parameters.

The training objective for one example with concentration ``alpha`` and
one-hot target ``y`` is

    total = mse_part - lam1 * log_det + lam_t * kl

where ``mse_part`` is the expected squared error of the class-probability
vector under Dir(alpha), optionally weighted per class by the diagonal
Fisher information psi1(alpha_k); ``log_det`` is the log-determinant of
the Dirichlet Fisher information matrix (a density reward); and ``kl``
pulls the off-target concentrations toward the uniform Dirichlet.

``grad_total_loss`` returns the exact gradient in alpha, derived by hand
and cross-checked against central finite differences in the tests.

All functions accept a single example ``(K,)`` or a batch ``(B, K)`` and
reduce over the last axis.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import dirichlet
from .specfun import tetragamma, trigamma

__all__ = [
    "LossBreakdown",
    "edl_mse",
    "i_mse",
    "kl_regularizer",
    "total_loss",
    "grad_total_loss",
]


@dataclass(frozen=True)
class LossBreakdown:
    """Per-term view of the objective; ``total = i_mse - lam1*log_det + lam_t*kl``
    holds exactly for the coefficients passed to ``total_loss``.

    Fields are floats for a single example and arrays for a batch.  In the
    unweighted mode the ``i_mse`` slot holds the plain expected squared
    error.
    """

    i_mse: object
    log_det: object
    kl: object
    total: object

    def batch_mean(self):
        """Collapse batched fields to their means as plain floats."""
        return LossBreakdown(
            float(np.mean(self.i_mse)),
            float(np.mean(self.log_det)),
            float(np.mean(self.kl)),
            float(np.mean(self.total)),
        )


def _check_pair(alpha, y, name):
    a = np.asarray(alpha, dtype=np.float64)
    t = np.asarray(y, dtype=np.float64)
    if a.ndim < 1 or a.shape[-1] < 2:
        raise ValueError(f"{name}: alpha needs at least 2 components")
    if a.shape != t.shape:
        raise ValueError(
            f"{name}: alpha shape {a.shape} does not match target shape {t.shape}"
        )
    if not np.all(np.isfinite(a)) or np.any(a <= 0.0):
        raise ValueError(f"{name}: alpha must be finite and strictly positive")
    if not np.all((t == 0.0) | (t == 1.0)) or np.any(t.sum(axis=-1) != 1.0):
        raise ValueError(f"{name}: target must be one-hot rows")
    return a, t


def _squared_error_parts(a, t):
    """Residuals e, variances v, and the total concentration, all batched."""
    a0 = a.sum(axis=-1, keepdims=True)
    e = t - a / a0
    v = a * (a0 - a) / (a0 * a0 * (a0 + 1.0))
    return e, v, a0


def _reduce(values, alpha):
    if np.ndim(alpha) == 1:
        return float(values)
    return values


def edl_mse(alpha, y):
    """Expected squared error sum_k [(y_k - p_k)^2 + Var p_k] under Dir(alpha)."""
    a, t = _check_pair(alpha, y, "edl_mse")
    e, v, _ = _squared_error_parts(a, t)
    return _reduce((e * e + v).sum(axis=-1), alpha)


def i_mse(alpha, y, weights=None):
    """Expected squared error with per-class weights, default psi1(alpha_k).

    ``weights`` overrides the trigamma factors with fixed constants (all
    ones recovers ``edl_mse`` exactly); they must be positive, finite, and
    broadcastable to alpha's shape.
    """
    a, t = _check_pair(alpha, y, "i_mse")
    w = _resolve_weights(a, weights, "i_mse")
    e, v, _ = _squared_error_parts(a, t)
    return _reduce(((e * e + v) * w).sum(axis=-1), alpha)


def _resolve_weights(a, weights, name):
    if weights is None:
        return trigamma(a)
    w = np.asarray(weights, dtype=np.float64)
    if w.shape[-1:] != a.shape[-1:]:
        raise ValueError(f"{name}: weights last axis must have length {a.shape[-1]}")
    if not np.all(np.isfinite(w)) or np.any(w <= 0.0):
        raise ValueError(f"{name}: weights must be finite and positive")
    return np.broadcast_to(w, a.shape)


def kl_regularizer(alpha, y):
    """KL(Dir(alpha-with-target-clamped) || Dir(1, ..., 1)).

    The target class concentration is replaced by 1 so a confident correct
    prediction is not penalized; all remaining mass is pulled toward the
    uniform Dirichlet.
    """
    a, t = _check_pair(alpha, y, "kl_regularizer")
    clamped = a * (1.0 - t) + t
    return dirichlet.kl_to_uniform(clamped)


def _check_coefficients(lam1, lam_t):
    lam1 = float(lam1)
    lam_t = float(lam_t)
    if not np.isfinite(lam1) or lam1 < 0.0:
        raise ValueError(f"total_loss: lam1 must be >= 0, got {lam1}")
    if not np.isfinite(lam_t) or not 0.0 <= lam_t <= 1.0:
        raise ValueError(f"total_loss: lam_t must be in [0, 1], got {lam_t}")
    return lam1, lam_t


def total_loss(alpha, y, lam1, lam_t, fim_mse=True):
    """Full objective; ``fim_mse=False`` selects the unweighted squared error."""
    lam1, lam_t = _check_coefficients(lam1, lam_t)
    mse_part = i_mse(alpha, y) if fim_mse else edl_mse(alpha, y)
    log_det = dirichlet.log_det_fim(alpha)
    kl = kl_regularizer(alpha, y)
    return LossBreakdown(mse_part, log_det, kl, mse_part - lam1 * log_det + lam_t * kl)


def grad_total_loss(alpha, y, lam1, lam_t, fim_mse=True, weights=None):
    """Exact gradient of the per-example total loss in alpha, shape (..., K).

    With ``weights`` given (or ``fim_mse=False``) the squared-error weights
    are constants, so their trigamma curvature term drops out; the two
    routes then produce identical gradients when the weights are all one.
    """
    lam1, lam_t = _check_coefficients(lam1, lam_t)
    a, t = _check_pair(alpha, y, "grad_total_loss")
    if not fim_mse and weights is not None:
        raise ValueError("grad_total_loss: weights apply only to the weighted form")

    if fim_mse and weights is None:
        w = trigamma(a)
        dw = tetragamma(a)
    else:
        w = np.ones_like(a) if weights is None else _resolve_weights(a, weights, "grad_total_loss")
        dw = None

    e, v, a0 = _squared_error_parts(a, t)
    denom = a0 * a0 * (a0 + 1.0)
    ddenom = 3.0 * a0 * a0 + 2.0 * a0

    weighted_residual = (w * e * a).sum(axis=-1, keepdims=True)
    grad_sq = 2.0 * weighted_residual / (a0 * a0) - 2.0 * w * e / a0

    weighted_alpha = (w * a).sum(axis=-1, keepdims=True)
    weighted_var_num = (w * a * (a0 - a)).sum(axis=-1, keepdims=True)
    grad_var = (weighted_alpha + w * (a0 - 2.0 * a)) / denom
    grad_var -= weighted_var_num * ddenom / (denom * denom)

    grad = grad_sq + grad_var
    if dw is not None:
        grad += (e * e + v) * dw

    if lam1 != 0.0:
        grad -= lam1 * dirichlet.grad_log_det_fim(a)

    if lam_t != 0.0:
        clamped = a * (1.0 - t) + t
        c0 = clamped.sum(axis=-1, keepdims=True)
        k = a.shape[-1]
        kl_grad = (clamped - 1.0) * trigamma(clamped) - trigamma(c0) * (c0 - k)
        grad += lam_t * kl_grad * (1.0 - t)

    return grad
