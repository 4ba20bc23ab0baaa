"""Log-gamma and polygamma functions of orders 0 through 2, for positive reals.

All four functions share one evaluation scheme: if the argument is below a
cutoff, shift it upward with the recurrence for that function, then evaluate
an asymptotic Bernoulli-number series at the shifted point and undo the
shift.  The series are truncated where the next term is far below the
accuracy targets (1e-12 relative for ``log_gamma``, 1e-10 absolute for
``digamma`` and ``trigamma``, 1e-8 absolute for ``tetragamma``).

Every function accepts a float or an ndarray of floats and returns the same
shape; scalar in, Python float out.  Arguments must be positive and finite,
otherwise ``ValueError`` is raised.
"""

from __future__ import annotations

import math

import numpy as np

__all__ = ["log_gamma", "digamma", "trigamma", "tetragamma"]

# Below these the asymptotic series are not trustworthy; shift up first.
_POLY_CUTOFF = 6.0
_LGAMMA_CUTOFF = 10.0

_HALF_LOG_TWO_PI = 0.5 * math.log(2.0 * math.pi)

# Stirling series for log Gamma: coefficients of x^-(2k-1), i.e.
# B_{2k} / (2k (2k-1)) for k = 1..7.
_LGAMMA_COEFFS = (
    1.0 / 12.0,
    -1.0 / 360.0,
    1.0 / 1260.0,
    -1.0 / 1680.0,
    1.0 / 1188.0,
    -691.0 / 360360.0,
    1.0 / 156.0,
)

# psi(x) ~ ln x - 1/(2x) - sum_k B_{2k}/(2k) x^-2k, k = 1..7.
_DIGAMMA_COEFFS = (
    1.0 / 12.0,
    -1.0 / 120.0,
    1.0 / 252.0,
    -1.0 / 240.0,
    1.0 / 132.0,
    -691.0 / 32760.0,
    1.0 / 12.0,
)

# psi1(x) ~ 1/x + 1/(2x^2) + sum_k B_{2k} x^-(2k+1), k = 1..7.
_TRIGAMMA_COEFFS = (
    1.0 / 6.0,
    -1.0 / 30.0,
    1.0 / 42.0,
    -1.0 / 30.0,
    5.0 / 66.0,
    -691.0 / 2730.0,
    7.0 / 6.0,
)

# psi2(x) ~ -1/x^2 - 1/x^3 - sum_k (2k+1) B_{2k} x^-(2k+2), k = 1..7.
_TETRAGAMMA_COEFFS = (
    3.0 / 6.0,
    -5.0 / 30.0,
    7.0 / 42.0,
    -9.0 / 30.0,
    55.0 / 66.0,
    -8983.0 / 2730.0,
    105.0 / 6.0,
)


def _validate(x, name):
    """Coerce to a float64 array; reject non-positive or non-finite entries."""
    arr = np.asarray(x, dtype=np.float64)
    if arr.size == 0:
        raise ValueError(f"{name}: empty argument")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name}: argument must be finite")
    if np.any(arr <= 0.0):
        bad = float(np.min(arr))
        raise ValueError(f"{name}: argument must be positive, got {bad}")
    return arr


def _maybe_scalar(out, x):
    if np.ndim(x) == 0:
        return float(out)
    return out


def _shift_up(arr, cutoff, step_term):
    """Shift all entries above ``cutoff``, accumulating recurrence terms.

    ``step_term(v)`` is the contribution of one unit shift evaluated at v.
    Returns the shifted array and the accumulated correction (same shape).
    """
    shifted = arr.copy()
    acc = np.zeros_like(shifted)
    mask = shifted < cutoff
    while mask.any():
        acc[mask] += step_term(shifted[mask])
        shifted[mask] += 1.0
        mask = shifted < cutoff
    return shifted, acc


def _even_powers_series(x, coeffs):
    """Horner evaluation of sum_k coeffs[k-1] * x^-2k."""
    inv2 = 1.0 / (x * x)
    total = np.zeros_like(x)
    for c in reversed(coeffs):
        total = (total + c) * inv2
    return total


def log_gamma(x):
    """Natural log of the Gamma function, ln G(x), for x > 0.

    Exactly 0.0 at x = 1 and x = 2.
    """
    arr = _validate(x, "log_gamma")
    shifted, acc = _shift_up(arr, _LGAMMA_CUTOFF, np.log)
    series = _even_powers_series(shifted, _LGAMMA_COEFFS) * shifted
    out = (shifted - 0.5) * np.log(shifted) - shifted + _HALF_LOG_TWO_PI + series
    out -= acc
    exact_zero = (arr == 1.0) | (arr == 2.0)
    if exact_zero.any():
        out = np.where(exact_zero, 0.0, out)
    return _maybe_scalar(out, x)


def digamma(x):
    """psi(x) = d/dx ln G(x) for x > 0."""
    arr = _validate(x, "digamma")
    shifted, acc = _shift_up(arr, _POLY_CUTOFF, lambda v: 1.0 / v)
    out = (
        np.log(shifted)
        - 0.5 / shifted
        - _even_powers_series(shifted, _DIGAMMA_COEFFS)
    )
    out -= acc
    return _maybe_scalar(out, x)


def trigamma(x):
    """psi1(x) = d^2/dx^2 ln G(x) for x > 0.  Always positive."""
    arr = _validate(x, "trigamma")
    shifted, acc = _shift_up(arr, _POLY_CUTOFF, lambda v: 1.0 / (v * v))
    out = (
        1.0 / shifted
        + 0.5 / (shifted * shifted)
        + _even_powers_series(shifted, _TRIGAMMA_COEFFS) / shifted
    )
    out += acc
    return _maybe_scalar(out, x)


def tetragamma(x):
    """psi2(x) = d^3/dx^3 ln G(x) for x > 0.  Always negative."""
    arr = _validate(x, "tetragamma")
    shifted, acc = _shift_up(arr, _POLY_CUTOFF, lambda v: 2.0 / (v * v * v))
    inv = 1.0 / shifted
    inv2 = inv * inv
    out = -inv2 - inv2 * inv - _even_powers_series(shifted, _TETRAGAMMA_COEFFS) * inv2
    out -= acc
    return _maybe_scalar(out, x)
