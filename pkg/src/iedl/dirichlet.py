"""Dirichlet distributions over the probability simplex.

Closed forms for the Fisher information matrix and its log-determinant,
KL divergence against the uniform Dirichlet, three entropy-style
uncertainty measures, moments, and a gamma-ratio sampler with a
Monte Carlo estimator of the information matrix for cross-checking.

Concentration parameters ``alpha`` are strictly positive with at least
two components.  Rowwise functions accept any shape ``(..., K)`` and
reduce over the last axis; matrix-valued functions take a single 1-D
``alpha``.
"""

from __future__ import annotations

import warnings

import numpy as np

from .specfun import digamma, log_gamma, tetragamma, trigamma

__all__ = [
    "mean",
    "belief_and_uncertainty",
    "covariance",
    "fim",
    "log_det_fim",
    "grad_log_det_fim",
    "fim_monte_carlo",
    "sample",
    "kl_to_uniform",
    "expected_entropy",
    "mutual_information",
    "differential_entropy",
]

# Floor for the determinant-lemma factor 1 - psi1(a0) sum(1/psi1(a_k)).
# Mathematically the factor is strictly positive; at extreme alpha it can
# underflow, and flooring keeps log_det_fim finite with zero slope.
DET_FACTOR_FLOOR = 1e-15


def _as_alpha(alpha, name, matrix=False):
    arr = np.asarray(alpha, dtype=np.float64)
    if matrix and arr.ndim != 1:
        raise ValueError(f"{name}: alpha must be 1-D, got shape {arr.shape}")
    if arr.ndim < 1 or arr.shape[-1] < 2:
        raise ValueError(f"{name}: alpha needs at least 2 components")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name}: alpha must be finite")
    if np.any(arr <= 0.0):
        raise ValueError(f"{name}: alpha must be strictly positive")
    return arr


def _rowwise_scalar(out, alpha):
    if np.ndim(alpha) == 1:
        return float(out)
    return out


def mean(alpha):
    """Expected probability vector alpha / alpha0, shape (..., K)."""
    a = _as_alpha(alpha, "mean")
    return a / a.sum(axis=-1, keepdims=True)


def belief_and_uncertainty(alpha):
    """Subjective-logic split of alpha with all alpha_k >= 1.

    Returns ``(belief, uncertainty)`` where belief_k = (alpha_k - 1)/alpha0
    and uncertainty = K/alpha0; the two sum to one.
    """
    a = _as_alpha(alpha, "belief_and_uncertainty")
    if np.any(a < 1.0):
        raise ValueError("belief_and_uncertainty: requires alpha_k >= 1")
    a0 = a.sum(axis=-1)
    k = a.shape[-1]
    belief = (a - 1.0) / a0[..., np.newaxis]
    return belief, _rowwise_scalar(k / a0, alpha)


def covariance(alpha):
    """Covariance matrix of the Dirichlet probability vector, shape (K, K)."""
    a = _as_alpha(alpha, "covariance", matrix=True)
    a0 = a.sum()
    denom = a0 * a0 * (a0 + 1.0)
    return (np.diag(a) * a0 - np.outer(a, a)) / denom


def fim(alpha):
    """Fisher information matrix diag(psi1(alpha)) - psi1(alpha0), shape (K, K)."""
    a = _as_alpha(alpha, "fim", matrix=True)
    return np.diag(trigamma(a)) - trigamma(float(a.sum()))


def log_det_fim(alpha):
    """ln det of the Fisher information matrix, via the determinant lemma.

    ln|I| = sum_k ln psi1(alpha_k) + ln(1 - psi1(alpha0) sum_k 1/psi1(alpha_k)).
    The inner factor is floored at ``DET_FACTOR_FLOOR`` before the log.
    """
    a = _as_alpha(alpha, "log_det_fim")
    t = trigamma(a)
    t0 = trigamma(a.sum(axis=-1))
    factor = 1.0 - t0 * (1.0 / t).sum(axis=-1)
    out = np.log(t).sum(axis=-1) + np.log(np.maximum(factor, DET_FACTOR_FLOOR))
    return _rowwise_scalar(out, alpha)


def grad_log_det_fim(alpha):
    """Gradient of ``log_det_fim`` in alpha, shape (..., K).

    Where the determinant-lemma factor sits at its floor the floor is
    constant, so only the sum-of-logs part contributes slope there.
    """
    a = _as_alpha(alpha, "grad_log_det_fim")
    t = trigamma(a)
    p2 = tetragamma(a)
    a0 = a.sum(axis=-1, keepdims=True)
    t0 = trigamma(a0)
    p20 = tetragamma(a0)
    recip_sum = (1.0 / t).sum(axis=-1, keepdims=True)
    factor = 1.0 - t0 * recip_sum
    direct = p2 / t
    live = factor > DET_FACTOR_FLOOR
    safe_factor = np.where(live, factor, 1.0)
    through_factor = (-p20 * recip_sum + t0 * p2 / (t * t)) / safe_factor
    return direct + np.where(live, through_factor, 0.0)


def sample(alpha, rng, n=None):
    """Draw probability vectors by normalizing independent gamma variates.

    ``n=None`` gives one draw of shape (K,), otherwise shape (n, K).
    """
    a = _as_alpha(alpha, "sample", matrix=True)
    if not isinstance(rng, np.random.Generator):
        rng = np.random.default_rng(rng)
    rows = 1 if n is None else int(n)
    g = rng.gamma(a, 1.0, size=(rows, a.shape[0]))
    # Entire rows of zero gammas (possible for tiny alpha) cannot be
    # normalized; redraw them.
    for _ in range(100):
        bad = g.sum(axis=-1) == 0.0
        if not bad.any():
            break
        g[bad] = rng.gamma(a, 1.0, size=(int(bad.sum()), a.shape[0]))
    else:
        raise RuntimeError("sample: persistent gamma underflow")
    p = g / g.sum(axis=-1, keepdims=True)
    return p[0] if n is None else p


def fim_monte_carlo(alpha, n_samples=200_000, rng=0):
    """Monte Carlo estimate of the Fisher information matrix.

    Averages outer products of the score
    d/d alpha_k ln f(p) = psi(alpha0) - psi(alpha_k) + ln p_k
    over sampled probability vectors.  Returns ``(estimate, stderr)``,
    both (K, K); stderr is the entrywise standard error of the mean.
    Draws with underflowing probabilities are skipped and counted, with a
    warning once skips exceed 0.1% of the requested draws.
    """
    a = _as_alpha(alpha, "fim_monte_carlo", matrix=True)
    n_samples = int(n_samples)
    if n_samples < 1000:
        raise ValueError("fim_monte_carlo: needs at least 1000 samples")
    if not isinstance(rng, np.random.Generator):
        rng = np.random.default_rng(rng)
    k = a.shape[0]
    offset = digamma(float(a.sum())) - digamma(a)
    m1 = np.zeros((k, k))
    m2 = np.zeros((k, k))
    used = 0
    remaining = n_samples
    while remaining > 0:
        block = min(remaining, 1 << 17)
        remaining -= block
        g = rng.gamma(a, 1.0, size=(block, k))
        with np.errstate(invalid="ignore", divide="ignore"):
            p = g / g.sum(axis=1, keepdims=True)
            ok = np.all(p > 0.0, axis=1)
            scores = offset + np.log(p[ok])
        m1 += scores.T @ scores
        sq = scores * scores
        m2 += sq.T @ sq
        used += int(ok.sum())
    skipped = n_samples - used
    if skipped > 0.001 * n_samples:
        warnings.warn(
            f"fim_monte_carlo: skipped {skipped} of {n_samples} draws "
            "with underflowing probabilities"
        )
    if used == 0:
        raise RuntimeError("fim_monte_carlo: every draw underflowed")
    estimate = m1 / used
    second = m2 / used
    stderr = np.sqrt(np.maximum(second - estimate * estimate, 0.0) / used)
    return estimate, stderr


def kl_to_uniform(alpha):
    """KL(Dir(alpha) || Dir(1, ..., 1)), reduced over the last axis."""
    a = _as_alpha(alpha, "kl_to_uniform")
    a0 = a.sum(axis=-1, keepdims=True)
    k = a.shape[-1]
    out = (
        log_gamma(a0)[..., 0]
        - log_gamma(a).sum(axis=-1)
        - log_gamma(float(k))
        + ((a - 1.0) * (digamma(a) - digamma(a0))).sum(axis=-1)
    )
    return _rowwise_scalar(out, alpha)


def expected_entropy(alpha):
    """Mean Shannon entropy of probability vectors drawn from Dir(alpha)."""
    a = _as_alpha(alpha, "expected_entropy")
    a0 = a.sum(axis=-1, keepdims=True)
    out = -((a / a0) * (digamma(a + 1.0) - digamma(a0 + 1.0))).sum(axis=-1)
    return _rowwise_scalar(out, alpha)


def mutual_information(alpha):
    """Entropy of the mean minus expected entropy, in closed form.

    Measures disagreement between draws; zero in the limit of a point
    mass on the simplex, largest for spread-out densities.
    """
    a = _as_alpha(alpha, "mutual_information")
    a0 = a.sum(axis=-1, keepdims=True)
    ratio = a / a0
    out = -(ratio * (np.log(ratio) - digamma(a + 1.0) + digamma(a0 + 1.0))).sum(
        axis=-1
    )
    return _rowwise_scalar(out, alpha)


def differential_entropy(alpha):
    """Differential entropy of the Dirichlet density itself."""
    a = _as_alpha(alpha, "differential_entropy")
    a0 = a.sum(axis=-1)
    log_beta = log_gamma(a).sum(axis=-1) - log_gamma(a0)
    k = a.shape[-1]
    out = (
        log_beta
        + (a0 - k) * digamma(a0)
        - ((a - 1.0) * digamma(a)).sum(axis=-1)
    )
    return _rowwise_scalar(out, alpha)
