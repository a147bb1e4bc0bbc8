"""Scalar distribution kernels used by the scenario oracles.

The normal CDF rides on the double-precision rational erf approximation
(|error| below 1e-15 over the real line).  The regularized lower incomplete
gamma function is written out here: power series on x < a + 1, Lentz-style
continued fraction otherwise, iterated to ~1e-14 relative accuracy, which
covers gamma and chi-square CDFs for any positive (possibly non-integer)
shape.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.special import erf

_EPS = 1e-15
_MAX_ITER = 800
_TINY = 1e-300


def normal_cdf(x):
    """Standard normal CDF Phi(x), vectorized, accurate to ~1e-15."""
    x = np.asarray(x, dtype=float)
    return 0.5 * (1.0 + erf(x / math.sqrt(2.0)))


def _lower_gamma_series(a: float, x: float) -> float:
    # P(a, x) = x^a e^-x / Gamma(a) * sum_{k>=0} x^k / (a (a+1) ... (a+k))
    term = 1.0 / a
    total = term
    denom = a
    for _ in range(_MAX_ITER):
        denom += 1.0
        term *= x / denom
        total += term
        if abs(term) < abs(total) * _EPS:
            break
    log_front = a * math.log(x) - x - math.lgamma(a)
    return total * math.exp(log_front)


def _upper_gamma_cf(a: float, x: float) -> float:
    # Q(a, x) via the Lentz continued fraction; returns the upper tail.
    b = x + 1.0 - a
    c = 1.0 / _TINY
    d = 1.0 / b
    h = d
    for i in range(1, _MAX_ITER + 1):
        an = -i * (i - a)
        b += 2.0
        d = an * d + b
        if abs(d) < _TINY:
            d = _TINY
        c = b + an / c
        if abs(c) < _TINY:
            c = _TINY
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _EPS:
            break
    log_front = a * math.log(x) - x - math.lgamma(a)
    return h * math.exp(log_front)


def _reg_lower_gamma_scalar(a: float, x: float) -> float:
    if not a > 0:
        raise ValueError("shape parameter must be positive")
    if math.isnan(x):
        return math.nan
    if x <= 0:
        return 0.0
    if x < a + 1.0:
        p = _lower_gamma_series(a, x)
    else:
        p = 1.0 - _upper_gamma_cf(a, x)
    # round-off can push the result a hair outside [0, 1]
    return min(1.0, max(0.0, p))


_reg_lower_gamma_vec = np.vectorize(_reg_lower_gamma_scalar, otypes=[float])


def regularized_lower_gamma(a, x):
    """P(a, x) = gamma(a, x) / Gamma(a), elementwise over broadcastable inputs."""
    out = _reg_lower_gamma_vec(a, x)
    if np.ndim(out) == 0:
        return float(out)
    return out


def gamma_cdf(t, shape, scale):
    """CDF of Gamma(shape, scale) at t (zero for t <= 0)."""
    if np.any(np.asarray(scale, dtype=float) <= 0):
        raise ValueError("scale must be positive")
    t = np.asarray(t, dtype=float)
    return regularized_lower_gamma(shape, t / scale)


def chi2_cdf(t, df):
    """CDF of chi-square with df degrees of freedom (df > 0, non-integer ok)."""
    return regularized_lower_gamma(np.asarray(df, dtype=float) / 2.0,
                                   np.asarray(t, dtype=float) / 2.0)
