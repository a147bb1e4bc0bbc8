"""Distributional accuracy scores.

Everything is quadratic distance between CDF curves.  On a fixed threshold
grid the integrated score per unit is the grid average of squared pointwise
differences (a Riemann sum up to the constant grid spacing); CRPS averages
it over units, MSD takes the worst threshold of the unit-averaged squared
difference.  crps_continuous evaluates the integral itself by a midpoint
rule on a fine grid, for comparing step-function estimates against smooth
reference CDFs off the grid.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


def _paired(values, reference):
    a = np.atleast_2d(np.asarray(values, dtype=float))
    b = np.atleast_2d(np.asarray(reference, dtype=float))
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")
    if a.size == 0:
        raise ValueError("empty inputs")
    if not (np.all(np.isfinite(a)) and np.all(np.isfinite(b))):
        raise ValueError("inputs must be finite")
    return a, b


def crps_grid(values, reference) -> float:
    """Mean over units of the grid-averaged squared CDF difference.

    Identical inputs give exactly 0.0.
    """
    a, b = _paired(values, reference)
    d = a - b
    return float(np.mean(np.mean(d * d, axis=1)))


def msd_grid(values, reference) -> float:
    """Worst threshold of the unit-averaged squared CDF difference."""
    a, b = _paired(values, reference)
    d = a - b
    return float(np.max(np.mean(d * d, axis=0)))


def per_threshold_mse(values, reference) -> np.ndarray:
    """Unit-averaged squared difference at each grid threshold, shape (m,)."""
    a, b = _paired(values, reference)
    d = a - b
    return np.mean(d * d, axis=0)


@dataclass(frozen=True)
class MetricReport:
    crps: float
    msd: float
    per_threshold: np.ndarray


def evaluate_grid(values, reference) -> MetricReport:
    """All grid scores in one pass."""
    curve = per_threshold_mse(values, reference)
    a, b = _paired(values, reference)
    d = a - b
    return MetricReport(crps=float(np.mean(np.mean(d * d, axis=1))),
                        msd=float(curve.max()),
                        per_threshold=curve)


def crps_continuous(f, g, lo: float, hi: float, fine_m: int = 10_000) -> float:
    """Midpoint-rule integral of (f(t) - g(t))^2 over [lo, hi].

    f and g are vectorized callables (step-function evaluators, oracle
    CDFs).  The interval should cover the region where the two curves
    disagree; outside it both are 0 or 1 and contribute nothing.
    """
    if not lo < hi:
        raise ValueError("need lo < hi")
    if fine_m < 1:
        raise ValueError("fine_m must be positive")
    width = (hi - lo) / fine_m
    ts = lo + (np.arange(fine_m) + 0.5) * width
    diff = np.asarray(f(ts), dtype=float) - np.asarray(g(ts), dtype=float)
    return float(np.sum(diff * diff) * width)
