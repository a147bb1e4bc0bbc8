"""Shared data structures for threshold-indexed CDF regression.

The estimators in this package all work on the same raw material: a sample
of responses, an evaluation grid of thresholds, and the matrix of indicator
targets ``w[i, k] = 1{y_i <= t_k}``.  Fitting happens column by column
(one projection problem per threshold), so everything downstream consumes
an (n, m) layout with units on the rows and thresholds on the columns.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np


@dataclass(frozen=True)
class ThresholdGrid:
    """Strictly increasing evaluation thresholds t_1 < ... < t_m."""

    points: np.ndarray
    kind: str = "explicit"

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        if pts.ndim != 1 or pts.size == 0:
            raise ValueError("grid needs a nonempty 1-D array of thresholds")
        if not np.all(np.isfinite(pts)):
            raise ValueError("grid thresholds must be finite")
        if pts.size > 1 and not np.all(np.diff(pts) > 0):
            raise ValueError("grid thresholds must be strictly increasing")
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)

    @property
    def m(self) -> int:
        return self.points.size

    def __len__(self) -> int:
        return self.points.size


def make_grid(lo: float, hi: float, m: int) -> ThresholdGrid:
    """Evenly spaced grid of m thresholds spanning [lo, hi] inclusive.

    Requires lo < hi and m >= 2 so the spacing is well defined.
    """
    if not (np.isfinite(lo) and np.isfinite(hi)):
        raise ValueError("grid endpoints must be finite")
    if not lo < hi:
        raise ValueError(f"need lo < hi, got [{lo}, {hi}]")
    if m < 2:
        raise ValueError(f"need at least 2 grid points, got {m}")
    return ThresholdGrid(np.linspace(lo, hi, m), kind="even")


def explicit_grid(points) -> ThresholdGrid:
    return ThresholdGrid(np.asarray(points, dtype=float), kind="explicit")


@dataclass(frozen=True)
class Sample:
    """Observed responses y (n,) with optional covariates x (n, d)."""

    y: np.ndarray
    x: Optional[np.ndarray] = None

    def __post_init__(self):
        y = np.asarray(self.y, dtype=float)
        if y.ndim != 1 or y.size == 0:
            raise ValueError("y must be a nonempty 1-D array")
        if not np.all(np.isfinite(y)):
            raise ValueError("y must be finite")
        object.__setattr__(self, "y", y)
        if self.x is not None:
            x = np.asarray(self.x, dtype=float)
            if x.ndim != 2 or x.shape[0] != y.size:
                raise ValueError("x must be (n, d) aligned with y")
            if not np.all(np.isfinite(x)):
                raise ValueError("x must be finite")
            object.__setattr__(self, "x", x)

    @property
    def n(self) -> int:
        return self.y.size


@dataclass(frozen=True)
class IndicatorMatrix:
    """Per-threshold 0/1 targets: w[i, k] = 1{y_i <= t_k}."""

    w: np.ndarray
    grid: ThresholdGrid

    def __post_init__(self):
        w = np.asarray(self.w, dtype=float)
        if w.ndim != 2 or w.shape[1] != self.grid.m:
            raise ValueError("w must be (n, m) matching the grid")
        object.__setattr__(self, "w", w)

    @property
    def n(self) -> int:
        return self.w.shape[0]


def indicators(sample: Sample, grid: ThresholdGrid) -> IndicatorMatrix:
    """Build the (n, m) indicator matrix for a sample on a grid.

    Columns are nondecreasing in k for every unit because the events
    {y_i <= t_k} are nested as t grows.
    """
    w = (sample.y[:, None] <= grid.points[None, :]).astype(float)
    return IndicatorMatrix(w, grid)


def difference(theta: np.ndarray, order: int) -> np.ndarray:
    """r-fold first-difference D^(r) theta, length n - r.

    order = 0 returns the input unchanged (as a copy).
    """
    theta = np.asarray(theta, dtype=float)
    if theta.ndim != 1:
        raise ValueError("difference expects a 1-D vector")
    if order < 0:
        raise ValueError("difference order must be >= 0")
    if theta.size <= order:
        raise ValueError(
            f"vector of length {theta.size} too short for order-{order} differences"
        )
    if order == 0:
        return theta.copy()
    return np.diff(theta, n=order)


def total_variation(theta: np.ndarray, order: int) -> float:
    """Scaled higher-order total variation n^(order-1) * ||D^(order) theta||_1.

    The n^(order-1) factor makes the value comparable across sample sizes;
    order = 1 is the plain sum of absolute successive changes.
    """
    if order < 1:
        raise ValueError("total_variation needs order >= 1")
    theta = np.asarray(theta, dtype=float)
    d = difference(theta, order)
    return float(theta.size ** (order - 1) * np.abs(d).sum())


def count_increases(theta: np.ndarray, tol: float = 1e-9) -> int:
    """Number of strict increases theta[i+1] - theta[i] > tol."""
    theta = np.asarray(theta, dtype=float)
    if theta.size < 2:
        return 0
    return int(np.count_nonzero(np.diff(theta) > tol))


@dataclass(frozen=True)
class CdfEstimate:
    """Fitted CDF values (n, m): rows are units, columns grid thresholds.

    raw=True marks unconstrained penalized output that may leave [0, 1]
    (trend filtering before clamping); everything else must sit in the unit
    interval up to round-off.
    """

    values: np.ndarray
    grid: ThresholdGrid
    raw: bool = False
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim != 2 or v.shape[1] != self.grid.m:
            raise ValueError("values must be (n, m) matching the grid")
        if not np.all(np.isfinite(v)):
            raise ValueError("estimate values must be finite")
        if not self.raw:
            if v.min() < -1e-9 or v.max() > 1 + 1e-9:
                raise ValueError(
                    "non-raw estimate leaves [0, 1]; clamp first or mark raw=True"
                )
        object.__setattr__(self, "values", v)

    @property
    def n(self) -> int:
        return self.values.shape[0]


@dataclass(frozen=True)
class TrueCdf:
    """Oracle conditional CDFs for a generated sample.

    fn(units, ts) evaluates F*_i(t) for integer unit rows and threshold
    values, returning a (len(units), len(ts)) matrix.
    """

    fn: Callable[[np.ndarray, np.ndarray], np.ndarray]
    n: int

    def matrix(self, units, ts) -> np.ndarray:
        units = np.atleast_1d(np.asarray(units, dtype=int))
        ts = np.atleast_1d(np.asarray(ts, dtype=float))
        if units.size and (units.min() < 0 or units.max() >= self.n):
            raise ValueError("unit index out of range")
        out = np.asarray(self.fn(units, ts), dtype=float)
        if out.shape != (units.size, ts.size):
            raise ValueError("oracle returned wrong shape")
        return out

    def unit_function(self, i: int) -> Callable[[np.ndarray], np.ndarray]:
        """Single-unit CDF t -> F*_i(t) as a plain callable."""

        def f(ts):
            ts = np.atleast_1d(np.asarray(ts, dtype=float))
            return self.matrix([i], ts)[0]

        return f
