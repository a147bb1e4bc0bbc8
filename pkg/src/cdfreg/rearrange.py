"""Monotone rearrangement of per-threshold CDF estimates.

Per-threshold fitting gives no guarantee that t -> F_hat_i(t) is a CDF: the
curve can dip.  The correction here rebuilds each unit's curve as the
nondecreasing step function that takes the same values on intervals of the
same total length (a mass-preserving sort along the threshold axis):

  * clamp the fitted values to [0, 1];
  * read the clamped curve at the sample's order statistics y_(1) < ... <
    y_(n); between consecutive order statistics the estimate is the step
    level a_j = F_hat_i(y_(j)) on [y_(j), y_(j+1));
  * sort the levels descending and reassign them to intervals from the
    right end y_(n) backwards, each keeping its own interval length;
  * below the smallest reassigned breakpoint the curve is 0, from y_(n)
    on it is 1.

Sorting never increases the integrated squared distance to any fixed CDF,
so the corrected curve is at least as good under the integrated quadratic
score as the clamped original.

Duplicate sample values make the interval lengths ambiguous and are
rejected; break exact ties first (dataio has a jitter utility).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import CdfEstimate


def clamp_unit(est: CdfEstimate) -> CdfEstimate:
    """Clip estimate values into [0, 1]; output is no longer raw."""
    vals = np.clip(est.values, 0.0, 1.0)
    return CdfEstimate(vals, est.grid, raw=False, meta=dict(est.meta, clamped=True))


@dataclass(frozen=True)
class StepCdf:
    """Right-continuous step function: 0 left of the first breakpoint,
    levels[k] on [breakpoints[k], breakpoints[k+1]), levels[-1] from the
    last breakpoint on."""

    breakpoints: np.ndarray
    levels: np.ndarray

    def __post_init__(self):
        b = np.asarray(self.breakpoints, dtype=float)
        lv = np.asarray(self.levels, dtype=float)
        if b.ndim != 1 or b.size == 0 or lv.shape != b.shape:
            raise ValueError("breakpoints and levels must be matching 1-D arrays")
        if b.size > 1 and not np.all(np.diff(b) > 0):
            raise ValueError("breakpoints must be strictly increasing")
        if lv.min() < -1e-12 or lv.max() > 1 + 1e-12:
            raise ValueError("levels must lie in [0, 1]")
        b.setflags(write=False)
        lv.setflags(write=False)
        object.__setattr__(self, "breakpoints", b)
        object.__setattr__(self, "levels", lv)

    def evaluate(self, ts) -> np.ndarray:
        """Right-continuous evaluation at arbitrary points."""
        ts = np.atleast_1d(np.asarray(ts, dtype=float))
        idx = np.searchsorted(self.breakpoints, ts, side="right") - 1
        out = np.where(idx < 0, 0.0, self.levels[np.clip(idx, 0, None)])
        return out

    @property
    def is_nondecreasing(self) -> bool:
        return bool(np.all(np.diff(self.levels) >= -1e-12))

    def level_lengths(self):
        """(level, interval length) pairs over the bounded intervals.

        The last breakpoint opens an unbounded interval and is excluded.
        """
        widths = np.diff(self.breakpoints)
        return list(zip(self.levels[:-1].tolist(), widths.tolist()))


def _check_sorted_unique(y: np.ndarray) -> np.ndarray:
    y = np.asarray(y, dtype=float)
    if y.ndim != 1 or y.size < 2:
        raise ValueError("need at least two sample values")
    ys = np.sort(y)
    if np.any(np.diff(ys) <= 0):
        raise ValueError("sample has duplicate values; jitter ties first")
    return ys


def step_from_levels(y, levels) -> StepCdf:
    """Uncorrected step curve: level a_j on [y_(j), y_(j+1)), then 1.

    levels are the (clamped) fitted values at the first n-1 order
    statistics of y.
    """
    ys = _check_sorted_unique(y)
    a = np.asarray(levels, dtype=float)
    if a.shape != (ys.size - 1,):
        raise ValueError("need one level per order-statistic gap (n - 1 values)")
    return StepCdf(ys, np.append(a, 1.0))


def rearrange_step(y, levels) -> StepCdf:
    """Monotone rearrangement of the step curve defined by step_from_levels.

    Levels are sorted descending (stable, so tied levels keep their interval
    identities) and laid back from the largest order statistic leftward,
    each spanning its original interval length.  Equal adjacent levels are
    kept as separate steps so the (level, length) multiset is preserved
    exactly.  The leftmost breakpoint telescopes back to y_(1).
    """
    ys = _check_sorted_unique(y)
    a = np.clip(np.asarray(levels, dtype=float), 0.0, 1.0)
    if a.shape != (ys.size - 1,):
        raise ValueError("need one level per order-statistic gap (n - 1 values)")
    gaps = np.diff(ys)
    order = np.argsort(-a, kind="stable")
    sorted_levels = a[order]
    sorted_gaps = gaps[order]
    v = ys[-1] - np.cumsum(sorted_gaps)
    # v runs right to left; flip into ascending breakpoints
    breakpoints = np.append(v[::-1], ys[-1])
    new_levels = np.append(sorted_levels[::-1], 1.0)
    breakpoints[0] = ys[0]  # telescoped sum equals y_(1) up to round-off
    return StepCdf(breakpoints, new_levels)


def rearrange_many(y, values: np.ndarray):
    """Rearrange one step curve per row of values.

    values is (units, n-1): row i holds unit i's fitted CDF at the first
    n-1 order statistics of y.  Values are clamped to [0, 1] on the way in.
    """
    values = np.atleast_2d(np.asarray(values, dtype=float))
    return [rearrange_step(y, row) for row in values]
