"""Isotonic projection of indicator columns.

Each grid threshold poses the least-squares projection of the 0/1 indicator
vector onto the nondecreasing cone {theta_1 <= ... <= theta_n}.  Pool
adjacent violators solves it exactly in linear time: scan left to right,
merging each new point into the running block while the block means are out
of order.  The solution is piecewise constant at block means, which for 0/1
data automatically lands in [0, 1].
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import CdfEstimate, IndicatorMatrix, ThresholdGrid


def pava(values: np.ndarray) -> np.ndarray:
    """Euclidean projection onto {theta nondecreasing}.

    Stack of blocks, O(n): each block keeps (sum, count); a new value opens
    a block, then blocks merge while the last mean exceeds the next.
    Projection is idempotent and never increases the number of strict
    increases in the input.
    """
    v = np.asarray(values, dtype=float)
    if v.ndim != 1 or v.size == 0:
        raise ValueError("pava expects a nonempty 1-D vector")
    if not np.all(np.isfinite(v)):
        raise ValueError("pava input must be finite")

    sums = np.empty(v.size)
    counts = np.empty(v.size, dtype=np.int64)
    top = -1
    for x in v:
        top += 1
        sums[top] = x
        counts[top] = 1
        while top > 0 and sums[top - 1] * counts[top] >= sums[top] * counts[top - 1]:
            # merge: previous block mean >= current block mean
            sums[top - 1] += sums[top]
            counts[top - 1] += counts[top]
            top -= 1
    out = np.empty_like(v)
    pos = 0
    for b in range(top + 1):
        mean = sums[b] / counts[b]
        out[pos:pos + counts[b]] = mean
        pos += counts[b]
    return out


@dataclass(frozen=True)
class IsotonicFit:
    """Fitted monotone CDF surface plus the unit ordering used for rows."""

    estimate: CdfEstimate
    train_index: np.ndarray


def fit_isotonic(ind: IndicatorMatrix, train_index=None) -> IsotonicFit:
    """Project every indicator column onto the nondecreasing cone.

    Rows must already be ordered by the covariate/index that carries the
    monotone structure.  train_index records that ordering (defaults to
    0..n-1) so nearest-index prediction can locate query units later.
    """
    n, m = ind.w.shape
    if train_index is None:
        train_index = np.arange(n, dtype=float)
    train_index = np.asarray(train_index, dtype=float)
    if train_index.shape != (n,):
        raise ValueError("train_index must have one entry per row")
    if n > 1 and not np.all(np.diff(train_index) > 0):
        raise ValueError("train_index must be strictly increasing")
    fitted = np.empty_like(ind.w)
    for k in range(m):
        fitted[:, k] = pava(ind.w[:, k])
    est = CdfEstimate(fitted, ind.grid, raw=False, meta={"estimator": "isotonic"})
    return IsotonicFit(est, train_index)


def predict_nearest(fit: IsotonicFit, query_index) -> CdfEstimate:
    """Predict query units by copying the nearest training row.

    Distance is |query - train| on the index axis; exact ties go to the
    neighbor with the smaller index value.  Queries outside the training
    range clamp to the boundary rows.
    """
    q = np.atleast_1d(np.asarray(query_index, dtype=float))
    train = fit.train_index
    pos = np.searchsorted(train, q)
    left = np.clip(pos - 1, 0, train.size - 1)
    right = np.clip(pos, 0, train.size - 1)
    take_left = (q - train[left]) <= (train[right] - q)
    rows = np.where(take_left, left, right)
    est = fit.estimate
    return CdfEstimate(est.values[rows], est.grid, raw=False,
                       meta=dict(est.meta, predicted="nearest-index"))
