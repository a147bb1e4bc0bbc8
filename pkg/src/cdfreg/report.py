"""Figure rendering for the command-line report path.

The core library never touches a plotting backend; these helpers take
already-computed arrays and write PNG files next to the CSV/JSON artifacts.
All figures use the non-interactive Agg backend so they work headless.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)
import numpy as np  # noqa: E402


def _finish(fig, path):
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return str(path)


def metrics_figure(path, crps, msd):
    """Per-rep CRPS and MSD traces side by side."""
    crps = np.asarray(crps, dtype=float)
    msd = np.asarray(msd, dtype=float)
    fig, axes = plt.subplots(1, 2, figsize=(9, 3.2))
    for ax, series, label in ((axes[0], crps, "CRPS"), (axes[1], msd, "MSD")):
        ax.plot(np.arange(series.size), series, marker="o", ms=3, lw=0.8)
        ax.axhline(series.mean(), color="crimson", lw=1,
                   label=f"mean {series.mean():.4g}")
        ax.set_xlabel("replication")
        ax.set_ylabel(label)
        ax.legend(frameon=False, fontsize=8)
    return _finish(fig, path)


def threshold_curve_figure(path, grid_points, curve):
    """Unit-averaged squared error along the threshold grid."""
    fig, ax = plt.subplots(figsize=(6, 3.2))
    ax.plot(grid_points, curve, lw=1.2)
    ax.set_xlabel("threshold t")
    ax.set_ylabel("mean squared CDF error")
    return _finish(fig, path)


def cdf_slice_figure(path, index, values, t_value):
    """Fitted probability P(y <= t*) across units at one threshold."""
    fig, ax = plt.subplots(figsize=(6, 3.2))
    ax.plot(index, values, marker="o", ms=3, lw=0.8)
    ax.set_xlabel("unit index")
    ax.set_ylabel(f"fitted P(y <= {t_value:g})")
    ax.set_ylim(-0.05, 1.05)
    return _finish(fig, path)


def step_functions_figure(path, steps, max_units: int = 6):
    """Original-vs-corrected style step plot for a few units.

    steps is a list of (label, StepCdf) pairs; only the first max_units are
    drawn to keep the figure readable.
    """
    fig, ax = plt.subplots(figsize=(6, 3.6))
    for label, step in steps[:max_units]:
        b = step.breakpoints
        pad = max(1e-12, 0.05 * (b[-1] - b[0]))
        ts = np.concatenate([[b[0] - pad], b, [b[-1] + pad]])
        ax.step(ts, step.evaluate(ts), where="post", lw=1.0, label=str(label))
    ax.set_xlabel("t")
    ax.set_ylabel("F(t)")
    ax.set_ylim(-0.05, 1.05)
    ax.legend(frameon=False, fontsize=8)
    return _finish(fig, path)
