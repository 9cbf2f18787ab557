"""Figure rendering for the CLI report paths.

Every plot is written as SVG 1.1 next to the CSV it illustrates.  Output is
deterministic: the SVG date stamp is stripped and element ids are salted
with a fixed string so identical runs produce identical bytes.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")
matplotlib.rcParams["svg.hashsalt"] = "spar"

import matplotlib.pyplot as plt
import numpy as np

_SAVE_KW = dict(format="svg", metadata={"Date": None})


def _finish(fig, ax, path, title, xlabel, ylabel):
    ax.set_title(title)
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    fig.tight_layout()
    fig.savefig(path, **_SAVE_KW)
    plt.close(fig)


def save_scatter(path, x, y, title="", xlabel="x", ylabel="y", overlay=None):
    """Point cloud; ``overlay=(x, y)`` draws a second set of points."""
    fig, ax = plt.subplots(figsize=(5, 5))
    ax.plot(x, y, ".", ms=2, alpha=0.4, color="#555555", rasterized=False)
    if overlay is not None:
        ax.plot(overlay[0], overlay[1], ".", ms=2, alpha=0.5, color="#1f77b4")
    ax.set_aspect("equal", adjustable="datalim")
    _finish(fig, ax, path, title, xlabel, ylabel)


def save_curve(path, x, y, title="", xlabel="angle", ylabel="value", steps=None):
    """Single curve over angle; ``steps=(edges, values)`` adds a histogram."""
    fig, ax = plt.subplots(figsize=(6, 4))
    if steps is not None:
        edges, values = steps
        ax.stairs(values, edges, color="#bbbbbb", fill=True, alpha=0.6)
    ax.plot(x, y, color="#1f77b4", lw=1.5)
    _finish(fig, ax, path, title, xlabel, ylabel)


def save_band(path, x, median, lower, upper, title="", xlabel="angle", ylabel="value"):
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.fill_between(x, lower, upper, color="#1f77b4", alpha=0.25, lw=0)
    ax.plot(x, median, color="#1f77b4", lw=1.5)
    _finish(fig, ax, path, title, xlabel, ylabel)


def save_closed_curves(path, curves, data=None, title="", labels=None):
    """Closed Cartesian contours (one per level), optionally over the data."""
    fig, ax = plt.subplots(figsize=(5, 5))
    if data is not None:
        ax.plot(data[:, 0], data[:, 1], ".", ms=2, alpha=0.3, color="#aaaaaa")
    for i, (cx, cy) in enumerate(curves):
        keep = ~(np.isnan(cx) | np.isnan(cy))
        label = labels[i] if labels else None
        if keep.any():
            ax.plot(np.append(cx[keep], cx[keep][0]), np.append(cy[keep], cy[keep][0]),
                    lw=1.5, label=label)
    if labels:
        ax.legend(loc="upper right", fontsize=8)
    ax.set_aspect("equal", adjustable="datalim")
    _finish(fig, ax, path, title, "x", "y")


def save_qq(path, empirical, model, title=""):
    fig, ax = plt.subplots(figsize=(4.5, 4.5))
    ax.plot(model, empirical, ".", ms=4, color="#1f77b4")
    finite = np.isfinite(model) & np.isfinite(empirical)
    if finite.any():
        lo = min(np.min(model[finite]), np.min(empirical[finite]))
        hi = max(np.max(model[finite]), np.max(empirical[finite]))
        ax.plot([lo, hi], [lo, hi], "--", color="#888888", lw=1)
    _finish(fig, ax, path, title, "model quantile", "observed quantile")
