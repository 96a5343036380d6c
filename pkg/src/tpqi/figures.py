"""Figure rendering for the report path.

Each helper writes one PNG next to the delimited output; nothing here is
interactive (Agg backend only).
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .evaluate import LogisticParams, logistic_apply


def plot_fit_scatter(pred, mos, params: LogisticParams, path, score_field: str = "score",
                     metrics: dict | None = None) -> None:
    """Prediction-vs-MOS scatter with the fitted logistic curve."""
    pred = np.asarray(pred, dtype=float)
    mos = np.asarray(mos, dtype=float)
    fig, ax = plt.subplots(figsize=(5.2, 4.0))
    ax.scatter(pred, mos, s=18, alpha=0.7, edgecolors="none", label="videos")
    grid = np.linspace(pred.min(), pred.max(), 256)
    ax.plot(grid, logistic_apply(params, grid), "r-", lw=1.5, label="logistic fit")
    ax.set_xlabel(score_field)
    ax.set_ylabel("MOS")
    title = "prediction vs MOS"
    if metrics:
        title += "  (" + ", ".join(f"{k}={v:.3f}" for k, v in metrics.items()) + ")"
    ax.set_title(title, fontsize=10)
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def plot_trajectory(points, path, title: str = "perceptual trajectory") -> None:
    """First two principal components as a connected temporal path."""
    points = np.asarray(points, dtype=float)
    fig, ax = plt.subplots(figsize=(4.6, 4.2))
    x = points[:, 0]
    y = points[:, 1] if points.shape[1] > 1 else np.zeros_like(x)
    ax.plot(x, y, "--", color="tab:blue", lw=0.9, alpha=0.8)
    ax.scatter(x, y, c=np.arange(len(x)), cmap="viridis", s=16, zorder=3)
    ax.scatter([x[0]], [y[0]], marker="s", color="k", s=30, zorder=4, label="start")
    ax.set_xlabel("PC 1")
    ax.set_ylabel("PC 2")
    ax.set_title(title, fontsize=10)
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def plot_descriptor_series(series_by_domain: dict, path) -> None:
    """Per-instant distortion values over time, one line per domain."""
    fig, ax = plt.subplots(figsize=(6.0, 3.2))
    for name, series in series_by_domain.items():
        ax.plot(series.q, lw=1.0, label=f"{name} (mean {series.mean_q:.3g})")
    ax.set_xlabel("trajectory instant")
    ax.set_ylabel("per-instant distortion")
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
