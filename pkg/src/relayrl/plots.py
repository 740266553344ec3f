"""Figure rendering for training curves, outage reports, and sweeps.

All plots use the non-interactive Agg backend and write PNG files; nothing
here opens a window, so the helpers are safe in headless runs and tests.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

__all__ = ["plot_training_curves", "plot_eval_report", "plot_sweep"]


def plot_training_curves(curves: dict, agent: str, path: str | Path) -> None:
    """Per-seed moving-average success curves plus their mean."""
    fig, ax = plt.subplots(figsize=(7, 4.5))
    for seed, curve in sorted(curves.items()):
        ax.plot(range(1, len(curve) + 1), curve, alpha=0.45, lw=1.0,
                label=f"seed {seed}")
    if curves:
        stacked = np.array([c for c in curves.values()])
        ax.plot(range(1, stacked.shape[1] + 1), stacked.mean(axis=0),
                color="black", lw=2.0, label="mean")
    ax.set_xlabel("episode")
    ax.set_ylabel("success rate (moving average)")
    ax.set_ylim(-0.02, 1.02)
    ax.set_title(f"training success, agent={agent}")
    ax.grid(True, alpha=0.3)
    ax.legend(fontsize=8, ncol=2)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def plot_eval_report(report, path: str | Path) -> None:
    """Outage probability versus outage threshold for one frozen policy."""
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(report.lambdas, report.outages, marker="o")
    ax.set_xlabel("outage threshold (bits/s/Hz)")
    ax.set_ylabel("outage probability")
    ax.set_ylim(-0.02, 1.02)
    ax.set_title(f"outage vs threshold, agent={report.agent}, "
                 f"{report.episodes} episodes")
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def plot_sweep(results: dict, path: str | Path) -> None:
    """Mean learning curves with min-max bands, one color per swept value."""
    fig, ax = plt.subplots(figsize=(7, 4.5))
    for value, stats in results["values"].items():
        episodes = range(1, len(stats["curve_mean"]) + 1)
        line, = ax.plot(episodes, stats["curve_mean"], lw=1.8,
                        label=f"{results['dimension']}={value}")
        ax.fill_between(episodes, stats["curve_min"], stats["curve_max"],
                        color=line.get_color(), alpha=0.15)
    ax.set_xlabel("episode")
    ax.set_ylabel("success rate (moving average)")
    ax.set_ylim(-0.02, 1.02)
    ax.set_title(f"sweep over {results['dimension']}")
    ax.grid(True, alpha=0.3)
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
