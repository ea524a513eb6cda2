"""Matplotlib figures written next to the delimited output.

Everything renders through the Agg backend straight to PNG files; nothing
here opens a window.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .bo import OptimizationHistory
from .sim import TrialTrace


def plot_fitness_history(history: OptimizationHistory, path: str | Path) -> Path:
    """Fitness per iteration, running best, and the support-height staircase."""
    path = Path(path)
    iters = np.arange(1, len(history) + 1)
    fitness = history.fitness_values()
    heights = np.array(
        [np.nan if r.support_height is None else r.support_height for r in history.records]
    )

    fig, ax = plt.subplots(figsize=(8, 4.5))
    ax.plot(iters, fitness, "o-", ms=3.5, lw=1.0, color="tab:blue", label="fitness")
    ax.plot(iters, history.best_so_far(), lw=1.8, color="tab:orange", label="best so far")
    ax.set_xlabel("iteration")
    ax.set_ylabel("self-support fraction")
    ax.set_ylim(-0.05, 1.05)
    ax.grid(alpha=0.3)
    if np.any(np.isfinite(heights)):
        ax2 = ax.twinx()
        ax2.step(iters, heights, where="mid", color="tab:green", alpha=0.6,
                 label="support height")
        ax2.set_ylabel("support height (m)")
        lines, labels = ax.get_legend_handles_labels()
        l2, lb2 = ax2.get_legend_handles_labels()
        ax.legend(lines + l2, labels + lb2, loc="upper left", fontsize=8)
    else:
        ax.legend(loc="upper left", fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)
    return path


def plot_trace(trace: TrialTrace, path: str | Path, title: str = "") -> Path:
    """Four panels: trunk height, attitude, rope tension, hip/knee commands."""
    path = Path(path)
    t = trace.times
    fig, axes = plt.subplots(4, 1, figsize=(8, 9), sharex=True)

    axes[0].plot(t, trace.z, lw=0.9, color="tab:blue")
    axes[0].set_ylabel("trunk z (m)")
    if title:
        axes[0].set_title(title)

    axes[1].plot(t, np.degrees(trace.roll), lw=0.9, label="roll")
    axes[1].plot(t, np.degrees(trace.pitch), lw=0.9, label="pitch")
    axes[1].set_ylabel("attitude (deg)")
    axes[1].legend(fontsize=8, loc="upper right")

    axes[2].plot(t, trace.rope_tension, lw=0.9, color="tab:red")
    axes[2].set_ylabel("rope tension (N)")

    axes[3].plot(t, trace.column("hipFL"), lw=0.9, label="hip FL")
    axes[3].plot(t, trace.column("kneeFL"), lw=0.9, label="knee FL")
    axes[3].plot(t, trace.column("hipFR"), lw=0.9, label="hip FR", alpha=0.7)
    axes[3].plot(t, trace.column("kneeFR"), lw=0.9, label="knee FR", alpha=0.7)
    axes[3].set_ylabel("command (rad)")
    axes[3].set_xlabel("time (s)")
    axes[3].legend(fontsize=8, ncol=4, loc="upper right")

    for ax in axes:
        ax.grid(alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)
    return path


def plot_benchmark_curves(
    bo_curves: list[np.ndarray],
    random_curves: list[np.ndarray],
    path: str | Path,
    ylabel: str = "best objective value",
) -> Path:
    """Best-so-far curves, one line per seed, optimizer vs random baseline."""
    path = Path(path)
    fig, ax = plt.subplots(figsize=(7, 4.5))
    for i, curve in enumerate(bo_curves):
        ax.plot(np.arange(1, len(curve) + 1), curve, color="tab:blue", alpha=0.55,
                lw=1.0, label="surrogate search" if i == 0 else None)
    for i, curve in enumerate(random_curves):
        ax.plot(np.arange(1, len(curve) + 1), curve, color="tab:gray", alpha=0.55,
                lw=1.0, ls="--", label="random search" if i == 0 else None)
    ax.set_xlabel("evaluation")
    ax.set_ylabel(ylabel)
    ax.grid(alpha=0.3)
    ax.legend(fontsize=9)
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)
    return path
