"""Figures for the report path: ablation bars and accuracy across iterations."""

from __future__ import annotations

from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .experiments import LABELS, METHODS, MethodResult, summarize  # noqa: E402

STYLE = {
    "font.size": 9,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "savefig.bbox": "tight",
    "savefig.dpi": 150,
}


def ablation_bars(results: Sequence[MethodResult], path: str | Path, metric: str = "exact_match") -> Path:
    table = summarize(results, metric)
    methods = [m for m in METHODS if m in table]
    means = [table[m]["mean"] for m in methods]
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(5.5, 3.0))
        x = np.arange(len(methods))
        ax.bar(x, means, color="#8fa8c8", edgecolor="#2f4b6e", width=0.6)
        for i, m in enumerate(methods):
            values = list(table[m]["values"].values())
            if len(values) > 1:
                ax.scatter(np.full(len(values), i), values, s=10, color="#2f4b6e", zorder=3)
        ax.set_xticks(x, [LABELS[m] for m in methods], rotation=20, ha="right")
        ax.set_ylabel(metric.replace("_", " "))
        ax.set_ylim(0, 1)
        path = Path(path)
        fig.savefig(path)
        plt.close(fig)
    return path


def iteration_curves(histories: dict[str, list[dict]], path: str | Path, metric: str = "exact_match") -> Path:
    """``histories`` maps a label to per-iteration metric dicts (iteration 0 = warm-up)."""
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(4.0, 3.0))
        for label, rows in histories.items():
            its = [r["iteration"] for r in rows]
            ax.plot(its, [r.get(metric, np.nan) for r in rows], marker="o", ms=3, label=label)
        ax.set_xlabel("iteration")
        ax.set_ylabel(f"validation {metric.replace('_', ' ')}")
        ax.xaxis.set_major_locator(matplotlib.ticker.MaxNLocator(integer=True))
        if len(histories) > 1:
            ax.legend(frameon=False)
        path = Path(path)
        fig.savefig(path)
        plt.close(fig)
    return path
