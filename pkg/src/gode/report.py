"""Figure rendering for stage reports.

Every training stage writes a JSONL log and a loss-curve PNG next to it;
evaluation stages write a metric summary PNG alongside the results CSV.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt


def render_loss_curves(log: list[dict], out_png: str | Path, title: str) -> None:
    """Plot every numeric series in the log against epoch."""
    if not log:
        return
    epochs = [entry.get("epoch", i) for i, entry in enumerate(log)]
    series = {}
    for entry in log:
        for key, value in entry.items():
            if key in ("epoch", "stage"):
                continue
            if isinstance(value, (int, float)):
                series.setdefault(key, []).append(value)
    fig, ax = plt.subplots(figsize=(6.4, 4.0))
    for key, values in sorted(series.items()):
        if len(values) == len(epochs):
            ax.plot(epochs, values, label=key, linewidth=1.4)
    ax.set_xlabel("epoch")
    ax.set_ylabel("loss")
    ax.set_title(title)
    ax.legend(fontsize=8)
    ax.grid(alpha=0.3)
    fig.tight_layout()
    fig.savefig(out_png, dpi=120)
    plt.close(fig)


def render_metric_bars(
    metrics: dict[str, float], out_png: str | Path, title: str, ylabel: str = "value"
) -> None:
    if not metrics:
        return
    names = list(metrics)
    values = [metrics[k] for k in names]
    fig, ax = plt.subplots(figsize=(max(4.0, 1.1 * len(names)), 3.6))
    bars = ax.bar(range(len(names)), values, color="#4878a8")
    ax.set_xticks(range(len(names)))
    ax.set_xticklabels(names, rotation=30, ha="right", fontsize=8)
    ax.set_ylabel(ylabel)
    ax.set_title(title)
    for bar, value in zip(bars, values):
        ax.annotate(
            f"{value:.3f}",
            (bar.get_x() + bar.get_width() / 2, bar.get_height()),
            ha="center",
            va="bottom",
            fontsize=7,
        )
    ax.grid(axis="y", alpha=0.3)
    fig.tight_layout()
    fig.savefig(out_png, dpi=120)
    plt.close(fig)
