"""Render curve tables and stop-time histograms to image files.

All rendering goes through the Agg backend and writes straight to disk; the
CSV tables remain the primary output, figures are a convenience layered on
the same data.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

__all__ = ["render_curve_figure", "render_stop_histogram"]

_CURVE_SETTINGS = {
    "fig4": {
        "x": "dm",
        "xlabel": "decision points x criteria (dm)",
        "ylabel": "required Z",
        "logx": False,
    },
    "fig5": {
        "x": "p",
        "xlabel": "required p-value",
        "ylabel": "required Z / relative test length",
        "logx": False,
    },
    "fig6": {
        "x": "u",
        "xlabel": "repetition rate u",
        "ylabel": "required Z",
        "logx": False,
    },
    "fig7": {
        "x": "t",
        "xlabel": "observations t",
        "ylabel": "required Z",
        "logx": True,
    },
}


def render_curve_figure(which: str, header: list[str], rows: list[list], path: str | Path) -> None:
    """Plot every non-x column of a curve table against its x column."""
    settings = _CURVE_SETTINGS[which]
    x_name = settings["x"]
    x_idx = header.index(x_name)
    xs = [row[x_idx] for row in rows]
    fig, ax = plt.subplots(figsize=(6.4, 4.2))
    for idx, name in enumerate(header):
        if idx == x_idx:
            continue
        ax.plot(xs, [row[idx] for row in rows], label=name)
    if settings["logx"]:
        ax.set_xscale("log")
    ax.set_xlabel(settings["xlabel"])
    ax.set_ylabel(settings["ylabel"])
    ax.legend()
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def render_stop_histogram(counts_by_arm: dict[str, dict[int, int]], path: str | Path) -> None:
    """Bar chart of StopSuccess decision indices, one series per arm."""
    fig, ax = plt.subplots(figsize=(6.4, 4.2))
    any_data = False
    for label, counts in counts_by_arm.items():
        if not counts:
            continue
        any_data = True
        indices = sorted(counts)
        ax.bar(indices, [counts[i] for i in indices], width=0.9, label=label, alpha=0.7)
    if any_data:
        ax.legend()
    else:
        ax.text(0.5, 0.5, "no early stops", ha="center", va="center", transform=ax.transAxes)
    ax.set_xlabel("decision index at stop")
    ax.set_ylabel("trials")
    ax.grid(True, axis="y", alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
