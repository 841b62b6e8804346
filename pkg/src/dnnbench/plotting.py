"""Figures for breakdown and footprint reports (rendered off-screen to files)."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from .errors import ReportError  # noqa: E402

KB = 1000
MB = 1000 * 1000

STYLE = {
    "figure.dpi": 110,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "font.size": 9,
}


def _save(fig, path):
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        fig.savefig(path, bbox_inches="tight")
    except OSError as e:
        raise ReportError(f"cannot write figure {path}: {e}") from e
    finally:
        plt.close(fig)
    return path


def plot_layer_shares(report, path):
    """Grouped bars of time share and arithmetic-op share per layer type."""
    types = [r.layer_type for r in report.rows]
    ops = [r.op_share for r in report.rows]
    times = [r.time_share for r in report.rows]
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(max(4.0, 0.7 * len(types) + 2), 3.2))
        xs = range(len(types))
        ax.bar([x - 0.2 for x in xs], ops, width=0.4, label="arithmetic ops")
        if all(t is not None for t in times):
            ax.bar([x + 0.2 for x in xs], times, width=0.4, label="wall time")
        ax.set_xticks(list(xs))
        ax.set_xticklabels(types, rotation=30, ha="right")
        ax.set_ylim(0, 1)
        ax.set_ylabel("share of network total")
        ax.set_title(f"{report.network}: per-layer-type breakdown")
        ax.legend(frameon=False)
        return _save(fig, path)


def plot_op_mix(report, path):
    """Stacked bar per layer type of its operation-category histogram (fractions)."""
    cats = list(report.category_totals)
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(max(4.0, 0.7 * len(report.rows) + 2), 3.2))
        bottoms = [0.0] * len(report.rows)
        for cat in cats:
            vals = []
            for r in report.rows:
                total = sum(r.histogram.values())
                vals.append(r.histogram[cat] / total if total else 0.0)
            ax.bar(range(len(report.rows)), vals, bottom=bottoms, label=cat)
            bottoms = [b + v for b, v in zip(bottoms, vals)]
        ax.set_xticks(range(len(report.rows)))
        ax.set_xticklabels([r.layer_type for r in report.rows], rotation=30, ha="right")
        ax.set_ylabel("fraction of layer-type ops")
        ax.set_title(f"{report.network}: operation mix")
        ax.legend(frameon=False, fontsize=7, ncol=2, bbox_to_anchor=(1.0, 1.0), loc="upper left")
        return _save(fig, path)


def plot_footprints(footprints, path):
    """Horizontal stacked bars of weight and peak activation bytes (log scale)."""
    if not footprints:
        raise ReportError("no footprints to plot")
    names = [f.network for f in footprints]
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(5.5, 0.45 * len(names) + 1.2))
        ys = range(len(names))
        ax.barh(ys, [f.weight_bytes for f in footprints], label="weights")
        ax.barh(ys, [f.peak_activation_bytes for f in footprints],
                left=[f.weight_bytes for f in footprints], label="peak activations")
        ax.axvline(500 * KB, color="k", ls="--", lw=0.8)
        ax.axvline(1 * MB, color="k", ls=":", lw=0.8)
        ax.set_xscale("log")
        ax.set_yticks(list(ys))
        ax.set_yticklabels(names)
        ax.set_xlabel("bytes (dashed: 500 KB, dotted: 1 MB)")
        ax.legend(frameon=False, fontsize=7)
        return _save(fig, path)
