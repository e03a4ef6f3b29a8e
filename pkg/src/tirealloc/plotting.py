"""SVG figures for run reports and envelope snapshots (Agg backend, files only)."""

from __future__ import annotations

import math
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .params import WHEELS  # noqa: E402

_RC = {
    "font.size": 8,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "lines.linewidth": 1.0,
    "svg.hashsalt": "tirealloc",  # stable element ids
    "svg.fonttype": "none",
}


def plot_run(result, path) -> Path:
    """Tracking error, yaw rate and per-wheel lateral forces over time."""
    path = Path(path)
    col = result.column
    t = col("t")
    with plt.rc_context(_RC):
        fig, axes = plt.subplots(3, 1, figsize=(7, 7), sharex=True)
        axes[0].plot(t, col("e_y"), color="k")
        axes[0].set_ylabel("e_y [m]")
        axes[1].plot(t, np.degrees(col("omega_r")), label="yaw rate")
        axes[1].plot(t, np.degrees(col("omega_ref")), "--", label="reference")
        axes[1].set_ylabel("yaw rate [deg/s]")
        axes[1].legend(loc="best", frameon=False)
        for w in WHEELS:
            line, = axes[2].plot(t, col(f"f_y_{w}"), label=w)
            axes[2].plot(t, col(f"f_y_alloc_{w}"), ":", color=line.get_color())
        axes[2].set_ylabel("f_y realized (solid) / allocated (dotted) [N]")
        axes[2].set_xlabel("t [s]")
        axes[2].legend(loc="best", ncol=4, frameon=False)
        title = f"{result.scenario.name}  {result.ablation.label}"
        if result.metrics.failure:
            title += "  FAILED"
        fig.suptitle(title)
        fig.tight_layout()
        fig.savefig(path, format="svg", metadata={"Date": None})
        plt.close(fig)
    return path


def draw_envelope(ax, envelope, f=None, color="C0"):
    if envelope is None:
        ax.text(0.5, 0.5, "unconstrained", transform=ax.transAxes, ha="center")
    elif envelope.kind == "circle":
        th = np.linspace(0.0, 2.0 * math.pi, 181)
        ax.plot(envelope.radius * np.cos(th), envelope.radius * np.sin(th), color=color)
    else:
        v = np.array(envelope.vertices + envelope.vertices[:1])
        ax.plot(v[:, 0], v[:, 1], "-o", color=color, ms=2)
    if f is not None:
        ax.plot([f[0]], [f[1]], "x", color="C3")
    ax.set_aspect("equal", adjustable="datalim")


def plot_envelope_snapshots(snapshots, out_dir) -> list[Path]:
    """One SVG per snapshot with the four wheel envelopes and the allocated forces."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = []
    with plt.rc_context(_RC):
        for t, envelopes, f in snapshots:
            fig, axes = plt.subplots(2, 2, figsize=(6, 6))
            for w, ax in enumerate(axes.flat):
                draw_envelope(ax, envelopes[w], (f[2 * w], f[2 * w + 1]))
                ax.set_title(WHEELS[w])
                ax.set_xlabel("f_x [N]")
                ax.set_ylabel("f_y [N]")
            fig.suptitle(f"t = {t:.3f} s")
            fig.tight_layout()
            p = out / f"envelopes_{int(round(t * 1000)):06d}ms.svg"
            fig.savefig(p, format="svg", metadata={"Date": None})
            plt.close(fig)
            paths.append(p)
    return paths


def plot_matrix(rows, metric: str, path) -> Path:
    """Bar chart of one metric across the runs of an ablation matrix."""
    path = Path(path)
    labels = [f"{r['scenario']}\n{r['ablation']}" for r in rows]
    vals = [r[metric] if isinstance(r[metric], float) else float("nan") for r in rows]
    with plt.rc_context(_RC):
        fig, ax = plt.subplots(figsize=(max(4, 0.6 * len(rows)), 4))
        ax.bar(range(len(vals)), vals, color="C0")
        ax.set_xticks(range(len(vals)))
        ax.set_xticklabels(labels, rotation=90, fontsize=5)
        ax.set_ylabel(metric)
        fig.tight_layout()
        fig.savefig(path, format="svg", metadata={"Date": None})
        plt.close(fig)
    return path
