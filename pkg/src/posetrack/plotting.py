"""Figures written next to the CSV/Markdown reports."""

from __future__ import annotations

from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .topology import SKELETON_EDGES  # noqa: E402

STYLE = {
    "figure.dpi": 100,
    "font.size": 9,
    "axes.titlesize": 10,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "axes.spines.top": False,
    "axes.spines.right": False,
}


def _save(fig, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)
    return path


def per_keypoint_pck(reports, path, tolerance: float = 0.2) -> Path:
    """Grouped bars, one group per keypoint, one bar per report."""
    with plt.rc_context(STYLE):
        names = list(reports[0].per_keypoint_pck)
        fig, ax = plt.subplots(figsize=(max(6, 0.45 * len(names)), 3.5))
        width = 0.8 / len(reports)
        x = np.arange(len(names))
        for i, r in enumerate(reports):
            vals = [r.per_keypoint_pck[n] for n in names]
            ax.bar(x + i * width, vals, width, label=f"{r.label} / {r.dataset} ({r.pck:.1f})")
        ax.set_xticks(x + 0.4 - width / 2)
        ax.set_xticklabels(names, rotation=60, ha="right")
        ax.set_ylim(0, 100)
        ax.set_ylabel(f"PCK@{tolerance:g}")
        ax.legend(fontsize=7, loc="lower right")
        return _save(fig, path)


def loss_curve(history, path) -> Path:
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(5, 3.2))
        epochs = [h.epoch for h in history]
        ax.plot(epochs, [h.loss for h in history], color="tab:blue", label="train loss")
        ax.set_xlabel("epoch")
        ax.set_ylabel("loss")
        ax.set_yscale("log")
        pcks = [h.pck for h in history]
        if not all(np.isnan(pcks)):
            ax2 = ax.twinx()
            ax2.plot(epochs, pcks, color="tab:orange", marker=".", label="held-out PCK")
            ax2.set_ylabel("held-out PCK@0.2")
            ax2.set_ylim(0, 100)
            ax2.grid(False)
        return _save(fig, path)


def tracking_timeline(results, frame_pck: Sequence[float], path) -> Path:
    """Per-frame PCK and presence, with detector invocations marked."""
    with plt.rc_context(STYLE):
        fig, (a1, a2) = plt.subplots(2, 1, figsize=(6, 4), sharex=True)
        frames = [r.frame for r in results]
        a1.plot(frames, frame_pck, marker=".", lw=1)
        a1.set_ylabel("PCK@0.2")
        a1.set_ylim(0, 105)
        a2.plot(frames, [r.presence for r in results], lw=1, color="tab:green")
        for r in results:
            if r.detector_ran:
                a2.axvline(r.frame, color="tab:red", lw=0.8, alpha=0.6)
        a2.set_ylabel("presence")
        a2.set_xlabel("frame (red: detector ran)")
        a2.set_ylim(0, 1.05)
        return _save(fig, path)


def pose_overlay(image: np.ndarray, poses, path, labels=None) -> Path:
    with plt.rc_context({**STYLE, "axes.grid": False}):
        fig, ax = plt.subplots(figsize=(4, 4))
        ax.imshow(np.clip(image, 0, 1))
        for i, pose in enumerate(poses):
            pts = pose.points
            color = f"C{i}"
            for a, b in SKELETON_EDGES:
                ax.plot(*pts[[a, b]].T, color=color, lw=1)
            ax.scatter(*pts.T, s=6, color=color, label=None if labels is None else labels[i])
        if labels:
            ax.legend(fontsize=7)
        ax.set_axis_off()
        return _save(fig, path)
