"""Figures written next to the JSON outputs (headless, Agg backend)."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

# No timestamps or version strings, so identical data gives identical files.
_PNG_META = {"Software": None}


def _save(fig, path):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, dpi=110, metadata=_PNG_META)
    plt.close(fig)
    return path


def _metric(objects, key):
    return [np.nan if o.get("metrics", {}).get(key) is None else o["metrics"][key] for o in objects]


def plot_eval(report: dict, path):
    """Per-object rotation and translation errors for every arm."""
    arms = list(report["arms"])
    ids = [o["id"] for o in report["arms"][arms[0]]["objects"]]
    x = np.arange(len(ids))
    fig, (ax_r, ax_t) = plt.subplots(1, 2, figsize=(11, 4))
    w = 0.8 / (2 * len(arms))
    for k, arm in enumerate(arms):
        objs = report["arms"][arm]["objects"]
        el, az = _metric(objs, "elevation_error"), _metric(objs, "azimuth_error")
        ax_r.bar(x + (2 * k) * w, el, w, label=f"{arm} elevation")
        ax_r.bar(x + (2 * k + 1) * w, az, w, label=f"{arm} azimuth", alpha=0.7)
        ax_t.bar(x + k * 2 * w, _metric(objs, "centroid_error_pct"), 2 * w, label=arm)
    ax_r.axhline(2.0, color="k", lw=0.8, ls="--")
    ax_r.set_ylabel("angular error [deg]")
    ax_r.set_title("rotation")
    ax_t.axhline(2.0, color="k", lw=0.8, ls="--")
    ax_t.set_ylabel("centroid error [% of scene extent]")
    ax_t.set_title("placement")
    for ax in (ax_r, ax_t):
        ax.set_xticks(x + 0.4 - w / 2, ids)
        ax.legend(fontsize=7)
    fig.tight_layout()
    return _save(fig, path)


def plot_scene_inputs(reference, depth, masks, path):
    """Reference image, depth map and mask outlines side by side."""
    fig, axes = plt.subplots(1, 3, figsize=(11, 3.8))
    axes[0].imshow(reference, cmap="gray", vmin=0, vmax=1)
    axes[0].set_title("reference")
    d = np.where(depth.valid, depth.depth, np.nan)
    im = axes[1].imshow(d, cmap="viridis")
    fig.colorbar(im, ax=axes[1], fraction=0.046)
    axes[1].set_title("depth")
    labels = np.zeros(reference.shape, dtype=float)
    for k, m in enumerate(masks, start=1):
        labels[m] = k
    axes[2].imshow(np.where(labels > 0, labels, np.nan), cmap="tab10", vmin=1, vmax=10, interpolation="nearest")
    axes[2].set_title("object masks")
    for ax in axes:
        ax.set_xticks([])
        ax.set_yticks([])
    fig.tight_layout()
    return _save(fig, path)


def plot_composition(objects, scaffold, path, ids=None, gt_centroids=None):
    """Front (x-y) and top (x-z) views of the composed scene."""
    fig, (ax_f, ax_t) = plt.subplots(1, 2, figsize=(11, 4.5))
    if scaffold is not None:
        s = scaffold.points[:: max(1, len(scaffold) // 4000)]
        for ax, (i, j) in ((ax_f, (0, 1)), (ax_t, (0, 2))):
            ax.scatter(s[:, i], s[:, j], s=0.5, c="0.8")
    ids = ids or [str(k) for k in range(len(objects))]
    for oid, obj in zip(ids, objects):
        p = obj.points[:: max(1, len(obj) // 3000)]
        c = obj.centroid
        for ax, (i, j) in ((ax_f, (0, 1)), (ax_t, (0, 2))):
            ax.scatter(p[:, i], p[:, j], s=0.6, label=oid if ax is ax_f else None)
            ax.plot(c[i], c[j], "k+", ms=9)
    if gt_centroids is not None:
        g = np.asarray(gt_centroids)
        ax_f.plot(g[:, 0], g[:, 1], "rx", ms=8, label="ground truth")
        ax_t.plot(g[:, 0], g[:, 2], "rx", ms=8)
    ax_f.set(xlabel="x", ylabel="y", title="front view")
    ax_t.set(xlabel="x", ylabel="z", title="top view")
    for ax in (ax_f, ax_t):
        ax.set_aspect("equal", adjustable="datalim")
    leg = ax_f.legend(fontsize=7)
    for h in leg.legend_handles:
        if hasattr(h, "set_sizes"):
            h.set_sizes([20])
    fig.tight_layout()
    return _save(fig, path)


def plot_rotation_summary(errors, path, title="rotation recovery"):
    """Histogram of coarse vs refined per-angle errors (rows of (ce, ca, fe, fa))."""
    e = np.asarray(errors, dtype=float).reshape(-1, 4)
    fig, ax = plt.subplots(figsize=(6, 4))
    coarse = np.maximum(e[:, 0], e[:, 1])
    refined = np.maximum(e[:, 2], e[:, 3])
    bins = np.linspace(0, max(8.0, float(np.nanmax(coarse)) if coarse.size else 8.0), 33)
    ax.hist(coarse, bins=bins, alpha=0.6, label="coarse")
    ax.hist(refined, bins=bins, alpha=0.6, label="refined")
    ax.axvline(2.0, color="k", lw=0.8, ls="--")
    ax.set(xlabel="max per-angle error [deg]", ylabel="count", title=title)
    ax.legend()
    fig.tight_layout()
    return _save(fig, path)
