"""Deterministic figure rendering from pclda metrics exports.

Three figure kinds:
  landscape  - label NLL vs data NLL scatter, one marker per (method, mode);
               the lower-left corner is the ideal position
  ksweep     - a chosen metric against the topic count K, one line per method
  topic-grid - each topic row of a checkpoint as a square heatmap with a
               logarithmic colormap

Determinism: Agg backend, fixed figure size and dpi, a fixed svg hashsalt,
and no date metadata, so repeated renders produce identical bytes.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402
from matplotlib.colors import LogNorm  # noqa: E402

from .schema import SchemaError, read_metrics, read_topic_checkpoint  # noqa: E402

plt.rcParams["svg.hashsalt"] = "pclda-plots"

KINDS = ("landscape", "ksweep", "topic-grid")

# fixed palette cycled per method, keyed by first appearance order
PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e",
           "#8c564b", "#17becf", "#e377c2", "#7f7f7f", "#bcbd22")


@dataclass
class PlotSpec:
    inputs: tuple
    kind: str
    out: str
    xlabel: str = ""
    ylabel: str = ""
    metric: str = "data_nll_per_token"
    dpi: int = 100
    style: dict = field(default_factory=dict)  # method -> color override

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"kind must be one of {KINDS}, got {self.kind!r}")
        if not self.inputs:
            raise ValueError("at least one input file is required")


def _method_key(row):
    lam = row["lambda"]
    if lam:
        return f"{row['method']} lam={lam:g}"
    return row["method"]


def _method_colors(keys, overrides):
    colors = {}
    for i, key in enumerate(keys):
        colors[key] = overrides.get(key, PALETTE[i % len(PALETTE)])
    return colors


def _load_rows(spec):
    rows = []
    for path in spec.inputs:
        rows.extend(read_metrics(path))
    return rows


def _save(fig, out, dpi):
    root, ext = os.path.splitext(out)
    if ext not in (".png", ".svg"):
        raise ValueError(f"output must end in .png or .svg, got {out!r}")
    fig.savefig(out, dpi=dpi, metadata={"Date": None} if ext == ".svg"
                else {"Software": None})
    plt.close(fig)


def render_landscape(spec: PlotSpec) -> int:
    """One marker per (method, map_mode); returns the marker count."""
    rows = _load_rows(spec)
    keys = []
    for row in rows:
        key = _method_key(row)
        if key not in keys:
            keys.append(key)
    colors = _method_colors(keys, spec.style)
    fig, ax = plt.subplots(figsize=(6.4, 4.8))
    n_markers = 0
    for key in keys:
        for mode, marker, fill in (("train", "o", "none"),
                                   ("predict", "o", "full")):
            pts = [(r["data_nll_per_token"], r["label_nll_per_doc"])
                   for r in rows if _method_key(r) == key
                   and r["map_mode"] == mode]
            if not pts:
                continue
            xs, ys = zip(*pts)
            ax.scatter(xs, ys, s=64,
                       facecolors=colors[key] if fill == "full" else "none",
                       edgecolors=colors[key], linewidths=1.5, marker=marker,
                       label=f"{key} ({mode})", zorder=3)
            n_markers += len(pts)
    ax.set_xlabel(spec.xlabel or "data NLL per token")
    ax.set_ylabel(spec.ylabel or "label NLL per doc")
    ax.grid(True, alpha=0.3)
    ax.legend(loc="upper right", fontsize=7, framealpha=0.9)
    fig.tight_layout()
    _save(fig, spec.out, spec.dpi)
    return n_markers


def render_ksweep(spec: PlotSpec) -> int:
    """Metric vs K, one line per (method, map_mode); returns line count."""
    rows = _load_rows(spec)
    if spec.metric not in rows[0]:
        raise SchemaError(f"missing column: {spec.metric}")
    groups = {}
    for r in rows:
        groups.setdefault((_method_key(r), r["map_mode"]), []).append(
            (r["K"], float(r[spec.metric])))
    colors = _method_colors([k for k, _ in groups], spec.style)
    fig, ax = plt.subplots(figsize=(6.4, 4.8))
    for (key, mode), pts in groups.items():
        pts.sort()
        ks, vals = zip(*pts)
        ax.plot(ks, vals, marker="o", color=colors[key],
                linestyle="-" if mode == "predict" else "--",
                fillstyle="full" if mode == "predict" else "none",
                label=f"{key} ({mode})")
    ax.set_xlabel(spec.xlabel or "number of topics K")
    ax.set_ylabel(spec.ylabel or spec.metric)
    ax.grid(True, alpha=0.3)
    ax.legend(loc="best", fontsize=7)
    fig.tight_layout()
    _save(fig, spec.out, spec.dpi)
    return len(groups)


def render_topic_grid(spec: PlotSpec) -> int:
    """Square heatmap per topic with log color scale; returns topic count."""
    phi, K, V = read_topic_checkpoint(spec.inputs[0])
    side = int(round(np.sqrt(V)))
    if side * side != V:
        raise SchemaError(f"vocabulary size {V} is not a square grid")
    phi = np.asarray(phi, dtype=float).reshape(K, V)
    lo = max(phi.min(), 1e-6)
    fig, axes = plt.subplots(1, K, figsize=(2.2 * K, 2.6))
    if K == 1:
        axes = [axes]
    for k, ax in enumerate(axes):
        img = np.clip(phi[k].reshape(side, side), lo, None)
        im = ax.imshow(img, cmap="viridis", norm=LogNorm(vmin=lo, vmax=1.0))
        ax.set_title(f"topic {k}", fontsize=9)
        ax.set_xticks([])
        ax.set_yticks([])
    fig.colorbar(im, ax=list(axes), fraction=0.03, pad=0.02)
    _save(fig, spec.out, spec.dpi)
    return K


def render(spec: PlotSpec) -> int:
    fn = {"landscape": render_landscape, "ksweep": render_ksweep,
          "topic-grid": render_topic_grid}[spec.kind]
    return fn(spec)
