"""Figure rendering: pure file-in/file-out, deterministic for fixed inputs."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .artifacts import ArtifactError, load_field_2d, read_field, read_report

KINDS = ("ratio-curve", "heatmap", "distance-contours")

# keep rendering deterministic and metadata-free
_SAVE_KW = dict(dpi=120, metadata={"Software": None})


@dataclass
class PlotSpec:
    kind: str
    inputs: list[str]
    output: str
    levels: list[float] | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ArtifactError(f"unknown plot kind {self.kind!r}")
        if not self.inputs:
            raise ArtifactError("plot spec needs at least one input")


def render(spec: PlotSpec) -> Path:
    out = Path(spec.output)
    out.parent.mkdir(parents=True, exist_ok=True)
    if spec.kind == "ratio-curve":
        fig = ratio_curve_figure(read_report(spec.inputs[0]))
    elif spec.kind == "heatmap":
        fig = heatmap_figure(spec.inputs[0])
    else:
        fig = distance_contours_figure(spec.inputs[0], spec.levels)
    fig.savefig(out, **_SAVE_KW)
    plt.close(fig)
    return out


def _window_label(report: dict, key: str) -> str:
    win = report.get("params", {}).get(key)
    if isinstance(win, list) and len(win) == 2:
        return f"({win[0]:g}, {win[1]:g})"
    return "full record"


def ratio_curve_figure(report: dict):
    """log-k versus log-norms over the target and suppression windows.

    Plotted values are the report values verbatim (no rescaling), so the
    curves can be checked exactly against the report.
    """
    ks = report["k_schedule"]
    targets = report["target_norms"]
    supps = report["suppression_norms"]
    fig, (ax, ax2) = plt.subplots(1, 2, figsize=(9.5, 4.0))
    ax.plot(ks, targets, "o-", label=f"target window {_window_label(report, 'target_window')}")
    ax.plot(ks, supps, "s--", label=f"suppression window {_window_label(report, 'suppression_window')}")
    ax.set_xscale("log")
    if min(targets) > 0 and min(supps) > 0:
        ax.set_yscale("log")
    ax.set_xlabel("k")
    ax.set_ylabel("field norm")
    ax.set_title(report.get("mode", "localization"))
    ax.legend(fontsize=8)
    ratios = [t / s if s > 0 else np.nan for t, s in zip(targets, supps)]
    ax2.plot(ks, ratios, "d-", color="tab:red")
    ax2.set_xscale("log")
    finite = [r for r in ratios if np.isfinite(r)]
    if finite and min(finite) > 0:
        ax2.set_yscale("log")
    ax2.set_xlabel("k")
    ax2.set_ylabel("target / suppression")
    ax2.set_title("localization ratio")
    fig.tight_layout()
    return fig


def heatmap_figure(path):
    values, xs, ys = load_field_2d(path)
    fig, ax = plt.subplots(figsize=(5.2, 4.4))
    vmax = float(np.max(np.abs(values)))
    if vmax == 0.0:
        # uniform zero field: render flat with an explicit annotation
        im = ax.imshow(values.T, origin="lower", vmin=-1.0, vmax=1.0,
                       extent=(xs[0], xs[-1], ys[0], ys[-1]), cmap="RdBu_r")
        ax.text(0.5, 0.5, "zero field (range 0)", transform=ax.transAxes,
                ha="center", va="center", fontsize=11)
    else:
        im = ax.imshow(values.T, origin="lower", vmin=-vmax, vmax=vmax,
                       extent=(xs[0], xs[-1], ys[0], ys[-1]), cmap="RdBu_r")
    fig.colorbar(im, ax=ax, shrink=0.85)
    ax.set_xlabel("x")
    ax.set_ylabel("y")
    ax.set_title(Path(path).name)
    fig.tight_layout()
    return fig


def distance_contours_figure(path, levels=None):
    values, xs, ys = load_field_2d(path)
    if levels is None:
        top = float(np.max(values))
        levels = [round(v, 6) for v in np.linspace(0.1, max(top, 0.1), 5)]
    fig, ax = plt.subplots(figsize=(5.2, 4.4))
    cs = ax.contour(xs, ys, values.T, levels=levels)
    ax.clabel(cs, inline=True, fontsize=7)
    ax.set_xlabel("x")
    ax.set_ylabel("y")
    ax.set_title("travel-time distance")
    ax.set_aspect("equal")
    fig.tight_layout()
    return fig
