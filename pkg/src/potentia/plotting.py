"""Ratio-curve figures as self-contained SVG.

Figures are drawn on a bare ``Figure`` (no pyplot state) inside an rc
context that fixes the SVG id salt and drops the date stamp, so the same
input always yields the same bytes.
"""

from __future__ import annotations

import logging
import math
from pathlib import Path

import matplotlib
from matplotlib.figure import Figure

from .report import RATIOS, read_csv

log = logging.getLogger(__name__)

FIG_WIDTH = 4.5
FIG_HEIGHT = FIG_WIDTH * (math.sqrt(5) - 1) / 2

STYLE = {
    "svg.hashsalt": "potentia",
    "svg.fonttype": "path",
    "font.family": "DejaVu Sans",
    "font.size": 8,
    "axes.labelsize": 9,
    "axes.titlesize": 9,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "lines.linewidth": 1.2,
    "lines.markersize": 4,
    "legend.fontsize": 7,
    "legend.frameon": False,
    "path.simplify": False,
}

COLORS = ("#2b8cbe", "#e6550d", "#31a354", "#756bb1", "#636363")

LABELS = {
    "ratio_renewal_prediction": "renewal / asymptotic",
    "ratio_mc_prediction": "Monte Carlo / asymptotic",
    "ratio_mc_renewal": "Monte Carlo / renewal",
    "ratio_renewal_tail": r"renewal / $\overline{F}$",
    "ratio_mc_tail": r"Monte Carlo / $\overline{F}$",
    "ratio_prediction_tail": r"asymptotic / $\overline{F}$",
    "ratio_mc_reference": "Monte Carlo / reference",
}


def ratio_figure(curves, title: str, ylabel: str, band: tuple[float, float] | None = None) -> Figure:
    """``curves`` is a list of ``(label, t, ratio)``; one line per series."""
    fig = Figure(figsize=(FIG_WIDTH, FIG_HEIGHT))
    ax = fig.add_subplot(1, 1, 1)
    for i, (label, t, ratio) in enumerate(curves):
        ax.plot(t, ratio, marker="o", color=COLORS[i % len(COLORS)], label=label or ylabel)
    if band is not None:
        ax.axhspan(band[0], band[1], color="#a8ddb5", alpha=0.35, lw=0, label="gate band")
    if ylabel.endswith("asymptotic") or ylabel.endswith("renewal") or ylabel.endswith("reference"):
        ax.axhline(1.0, color="0.4", lw=0.8, ls="--")
    if min(min(t) for _, t, _ in curves) > 0:
        ax.set_xscale("log")
    ax.set_xlabel("x")
    ax.set_ylabel(ylabel)
    ax.set_title(title)
    ax.legend(loc="best")
    fig.subplots_adjust(left=0.16, bottom=0.17, right=0.97, top=0.88)
    return fig


def save_svg(fig: Figure, path: Path) -> None:
    with matplotlib.rc_context(STYLE):
        fig.savefig(path, format="svg", metadata={"Date": None, "Creator": "potentia"})


def emit_plots(report_csv: str | Path, out_dir: str | Path | None = None) -> list[Path]:
    """One SVG per ratio column with at least two finite points, one line per series.

    An empty report writes nothing and logs a warning.
    """
    table = read_csv(report_csv)
    out = Path(out_dir) if out_dir is not None else Path(report_csv).parent
    scenario = table.meta.get("id", Path(report_csv).parent.name)
    gates = table.meta.get("gates", {})
    t_all = table.column("t")
    written: list[Path] = []
    if not table.rows:
        log.warning("report %s has no rows; no plot written", report_csv)
        return written
    series = [r.get("series", "") for r in table.rows]
    for name, _, _ in RATIOS:
        groups: dict[str, list[tuple[float, float]]] = {}
        for key, t, r in zip(series, t_all, table.column(name)):
            if math.isfinite(t) and math.isfinite(r):
                groups.setdefault(key, []).append((t, r))
        if sum(len(g) for g in groups.values()) < 2:
            continue
        curves = []
        for key in sorted(groups):
            t, r = zip(*sorted(groups[key]))
            curves.append((key, list(t), list(r)))
        band = None
        if name == "ratio_renewal_prediction" and "ratio_low" in gates:
            band = (gates["ratio_low"], gates["ratio_high"])
        with matplotlib.rc_context(STYLE):
            fig = ratio_figure(curves, scenario, LABELS[name], band)
        out.mkdir(parents=True, exist_ok=True)
        path = out / f"{name}.svg"
        save_svg(fig, path)
        written.append(path)
    if not written:
        log.warning("report %s has fewer than two finite points per ratio; no plot written", report_csv)
    return written
