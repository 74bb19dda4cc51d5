"""SVG figures from an :class:`~qapsat.analysis.Analysis`.

Output bytes are deterministic for identical input (fixed SVG hash salt,
no date metadata).
"""

from __future__ import annotations

import logging
import math
from pathlib import Path

import numpy as np

from .analysis import Analysis, phase_parameter, sigmoid, success_curve

log = logging.getLogger(__name__)

FIGURES = (
    "fig2_satisfaction.svg",
    "fig3_critical_m.svg",
    "fig4_phase_collapse.svg",
    "fig5_bnb_effort.svg",
    "fig6_rots_success.svg",
    "fig7_critical_relation.svg",
)


def _facets(count):
    cols = min(count, 4)
    rows = math.ceil(count / cols)
    return rows, cols


def _save(fig, path):
    fig.savefig(path, format="svg", metadata={"Date": None})


def _faceted_curves(plt, curves, column, ylabel, fits=None, model=None):
    ns = sorted(curves["n"].unique())
    rows, cols = _facets(len(ns))
    fig, axes = plt.subplots(rows, cols, figsize=(3.2 * cols, 2.6 * rows), squeeze=False, sharey=True)
    cmap = plt.get_cmap("viridis")
    m1s = sorted(curves["m1"].unique())
    for ax in axes.ravel()[len(ns):]:
        ax.set_visible(False)
    for ax, n in zip(axes.ravel(), ns):
        sub = curves[curves["n"] == n]
        for idx, m1 in enumerate(m1s):
            cell = sub[sub["m1"] == m1].sort_values("m")
            if cell.empty:
                continue
            color = cmap(idx / max(len(m1s) - 1, 1))
            ax.plot(cell["m"], cell[column], ".", ms=3, color=color, label=f"m1={m1}")
            if fits is not None:
                f = fits[(fits.model == model) & (fits.n == n) & (fits.m1 == m1) & fits.error.isna()]
                if not f.empty:
                    r = f.iloc[0]
                    grid = np.linspace(cell["m"].min(), cell["m"].max(), 200)
                    yfit = success_curve(r, grid) if model == "rots_sigmoid" else sigmoid(grid, r.L, r.r, r.m_t)
                    ax.plot(grid, yfit, "-", lw=0.8, color=color)
        ax.set_title(f"n = {n}", fontsize=9)
        ax.set_xlabel("m")
    for row in axes:
        row[0].set_ylabel(ylabel)
    axes[0, 0].legend(fontsize=6, ncol=2)
    fig.tight_layout()
    return fig


def emit_plots(result: Analysis, out_dir) -> list[Path]:
    """Render the figure set; figures lacking data are skipped with a warning."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    out = Path(out_dir)
    written = []
    curves, fits = result.curves, result.fits
    if curves is None or curves.empty:
        log.warning("no curves to plot")
        return written
    out.mkdir(parents=True, exist_ok=True)
    with matplotlib.rc_context({"svg.hashsalt": "qapsat", "svg.fonttype": "path"}):
        # satisfaction proportion
        fig = _faceted_curves(plt, curves, "p_satisfied", "P(satisfied)")
        _save(fig, out / FIGURES[0])
        plt.close(fig)
        written.append(out / FIGURES[0])

        # critical clause count against m1 and n
        logit = fits[(fits.model == "logit") & fits.error.isna()]
        if not logit.empty:
            fig, (a1, a2) = plt.subplots(1, 2, figsize=(9, 3.6))
            for n, g in logit.groupby("n"):
                g = g.sort_values("m1")
                a1.plot(g["m1"], g["m_c"], "o-", ms=3, label=f"n={n}")
            for m1, g in logit.groupby("m1"):
                g = g.sort_values("n")
                a2.plot(g["n"], g["m_c"], "o-", ms=3, label=f"m1={m1}")
            a1.set_xlabel("m1")
            a2.set_xlabel("n")
            a1.set_ylabel("m_c")
            a1.legend(fontsize=6)
            a2.legend(fontsize=6)
            fig.tight_layout()
            _save(fig, out / FIGURES[1])
            plt.close(fig)
            written.append(out / FIGURES[1])
        else:
            log.warning("no logit fits: skipping %s", FIGURES[1])

        # collapse onto the phase parameter
        if result.power is not None:
            fig, ax = plt.subplots(figsize=(5, 3.6))
            for (n, m1), g in curves.groupby(["n", "m1"]):
                x = phase_parameter(n, m1, g["m"].to_numpy(), result.power)
                ax.plot(x, g["p_satisfied"], "-", lw=0.6, alpha=0.7)
            ax.axvline(result.power.k, color="k", ls="--", lw=0.8)
            ax.set_xlim(0, 3 * result.power.k)
            ax.set_xlabel("m / (n^a1 m1^a2)")
            ax.set_ylabel("P(satisfied)")
            ax.set_title(f"k = {result.power.k:.3f}", fontsize=9)
            fig.tight_layout()
            _save(fig, out / FIGURES[2])
            plt.close(fig)
            written.append(out / FIGURES[2])
        else:
            log.warning("no power-model fit: skipping %s", FIGURES[2])

        fig = _faceted_curves(plt, curves, "mean_nodes", "mean B&B nodes", fits, "bnb_sigmoid")
        _save(fig, out / FIGURES[3])
        plt.close(fig)
        written.append(out / FIGURES[3])

        if "mean_success" in curves:
            fig = _faceted_curves(plt, curves, "mean_success", "ROTS success rate", fits, "rots_sigmoid")
            _save(fig, out / FIGURES[4])
            plt.close(fig)
            written.append(out / FIGURES[4])
        else:
            log.warning("no tabu search data: skipping %s", FIGURES[4])

        panels = [(m, f[f.error.isna()]) for m in ("bnb_sigmoid", "rots_sigmoid")
                  for f in [fits[fits.model == m]] if not f[f.error.isna()].empty]
        if not logit.empty and panels:
            fig, axes = plt.subplots(1, len(panels), figsize=(4.5 * len(panels), 3.6), squeeze=False)
            mc = {(r.n, r.m1): r.m_c for r in logit.itertuples()}
            for ax, (model, sel) in zip(axes[0], panels):
                for n, g in sel.groupby("n"):
                    pts = [(mc[(n, r.m1)], r.m_t) for r in g.itertuples() if (n, r.m1) in mc]
                    if pts:
                        x, y = zip(*pts)
                        ax.plot(x, y, "o", ms=3, label=f"n={n}")
                ax.set_xlabel("m_c (satisfaction)")
                ax.set_ylabel("m_t")
                ax.set_title("B&B nodes" if model == "bnb_sigmoid" else "ROTS success rate", fontsize=9)
                ax.legend(fontsize=6)
            fig.tight_layout()
            _save(fig, out / FIGURES[5])
            plt.close(fig)
            written.append(out / FIGURES[5])
        else:
            log.warning("no effort fits: skipping %s", FIGURES[5])
    return written
