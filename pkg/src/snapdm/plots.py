"""Report rendering: deterministic SVG scatter plots plus matplotlib figures.

The SVG writer is hand-rolled so output bytes are reproducible (modulo an
optional timestamp comment) and structurally simple: one ``circle`` per
data point, exactly one ``path`` (the fitted curve when a report is given,
otherwise a polyline through the points), ``line`` elements for axes and
the critical-parameter marker.  The matplotlib side renders the richer
overview figure written by the pipeline alongside the delimited output.
"""

from __future__ import annotations

import datetime
from pathlib import Path

import numpy as np

from .errors import EmptySeries

# viewport geometry; tests recompute pixel positions from these constants
WIDTH = 640
HEIGHT = 420
MARGIN_LEFT = 62.0
MARGIN_RIGHT = 18.0
MARGIN_TOP = 18.0
MARGIN_BOTTOM = 48.0
PLOT_W = WIDTH - MARGIN_LEFT - MARGIN_RIGHT
PLOT_H = HEIGHT - MARGIN_TOP - MARGIN_BOTTOM
POINT_RADIUS = 3.5


def data_to_pixel(x, y, xlim, ylim):
    """Affine data->pixel transform used by the SVG writer."""
    fx = (x - xlim[0]) / (xlim[1] - xlim[0])
    fy = (y - ylim[0]) / (ylim[1] - ylim[0])
    return MARGIN_LEFT + fx * PLOT_W, MARGIN_TOP + (1.0 - fy) * PLOT_H


def _limits(values, pad_frac=0.06):
    lo, hi = float(np.min(values)), float(np.max(values))
    span = hi - lo
    pad = pad_frac * span if span > 0 else max(abs(lo), 1.0) * 0.5
    return lo - pad, hi + pad


def _fmt(v):
    return f"{v:.6g}"


def emit_plot(parameters, values, path, report=None, xlabel="parameter",
              ylabel="value", title="", no_timestamp=False):
    """Write a self-contained SVG scatter, optional tanh overlay and p_c marker."""
    p = np.asarray(parameters, dtype=float)
    y = np.asarray(values, dtype=float)
    if p.size == 0 or y.size == 0:
        raise EmptySeries("nothing to plot")
    if p.size != y.size:
        raise EmptySeries("parameter/value length mismatch")

    xs = [float(v) for v in p]
    if report is not None:
        xs.append(float(report.p_c))
    xlim = _limits(np.array(xs))
    ylo = [float(v) for v in y]
    if report is not None:
        ylo += [report.offset - abs(report.amplitude), report.offset + abs(report.amplitude)]
    ylim = _limits(np.array(ylo))

    parts = []
    parts.append(
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}">'
    )
    if not no_timestamp:
        stamp = datetime.datetime.now(datetime.timezone.utc).isoformat()
        parts.append(f"<!-- generated {stamp} -->")
    parts.append(f'<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>')

    x0, y0 = MARGIN_LEFT, MARGIN_TOP + PLOT_H
    x1, y1 = MARGIN_LEFT + PLOT_W, MARGIN_TOP
    parts.append(f'<line x1="{_fmt(x0)}" y1="{_fmt(y0)}" x2="{_fmt(x1)}" y2="{_fmt(y0)}" stroke="black"/>')
    parts.append(f'<line x1="{_fmt(x0)}" y1="{_fmt(y0)}" x2="{_fmt(x0)}" y2="{_fmt(y1)}" stroke="black"/>')

    for frac in (0.0, 0.25, 0.5, 0.75, 1.0):
        xv = xlim[0] + frac * (xlim[1] - xlim[0])
        yv = ylim[0] + frac * (ylim[1] - ylim[0])
        px, _ = data_to_pixel(xv, ylim[0], xlim, ylim)
        _, py = data_to_pixel(xlim[0], yv, xlim, ylim)
        parts.append(f'<line x1="{_fmt(px)}" y1="{_fmt(y0)}" x2="{_fmt(px)}" y2="{_fmt(y0 + 5)}" stroke="black"/>')
        parts.append(
            f'<text x="{_fmt(px)}" y="{_fmt(y0 + 18)}" font-size="11" text-anchor="middle">{_fmt(xv)}</text>'
        )
        parts.append(f'<line x1="{_fmt(x0 - 5)}" y1="{_fmt(py)}" x2="{_fmt(x0)}" y2="{_fmt(py)}" stroke="black"/>')
        parts.append(
            f'<text x="{_fmt(x0 - 8)}" y="{_fmt(py + 4)}" font-size="11" text-anchor="end">{_fmt(yv)}</text>'
        )

    parts.append(
        f'<text x="{_fmt(MARGIN_LEFT + PLOT_W / 2)}" y="{_fmt(HEIGHT - 10)}" font-size="13" '
        f'text-anchor="middle">{xlabel}</text>'
    )
    parts.append(
        f'<text x="14" y="{_fmt(MARGIN_TOP + PLOT_H / 2)}" font-size="13" text-anchor="middle" '
        f'transform="rotate(-90 14 {_fmt(MARGIN_TOP + PLOT_H / 2)})">{ylabel}</text>'
    )
    if title:
        parts.append(
            f'<text x="{_fmt(MARGIN_LEFT + PLOT_W / 2)}" y="{_fmt(MARGIN_TOP - 4)}" font-size="13" '
            f'text-anchor="middle">{title}</text>'
        )

    # exactly one path: the fitted curve if a report is present, else a polyline
    if report is not None:
        grid = np.linspace(xlim[0], xlim[1], 200)
        curve = report.amplitude * np.tanh((grid - report.p_c) / report.width) + report.offset
        pts = [data_to_pixel(gx, gy, xlim, ylim) for gx, gy in zip(grid, curve)]
    else:
        pts = [data_to_pixel(px_, py_, xlim, ylim) for px_, py_ in zip(p, y)]
    d = "M " + " L ".join(f"{_fmt(a)} {_fmt(b)}" for a, b in pts)
    parts.append(f'<path d="{d}" fill="none" stroke="#1565c0" stroke-width="1.5"/>')

    if report is not None:
        mx, _ = data_to_pixel(float(report.p_c), ylim[0], xlim, ylim)
        parts.append(
            f'<line x1="{_fmt(mx)}" y1="{_fmt(y1)}" x2="{_fmt(mx)}" y2="{_fmt(y0)}" '
            f'stroke="#c62828" stroke-dasharray="5 4"/>'
        )
        parts.append(
            f'<text x="{_fmt(mx + 4)}" y="{_fmt(y1 + 14)}" font-size="12" fill="#c62828">'
            f"p_c={_fmt(report.p_c)}</text>"
        )

    for px_, py_ in zip(p, y):
        cx, cy = data_to_pixel(px_, py_, xlim, ylim)
        parts.append(
            f'<circle cx="{_fmt(cx)}" cy="{_fmt(cy)}" r="{POINT_RADIUS}" '
            f'fill="#1565c0" fill-opacity="0.85"/>'
        )

    parts.append("</svg>")
    Path(path).write_text("\n".join(parts) + "\n")


def render_overview_png(embedding, path, reports=None, observables=(), title=""):
    """Matplotlib overview figure: leading coordinate, fit overlay, observables."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    n_obs = len(observables)
    fig, axes = plt.subplots(
        1 + (1 if n_obs else 0), 1, figsize=(7.0, 4.2 + (2.8 if n_obs else 0)),
        sharex=True, squeeze=False,
    )
    ax = axes[0][0]
    p = embedding.parameters
    phi1 = embedding.coordinates[:, 0]
    ax.plot(p, phi1, "o", color="#1565c0", label="leading coordinate")
    for name, rep in (reports or {}).items():
        grid = np.linspace(p.min(), p.max(), 300)
        if rep.method == "tanh-fit":
            curve = rep.amplitude * np.tanh((grid - rep.p_c) / rep.width) + rep.offset
            ax.plot(grid, curve, "-", color="#ef6c00", lw=1.4, label="tanh fit")
        ax.axvline(rep.p_c, color="#c62828", ls="--", lw=1.1,
                   label=f"{name}: p_c = {rep.p_c:.4g}")
    ax.set_ylabel("leading coordinate")
    ax.legend(fontsize=8)
    if title:
        ax.set_title(title)
    if n_obs:
        ax2 = axes[1][0]
        for series in observables:
            ax2.errorbar(series.parameters, series.values, yerr=series.stderr,
                         fmt="o-", ms=3, lw=1, capsize=2, label=series.name)
        ax2.set_ylabel("observable")
        ax2.legend(fontsize=8)
    axes[-1][0].set_xlabel("parameter")
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)
