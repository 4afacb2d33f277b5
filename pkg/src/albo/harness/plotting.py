"""Convergence plots.

:func:`emit_plot` writes a dependency-free SVG with exactly one ``<polyline>``
per series. The ``render_*`` functions draw the same data, and the
one-dimensional penalty sweep, with matplotlib for PNG/PDF reports.
"""

from __future__ import annotations

import math
from pathlib import Path
from typing import Sequence
from xml.sax.saxutils import escape

import numpy as np

from .experiment import AggregateResult

# NoMax black, WithMax gray; anything else cycles through the rest.
SERIES_COLORS = {"nomax": "#000000", "withmax": "#888888"}
FALLBACK_COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e")

WIDTH, HEIGHT = 640, 400
MARGIN = {"left": 70, "right": 20, "top": 20, "bottom": 50}


def series_color(label: str, index: int) -> str:
    key = label.lower()
    for name, color in SERIES_COLORS.items():
        if name in key.split("/") or key == name:
            return color
    return FALLBACK_COLORS[index % len(FALLBACK_COLORS)]


def _vertices(traj: np.ndarray) -> list[tuple[float, float]]:
    """``(eval, value)`` pairs, starting at eval 0 with the first defined value."""
    pts = [(float(k), float(v)) for k, v in enumerate(traj, 1) if not math.isnan(v)]
    if pts:
        pts.insert(0, (0.0, pts[0][1]))
    return pts


def _nice_ticks(lo: float, hi: float, n: int = 5) -> list[float]:
    if hi <= lo:
        return [lo]
    raw = (hi - lo) / n
    mag = 10 ** math.floor(math.log10(raw))
    step = min((s * mag for s in (1, 2, 5, 10) if s * mag >= raw), default=raw)
    start = math.ceil(lo / step) * step
    return [start + i * step for i in range(int((hi - start) / step + 1e-9) + 1)]


def emit_plot(results: Sequence[AggregateResult], labels: Sequence[str], path) -> Path:
    """Write mean best-feasible trajectories as an SVG line chart."""
    if not results:
        raise ValueError("no results to plot")
    if len(labels) != len(results):
        raise ValueError("need one label per result")
    budget = results[0].budget
    if any(r.budget != budget for r in results):
        raise ValueError("results must share the same evaluation budget")

    series = [_vertices(r.mean_trajectory) for r in results]
    values = [v for pts in series for _, v in pts]
    y_lo, y_hi = (min(values), max(values)) if values else (0.0, 1.0)
    if y_hi - y_lo < 1e-12:
        pad = max(abs(y_lo) * 0.1, 1e-3)
        y_lo, y_hi = y_lo - pad, y_hi + pad
    plot_w = WIDTH - MARGIN["left"] - MARGIN["right"]
    plot_h = HEIGHT - MARGIN["top"] - MARGIN["bottom"]

    def sx(x):
        return MARGIN["left"] + plot_w * x / max(budget, 1)

    def sy(y):
        return MARGIN["top"] + plot_h * (y_hi - y) / (y_hi - y_lo)

    out = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}">',
        f'<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
        f'<g stroke="black" stroke-width="1">'
        f'<line x1="{sx(0):.2f}" y1="{sy(y_lo):.2f}" x2="{sx(budget):.2f}" y2="{sy(y_lo):.2f}"/>'
        f'<line x1="{sx(0):.2f}" y1="{sy(y_lo):.2f}" x2="{sx(0):.2f}" y2="{sy(y_hi):.2f}"/></g>',
        '<g font-family="sans-serif" font-size="11" fill="black">',
    ]
    for t in _nice_ticks(0, budget):
        out.append(f'<text x="{sx(t):.2f}" y="{sy(y_lo) + 16:.2f}" text-anchor="middle">{t:g}</text>')
    for t in _nice_ticks(y_lo, y_hi):
        out.append(f'<text x="{sx(0) - 6:.2f}" y="{sy(t) + 4:.2f}" text-anchor="end">{t:.4g}</text>')
    out.append(
        f'<text x="{sx(budget / 2):.2f}" y="{HEIGHT - 12}" text-anchor="middle">evaluations</text>'
    )
    out.append(
        f'<text x="16" y="{sy((y_lo + y_hi) / 2):.2f}" text-anchor="middle" '
        f'transform="rotate(-90 16 {sy((y_lo + y_hi) / 2):.2f})">mean best feasible objective</text>'
    )
    out.append("</g>")
    for i, (pts, label) in enumerate(zip(series, labels)):
        color = series_color(label, i)
        coords = " ".join(f"{sx(x):.2f},{sy(y):.2f}" for x, y in pts)
        out.append(
            f'<polyline fill="none" stroke="{color}" stroke-width="2" points="{coords}">'
            f"<title>{escape(label)}</title></polyline>"
        )
        ly = MARGIN["top"] + 14 * (i + 1)
        out.append(
            f'<text x="{WIDTH - MARGIN["right"] - 4}" y="{ly}" text-anchor="end" '
            f'font-family="sans-serif" font-size="11" fill="{color}">{escape(label)}</text>'
        )
    out.append("</svg>")
    path = Path(path)
    path.write_text("\n".join(out) + "\n")
    return path


def _pyplot():
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    return plt


def render_convergence(results: Sequence[AggregateResult], labels: Sequence[str], path) -> Path:
    """Matplotlib version of :func:`emit_plot`, with a one-standard-error band."""
    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(6.4, 4.0))
    for i, (r, label) in enumerate(zip(results, labels)):
        k = np.arange(1, r.budget + 1)
        color = series_color(label, i)
        ax.plot(k, r.mean_trajectory, color=color, lw=1.8, label=label)
        se = np.nan_to_num(r.stderr_trajectory)
        ax.fill_between(
            k, r.mean_trajectory - se, r.mean_trajectory + se, color=color, alpha=0.15, lw=0
        )
    ax.set_xlabel("evaluations")
    ax.set_ylabel("mean best feasible objective")
    ax.legend(frameon=False)
    fig.tight_layout()
    path = Path(path)
    fig.savefig(path, dpi=120, metadata={"Software": None} if path.suffix == ".png" else None)
    plt.close(fig)
    return path


def render_penalty_sweep(path, rhos: Sequence[float] = (10.0, 1.0, 0.1)) -> Path:
    """One panel per rho of the reduced no-max counterexample objective on [-1, 1]."""
    from ..problems import counterexample_minimizer, counterexample_penalized

    plt = _pyplot()
    x = np.linspace(-1.0, 1.0, 401)
    fig, axes = plt.subplots(1, len(rhos), figsize=(3.0 * len(rhos), 2.8), sharex=True)
    for ax, rho in zip(np.atleast_1d(axes), rhos):
        ax.plot(x, counterexample_penalized(x, rho), color="black", lw=1.5)
        xs = counterexample_minimizer(rho)
        ax.axvline(0.5, color="#888888", ls="--", lw=1)
        ax.plot([xs], [counterexample_penalized(xs, rho)], "o", color="black", ms=4)
        ax.set_title(f"rho = {rho:g}, argmin = {xs:.3f}", fontsize=9)
        ax.set_xlabel("x")
    fig.tight_layout()
    path = Path(path)
    fig.savefig(path, dpi=120, metadata={"Software": None} if path.suffix == ".png" else None)
    plt.close(fig)
    return path
