"""Tiny deterministic SVG charts (polylines, bars and axes only)."""

from __future__ import annotations

import os
from xml.sax.saxutils import escape

import numpy as np

PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f")
W, H = 480, 320
LEFT, RIGHT, TOP, BOTTOM = 60, 120, 30, 45


def _n(v: float) -> str:
    return f"{v:.2f}"


def _ticks(lo: float, hi: float, n: int = 5):
    return [lo + (hi - lo) * k / (n - 1) for k in range(n)]


def _range(values):
    v = np.asarray([x for x in values if np.isfinite(x)], dtype=np.float64)
    if v.size == 0:
        return 0.0, 1.0
    lo, hi = float(v.min()), float(v.max())
    if hi - lo < 1e-12:
        lo, hi = lo - 1.0, hi + 1.0
    pad = 0.05 * (hi - lo)
    return lo - pad, hi + pad


def _frame(title, xlabel, ylabel, ylo, yhi, note):
    pw, ph = W - LEFT - RIGHT, H - TOP - BOTTOM
    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">']
    if note:
        out.append(f"<!-- {escape(note)} -->")
    out.append(f'<rect x="0" y="0" width="{W}" height="{H}" fill="white"/>')
    out.append(f'<text x="{W / 2:.0f}" y="18" text-anchor="middle" font-size="14">{escape(title)}</text>')
    out.append(f'<line x1="{LEFT}" y1="{TOP + ph}" x2="{LEFT + pw}" y2="{TOP + ph}" stroke="black"/>')
    out.append(f'<line x1="{LEFT}" y1="{TOP}" x2="{LEFT}" y2="{TOP + ph}" stroke="black"/>')
    for v in _ticks(ylo, yhi):
        y = TOP + ph * (yhi - v) / (yhi - ylo)
        out.append(f'<line x1="{LEFT - 4}" y1="{_n(y)}" x2="{LEFT}" y2="{_n(y)}" stroke="black"/>')
        out.append(f'<text x="{LEFT - 6}" y="{_n(y + 4)}" text-anchor="end" font-size="10">{v:.3g}</text>')
    out.append(f'<text x="{LEFT + pw / 2:.0f}" y="{H - 8}" text-anchor="middle" font-size="12">{escape(xlabel)}</text>')
    out.append(f'<text x="14" y="{TOP + ph / 2:.0f}" text-anchor="middle" font-size="12" '
               f'transform="rotate(-90 14 {TOP + ph / 2:.0f})">{escape(ylabel)}</text>')
    return out, pw, ph


def _legend(out, names):
    for k, name in enumerate(names):
        y = TOP + 14 * k + 6
        c = PALETTE[k % len(PALETTE)]
        out.append(f'<rect x="{W - RIGHT + 12}" y="{y - 8}" width="10" height="10" fill="{c}"/>')
        out.append(f'<text x="{W - RIGHT + 26}" y="{y + 1}" font-size="11">{escape(name)}</text>')


def line_chart(xs, series: dict, title="", xlabel="", ylabel="", note="") -> str:
    """One polyline per named series over shared x values."""
    xs = [float(x) for x in xs]
    ylo, yhi = _range([y for ys in series.values() for y in ys])
    out, pw, ph = _frame(title, xlabel, ylabel, ylo, yhi, note)
    xlo, xhi = (xs[0] - 1.0, xs[0] + 1.0) if len(xs) == 1 or xs[-1] == xs[0] else (min(xs), max(xs))
    px = [LEFT + pw * (x - xlo) / (xhi - xlo) for x in xs]
    for x, p in zip(xs, px):
        out.append(f'<line x1="{_n(p)}" y1="{TOP + ph}" x2="{_n(p)}" y2="{TOP + ph + 4}" stroke="black"/>')
        out.append(f'<text x="{_n(p)}" y="{TOP + ph + 16}" text-anchor="middle" font-size="10">{x:g}</text>')
    for k, (name, ys) in enumerate(series.items()):
        c = PALETTE[k % len(PALETTE)]
        pts = " ".join(f"{_n(p)},{_n(TOP + ph * (yhi - y) / (yhi - ylo))}" for p, y in zip(px, ys))
        out.append(f'<polyline points="{pts}" fill="none" stroke="{c}" stroke-width="2"/>')
    _legend(out, list(series))
    out.append("</svg>")
    return "\n".join(out) + "\n"


def bar_chart(values: dict, title="", ylabel="", note="") -> str:
    """One bar per named value, drawn from the axis minimum."""
    ylo, yhi = _range(list(values.values()) + [0.0])
    out, pw, ph = _frame(title, "", ylabel, ylo, yhi, note)
    n = max(len(values), 1)
    slot = pw / n
    base = TOP + ph * (yhi - min(max(0.0, ylo), yhi)) / (yhi - ylo)
    for k, (name, v) in enumerate(values.items()):
        y = TOP + ph * (yhi - v) / (yhi - ylo)
        x = LEFT + slot * k + 0.15 * slot
        top, height = min(y, base), abs(base - y)
        out.append(f'<rect x="{_n(x)}" y="{_n(top)}" width="{_n(0.7 * slot)}" height="{_n(height)}" '
                   f'fill="{PALETTE[k % len(PALETTE)]}"/>')
        out.append(f'<text x="{_n(x + 0.35 * slot)}" y="{TOP + ph + 16}" text-anchor="middle" '
                   f'font-size="10">{escape(name)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def write_svg(path, svg: str) -> None:
    try:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(svg)
    except OSError as exc:
        raise OSError(f"cannot write plot {os.fspath(path)!r}: {exc}") from exc
