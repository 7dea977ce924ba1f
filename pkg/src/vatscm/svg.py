"""Minimal deterministic SVG 1.1 line charts for monthly series.

Only what the report figures need: several lines with dash styles, an
optional shaded band, vertical markers, shaded month windows and point
labels. Coordinates are written with two decimals so output is stable.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence


def _esc(text: str) -> str:
    return (
        str(text).replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;").replace('"', "&quot;")
    )


def _f(x: float) -> str:
    return f"{x:.2f}"


@dataclass
class Line:
    label: str
    values: Sequence[float | None]
    color: str = "#1f3b73"
    dash: str | None = None
    width: float = 2.0


@dataclass
class Band:
    label: str
    lower: Sequence[float]
    upper: Sequence[float]
    color: str = "#9db4d6"
    opacity: float = 0.35


@dataclass
class Chart:
    title: str
    x_labels: Sequence[str]
    lines: list[Line] = field(default_factory=list)
    bands: list[Band] = field(default_factory=list)
    # (index, text) drawn as a dashed vertical rule after that x position
    markers: list[tuple[float, str]] = field(default_factory=list)
    # (first index, last index, text) shaded windows
    windows: list[tuple[int, int, str]] = field(default_factory=list)
    # (index, value, text) labels placed above a point
    point_labels: list[tuple[int, float, str]] = field(default_factory=list)
    y_label: str = ""
    zero_line: bool = False
    width: int = 820
    height: int = 440


def _nice_ticks(lo: float, hi: float, n: int = 6) -> list[float]:
    if hi <= lo:
        hi = lo + 1.0
    raw = (hi - lo) / max(n - 1, 1)
    mag = 10 ** math.floor(math.log10(raw))
    step = next(m * mag for m in (1, 2, 2.5, 5, 10) if m * mag >= raw)
    start = math.floor(lo / step) * step
    ticks = []
    v = start
    while v <= hi + step * 1e-9:
        ticks.append(round(v, 10))
        v += step
    return ticks


def render(chart: Chart) -> str:
    left, right, top, bottom = 64, 24, 44, 96
    W, H = chart.width, chart.height
    pw, ph = W - left - right, H - top - bottom
    n = len(chart.x_labels)

    vals: list[float] = []
    for ln in chart.lines:
        vals.extend(v for v in ln.values if v is not None)
    for b in chart.bands:
        vals.extend(b.lower)
        vals.extend(b.upper)
    vals.extend(v for _, v, _ in chart.point_labels)
    if chart.zero_line:
        vals.append(0.0)
    lo, hi = (min(vals), max(vals)) if vals else (0.0, 1.0)
    pad = (hi - lo) * 0.06 or 1.0
    ticks = _nice_ticks(lo - pad, hi + pad)
    y0, y1 = ticks[0], ticks[-1]

    def X(i: float) -> float:
        return left + (pw * i / (n - 1) if n > 1 else pw / 2)

    def Y(v: float) -> float:
        return top + ph * (1.0 - (v - y0) / (y1 - y0))

    out = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{W}" height="{H}" '
        f'viewBox="0 0 {W} {H}" font-family="Helvetica, Arial, sans-serif">',
        f"<title>{_esc(chart.title)}</title>",
        f'<rect x="0" y="0" width="{W}" height="{H}" fill="#ffffff"/>',
        f'<text x="{W / 2:.2f}" y="24" text-anchor="middle" font-size="15">{_esc(chart.title)}</text>',
    ]
    for a, b, text in chart.windows:
        xa, xb = X(a - 0.5 if a > 0 else a), X(b + 0.5 if b < n - 1 else b)
        out.append(f'<rect x="{_f(xa)}" y="{top}" width="{_f(xb - xa)}" height="{ph}" fill="#f2e3c6" opacity="0.6"/>')
        out.append(f'<text x="{_f((xa + xb) / 2)}" y="{top + 14}" text-anchor="middle" font-size="10" '
                   f'fill="#7a5a1e">{_esc(text)}</text>')
    for t in ticks:
        y = Y(t)
        out.append(f'<line x1="{left}" y1="{_f(y)}" x2="{left + pw}" y2="{_f(y)}" stroke="#e3e3e3" stroke-width="1"/>')
        out.append(f'<text x="{left - 6}" y="{_f(y + 4)}" text-anchor="end" font-size="11">{t:g}</text>')
    for i, lab in enumerate(chart.x_labels):
        x = X(i)
        out.append(f'<text x="{_f(x)}" y="{top + ph + 14}" text-anchor="end" font-size="10" '
                   f'transform="rotate(-45 {_f(x)} {top + ph + 14})">{_esc(lab)}</text>')
    out.append(f'<rect x="{left}" y="{top}" width="{pw}" height="{ph}" fill="none" stroke="#555555" stroke-width="1"/>')
    if chart.y_label:
        out.append(f'<text x="14" y="{_f(top + ph / 2)}" text-anchor="middle" font-size="11" '
                   f'transform="rotate(-90 14 {_f(top + ph / 2)})">{_esc(chart.y_label)}</text>')
    if chart.zero_line and y0 < 0 < y1:
        out.append(f'<line x1="{left}" y1="{_f(Y(0))}" x2="{left + pw}" y2="{_f(Y(0))}" stroke="#333333" stroke-width="1"/>')
    for pos, text in chart.markers:
        x = X(pos)
        out.append(f'<line x1="{_f(x)}" y1="{top}" x2="{_f(x)}" y2="{top + ph}" stroke="#888888" '
                   f'stroke-width="1" stroke-dasharray="3,3"/>')
        if text:
            out.append(f'<text x="{_f(x + 4)}" y="{top + ph - 6}" font-size="10" fill="#555555">{_esc(text)}</text>')
    for b in chart.bands:
        pts = [f"{_f(X(i))},{_f(Y(v))}" for i, v in enumerate(b.upper)]
        pts += [f"{_f(X(i))},{_f(Y(v))}" for i, v in reversed(list(enumerate(b.lower)))]
        out.append(f'<polygon points="{" ".join(pts)}" fill="{b.color}" opacity="{b.opacity}" stroke="none"/>')
    for ln in chart.lines:
        segs: list[list[str]] = [[]]
        for i, v in enumerate(ln.values):
            if v is None:
                if segs[-1]:
                    segs.append([])
                continue
            segs[-1].append(f"{_f(X(i))},{_f(Y(v))}")
        dash = f' stroke-dasharray="{ln.dash}"' if ln.dash else ""
        for seg in segs:
            if len(seg) == 1:
                x, y = seg[0].split(",")
                out.append(f'<circle cx="{x}" cy="{y}" r="2" fill="{ln.color}"/>')
            elif seg:
                out.append(f'<polyline points="{" ".join(seg)}" fill="none" stroke="{ln.color}" '
                           f'stroke-width="{ln.width:g}"{dash}/>')
    for i, v, text in chart.point_labels:
        out.append(f'<text x="{_f(X(i))}" y="{_f(Y(v) - 7)}" text-anchor="middle" font-size="10" '
                   f'fill="#222222">{_esc(text)}</text>')
    # legend below the axis labels
    lx, ly = left, H - 22
    entries = [(ln.label, ln.color, ln.dash, False) for ln in chart.lines if ln.label]
    entries += [(b.label, b.color, None, True) for b in chart.bands if b.label]
    for label, color, dash, filled in entries:
        if filled:
            out.append(f'<rect x="{lx}" y="{ly - 6}" width="22" height="10" fill="{color}" opacity="0.6"/>')
        else:
            d = f' stroke-dasharray="{dash}"' if dash else ""
            out.append(f'<line x1="{lx}" y1="{ly}" x2="{lx + 22}" y2="{ly}" stroke="{color}" stroke-width="2"{d}/>')
        out.append(f'<text x="{lx + 27}" y="{ly + 4}" font-size="11">{_esc(label)}</text>')
        lx += 34 + 6.5 * len(label)
    out.append("</svg>")
    return "\n".join(out) + "\n"
