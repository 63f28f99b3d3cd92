"""Tiny deterministic SVG line-chart writer (axes, polylines, legend)."""
from __future__ import annotations

from xml.sax.saxutils import escape

PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b")
WIDTH, HEIGHT = 640, 420
LEFT, RIGHT, TOP, BOTTOM = 70, 170, 40, 50


def _fmt(x: float) -> str:
    return f"{x:.2f}"


def _ticks(lo: float, hi: float, n: int = 5) -> list[float]:
    if hi == lo:
        return [lo]
    return [lo + (hi - lo) * i / (n - 1) for i in range(n)]


def line_chart(series: dict[str, list[tuple[float, float]]], title: str, xlabel: str, ylabel: str) -> str:
    """Render ``{label: [(x, y), ...]}`` as an SVG document string.

    Labels are drawn in insertion order; the same input always yields the
    same bytes.
    """
    xs = [x for pts in series.values() for x, _ in pts]
    ys = [y for pts in series.values() for _, y in pts]
    xlo, xhi = (min(xs), max(xs)) if xs else (0.0, 1.0)
    ylo, yhi = (min(ys), max(ys)) if ys else (0.0, 1.0)
    if yhi - ylo < 1e-9:
        ylo, yhi = ylo - 0.5e-3, yhi + 0.5e-3
    pad = 0.05 * (yhi - ylo)
    ylo, yhi = ylo - pad, yhi + pad
    if xhi == xlo:
        xhi = xlo + 1.0
    pw, ph = WIDTH - LEFT - RIGHT, HEIGHT - TOP - BOTTOM

    def sx(x):
        return LEFT + (x - xlo) / (xhi - xlo) * pw

    def sy(y):
        return TOP + (1 - (y - ylo) / (yhi - ylo)) * ph

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">',
        f'<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
        f'<text x="{WIDTH / 2:.1f}" y="22" text-anchor="middle" font-size="14">{escape(title)}</text>',
        f'<line x1="{LEFT}" y1="{TOP + ph}" x2="{LEFT + pw}" y2="{TOP + ph}" stroke="black"/>',
        f'<line x1="{LEFT}" y1="{TOP}" x2="{LEFT}" y2="{TOP + ph}" stroke="black"/>',
    ]
    for x in _ticks(xlo, xhi):
        out.append(f'<line x1="{_fmt(sx(x))}" y1="{TOP + ph}" x2="{_fmt(sx(x))}" y2="{TOP + ph + 5}" stroke="black"/>')
        out.append(f'<text x="{_fmt(sx(x))}" y="{TOP + ph + 18}" text-anchor="middle">{x:g}</text>')
    for y in _ticks(ylo, yhi):
        out.append(f'<line x1="{LEFT - 5}" y1="{_fmt(sy(y))}" x2="{LEFT}" y2="{_fmt(sy(y))}" stroke="black"/>')
        out.append(f'<text x="{LEFT - 8}" y="{_fmt(sy(y) + 4)}" text-anchor="end">{y:.4f}</text>')
    out.append(f'<text x="{LEFT + pw / 2:.1f}" y="{HEIGHT - 12}" text-anchor="middle">{escape(xlabel)}</text>')
    out.append(
        f'<text x="16" y="{TOP + ph / 2:.1f}" text-anchor="middle" '
        f'transform="rotate(-90 16 {TOP + ph / 2:.1f})">{escape(ylabel)}</text>'
    )
    for i, (label, pts) in enumerate(series.items()):
        color = PALETTE[i % len(PALETTE)]
        coords = " ".join(f"{_fmt(sx(x))},{_fmt(sy(y))}" for x, y in pts)
        out.append(f'<polyline fill="none" stroke="{color}" stroke-width="2" points="{coords}"/>')
        ly = TOP + 10 + 20 * i
        lx = LEFT + pw + 15
        out.append(f'<line x1="{lx}" y1="{ly}" x2="{lx + 20}" y2="{ly}" stroke="{color}" stroke-width="2"/>')
        out.append(f'<text x="{lx + 26}" y="{ly + 4}">{escape(label)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
