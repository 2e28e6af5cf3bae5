"""Static SVG line plots of experiment rows.

Hand-written SVG keeps the output byte-deterministic: no timestamps, no
random element ids, fixed number formatting.
"""

from __future__ import annotations

from xml.sax.saxutils import escape

from .errors import EmptyInput

WIDTH, HEIGHT = 640, 400
MARGIN = dict(left=70, right=160, top=40, bottom=50)
PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2", "#7f7f7f")


def _fmt(x: float) -> str:
    return f"{x:.2f}"


def _ticks(lo: float, hi: float, n: int = 5) -> list[float]:
    if hi == lo:
        return [lo]
    return [lo + (hi - lo) * k / (n - 1) for k in range(n)]


def emit_plot(rows, title: str | None = None) -> str:
    """One curve per policy with a mean +- (p95 - mean) band; returns SVG text."""
    rows = list(rows)
    if not rows:
        raise EmptyInput("no rows to plot")
    policies = list(dict.fromkeys(r.policy for r in rows))
    series = {p: sorted((r for r in rows if r.policy == p), key=lambda r: r.sweep) for p in policies}

    xs = [r.sweep for r in rows]
    ys = [y for r in rows for y in (r.mean, 2 * r.mean - r.p95, r.p95)]
    x_lo, x_hi = min(xs), max(xs)
    y_lo, y_hi = min(ys), max(ys)
    if x_hi == x_lo:
        x_lo, x_hi = x_lo - 0.5, x_hi + 0.5
    if y_hi == y_lo:
        y_lo, y_hi = y_lo - 0.5, y_hi + 0.5
    pw = WIDTH - MARGIN["left"] - MARGIN["right"]
    ph = HEIGHT - MARGIN["top"] - MARGIN["bottom"]

    def px(x):
        return MARGIN["left"] + (x - x_lo) / (x_hi - x_lo) * pw

    def py(y):
        return MARGIN["top"] + (y_hi - y) / (y_hi - y_lo) * ph

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="11">',
        f'<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
        f'<text x="{WIDTH / 2:.0f}" y="22" text-anchor="middle" font-size="14">'
        f"{escape(title or rows[0].experiment)}</text>",
    ]
    x0, y0 = MARGIN["left"], MARGIN["top"] + ph
    out.append(f'<path d="M{x0},{MARGIN["top"]} V{y0} H{x0 + pw}" stroke="black" fill="none"/>')
    for t in _ticks(x_lo, x_hi):
        out.append(f'<text x="{_fmt(px(t))}" y="{y0 + 16}" text-anchor="middle">{t:.4g}</text>')
    for t in _ticks(y_lo, y_hi):
        out.append(f'<text x="{x0 - 6}" y="{_fmt(py(t) + 4)}" text-anchor="end">{t:.4g}</text>')
        out.append(f'<line x1="{x0}" y1="{_fmt(py(t))}" x2="{x0 + pw}" y2="{_fmt(py(t))}" stroke="#dddddd"/>')

    for k, p in enumerate(policies):
        color = PALETTE[k % len(PALETTE)]
        pts = series[p]
        upper = [(px(r.sweep), py(r.p95)) for r in pts]
        lower = [(px(r.sweep), py(2 * r.mean - r.p95)) for r in reversed(pts)]
        band = " ".join(f"{_fmt(a)},{_fmt(b)}" for a, b in upper + lower)
        out.append(f'<polygon points="{band}" fill="{color}" fill-opacity="0.2" stroke="none"/>')
        line = " ".join(f"{_fmt(px(r.sweep))},{_fmt(py(r.mean))}" for r in pts)
        out.append(f'<polyline points="{line}" fill="none" stroke="{color}" stroke-width="1.5"/>')
        if len(pts) == 1:
            out.append(f'<circle cx="{_fmt(px(pts[0].sweep))}" cy="{_fmt(py(pts[0].mean))}" r="3" fill="{color}"/>')
        ly = MARGIN["top"] + 14 + 18 * k
        lx = WIDTH - MARGIN["right"] + 12
        out.append(f'<line x1="{lx}" y1="{ly}" x2="{lx + 20}" y2="{ly}" stroke="{color}" stroke-width="2"/>')
        out.append(f'<text class="legend" x="{lx + 26}" y="{ly + 4}">{escape(p)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
