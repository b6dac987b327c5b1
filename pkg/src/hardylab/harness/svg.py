"""Log-log scatter plots as standalone SVG text."""

import math
from xml.sax.saxutils import escape

W, H = 480, 360
LEFT, RIGHT, TOP, BOTTOM = 64, 16, 32, 48


def _ticks(lo, hi):
    a, b = math.floor(lo), math.ceil(hi)
    step = max(1, (b - a) // 6)
    return list(range(a, b + 1, step))


def loglog_svg(x, y, title="", xlabel="x", ylabel="y", fit=None, base=2.0):
    """Scatter of (x, y) on log axes; ``fit`` = (slope, intercept, residual) in log-``base`` units."""
    lx = [math.log(v, base) for v in x]
    ly = [math.log(v, base) for v in y]
    x0, x1 = min(lx), max(lx)
    y0, y1 = min(ly), max(ly)
    if x1 == x0:
        x0, x1 = x0 - 1, x1 + 1
    if y1 == y0:
        y0, y1 = y0 - 1, y1 + 1
    padx = 0.05 * (x1 - x0)
    pady = 0.08 * (y1 - y0)
    x0, x1, y0, y1 = x0 - padx, x1 + padx, y0 - pady, y1 + pady

    def px(v):
        return LEFT + (v - x0) / (x1 - x0) * (W - LEFT - RIGHT)

    def py(v):
        return H - BOTTOM - (v - y0) / (y1 - y0) * (H - TOP - BOTTOM)

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" '
        'font-family="sans-serif" font-size="11">',
        f'<rect x="{LEFT}" y="{TOP}" width="{W - LEFT - RIGHT}" height="{H - TOP - BOTTOM}" '
        'fill="none" stroke="#444"/>',
        f'<text x="{W / 2:.1f}" y="18" text-anchor="middle" font-size="13">{escape(title)}</text>',
        f'<text x="{W / 2:.1f}" y="{H - 10}" text-anchor="middle">{escape(xlabel)} (log{base:g})</text>',
        f'<text x="14" y="{H / 2:.1f}" text-anchor="middle" transform="rotate(-90 14 {H / 2:.1f})">'
        f"{escape(ylabel)} (log{base:g})</text>",
    ]
    for t in _ticks(x0, x1):
        if x0 <= t <= x1:
            out.append(f'<line x1="{px(t):.1f}" y1="{H - BOTTOM}" x2="{px(t):.1f}" y2="{H - BOTTOM + 4}" stroke="#444"/>')
            out.append(f'<text x="{px(t):.1f}" y="{H - BOTTOM + 16}" text-anchor="middle">{t}</text>')
    for t in _ticks(y0, y1):
        if y0 <= t <= y1:
            out.append(f'<line x1="{LEFT - 4}" y1="{py(t):.1f}" x2="{LEFT}" y2="{py(t):.1f}" stroke="#444"/>')
            out.append(f'<text x="{LEFT - 6}" y="{py(t) + 4:.1f}" text-anchor="end">{t}</text>')
    for a, b in zip(lx, ly):
        out.append(f'<circle cx="{px(a):.2f}" cy="{py(b):.2f}" r="3" fill="#1f77b4"/>')
    if fit is not None:
        slope, icpt, res = fit
        xa, xb = min(lx), max(lx)
        out.append(
            f'<line x1="{px(xa):.2f}" y1="{py(slope * xa + icpt):.2f}" x2="{px(xb):.2f}" '
            f'y2="{py(slope * xb + icpt):.2f}" stroke="#d62728" stroke-width="1.5"/>'
        )
        out.append(
            f'<text x="{W - RIGHT - 6}" y="{TOP + 16}" text-anchor="end" fill="#d62728">'
            f"slope {slope:.4f}, rms residual {res:.2e}</text>"
        )
    out.append("</svg>")
    return "\n".join(out) + "\n"
