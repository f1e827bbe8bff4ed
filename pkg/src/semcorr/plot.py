"""Dependency-free SVG line plots for cumulative error curves."""

from __future__ import annotations

from xml.sax.saxutils import escape

WIDTH, HEIGHT = 480, 360
MARGIN = 48


def _fmt(x):
    return f"{x:.2f}"


def pck_svg(thresholds, values, title="Correspondence accuracy", xlabel="geodesic error",
            ylabel="fraction of vertices"):
    """SVG with one polyline through ``(threshold, value)``; y spans ``[0, 1]``."""
    t = [float(x) for x in thresholds]
    v = [float(x) for x in values]
    x_max = max(t[-1] if t else 1.0, 1e-12)
    pw, ph = WIDTH - 2 * MARGIN, HEIGHT - 2 * MARGIN

    def sx(x):
        return MARGIN + pw * x / x_max

    def sy(y):
        return MARGIN + ph * (1.0 - y)

    pts = " ".join(f"{_fmt(sx(a))},{_fmt(sy(b))}" for a, b in zip(t, v))
    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}">',
        f'<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
        f'<text x="{WIDTH / 2}" y="{MARGIN / 2}" text-anchor="middle" font-size="14">'
        f"{escape(title)}</text>",
        f'<line x1="{MARGIN}" y1="{sy(0)}" x2="{MARGIN + pw}" y2="{sy(0)}" stroke="black"/>',
        f'<line x1="{MARGIN}" y1="{sy(0)}" x2="{MARGIN}" y2="{sy(1)}" stroke="black"/>',
    ]
    for frac in (0.0, 0.5, 1.0):
        out.append(f'<text x="{MARGIN - 6}" y="{_fmt(sy(frac) + 4)}" text-anchor="end" '
                   f'font-size="10">{frac:g}</text>')
        out.append(f'<text x="{_fmt(sx(frac * x_max))}" y="{_fmt(sy(0) + 14)}" '
                   f'text-anchor="middle" font-size="10">{frac * x_max:.3g}</text>')
    out.append(f'<text x="{WIDTH / 2}" y="{HEIGHT - 8}" text-anchor="middle" font-size="12">'
               f"{escape(xlabel)}</text>")
    out.append(f'<text x="14" y="{HEIGHT / 2}" text-anchor="middle" font-size="12" '
               f'transform="rotate(-90 14 {HEIGHT / 2})">{escape(ylabel)}</text>')
    if pts:
        out.append(f'<polyline class="curve" fill="none" stroke="#1f77b4" stroke-width="2" '
                   f'points="{pts}"/>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
