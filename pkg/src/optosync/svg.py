"""Self-contained SVG 1.1 rendering of sweep heatmaps and time series."""

from __future__ import annotations

import math
from xml.sax.saxutils import escape

import numpy as np

__all__ = ["render_heatmap", "render_series", "SIGN_COLORS"]

SIGN_COLORS = {"negative": "#2b5cc6", "positive": "#d23a2f", "marginal": "#9a9a9a"}
_FONT = 'font-family="sans-serif" font-size="12"'


def _num(v) -> str:
    return f"{v:.2f}".rstrip("0").rstrip(".")


def _tick(v) -> str:
    return f"{v:.4g}"


def _doc(width, height, body, title):
    head = ('<?xml version="1.0" encoding="UTF-8" standalone="yes"?>\n'
            f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{width}" '
            f'height="{height}" viewBox="0 0 {width} {height}">\n'
            f"<title>{escape(title)}</title>\n"
            f'<rect x="0" y="0" width="{width}" height="{height}" fill="#ffffff"/>\n')
    return head + "\n".join(body) + "\n</svg>\n"


def _ramp(t):
    """Linear blue-white-red ramp on t in [0, 1]."""
    lo, mid, hi = np.array([43, 92, 198]), np.array([247, 247, 247]), np.array([210, 58, 47])
    t = min(max(t, 0.0), 1.0)
    c = lo + (mid - lo) * (t / 0.5) if t < 0.5 else mid + (hi - mid) * ((t - 0.5) / 0.5)
    return "#%02x%02x%02x" % tuple(int(round(x)) for x in c)


def _text(x, y, s, anchor="middle", extra=""):
    return f'<text x="{_num(x)}" y="{_num(y)}" text-anchor="{anchor}" {_FONT}{extra}>{escape(s)}</text>'


def _axis_ticks(values, max_ticks=6):
    n = len(values)
    if n <= max_ticks:
        return list(range(n))
    step = math.ceil((n - 1) / (max_ticks - 1))
    idx = list(range(0, n, step))
    if idx[-1] != n - 1:
        idx.append(n - 1)
    return idx


def render_heatmap(field, style: str = "sign", title: str | None = None,
                   cell: int = 14) -> str:
    """Heatmap of a sweep field with lambda on the x axis and mu on the y axis.

    ``sign`` paints sync (negative exponent) blue, no-sync red and marginal
    gray; ``continuous`` uses a linear ramp with a colorbar.  Divergent cells
    are hatched in both styles.
    """
    if style not in ("sign", "continuous"):
        raise ValueError(f"unknown style {style!r}")
    g = field.grid
    mus, lams = g.mus, g.lambdas
    nm, nl = g.shape
    cw = max(4, min(cell, 600 // max(nl, 1)))
    ch = max(4, min(cell, 400 // max(nm, 1)))
    left, top = 70, 40
    pw, ph = cw * nl, ch * nm
    legend_w = 150
    width, height = left + pw + 30 + legend_w, top + ph + 60
    title = title or f"{field.kind} over (mu, lambda)"

    body = ['<defs><pattern id="hatch" patternUnits="userSpaceOnUse" width="6" height="6">'
            '<rect width="6" height="6" fill="#ffffff"/>'
            '<path d="M0,6 L6,0" stroke="#333333" stroke-width="1"/></pattern></defs>',
            _text(left + pw / 2, 22, title)]

    vals = np.asarray(field.values, dtype=float)
    finite = vals[np.isfinite(vals) & (field.status != "divergent")]
    vmin, vmax = (float(finite.min()), float(finite.max())) if finite.size else (0.0, 1.0)
    if style == "continuous" and vmin == vmax:
        vmin, vmax = vmin - 0.5, vmax + 0.5

    def colour(i, j):
        st = field.status[i, j]
        if st == "divergent" or (style == "continuous" and not math.isfinite(vals[i, j])):
            return "url(#hatch)"
        if style == "sign":
            cls = field.classification[i, j] if field.classification is not None else None
            if st == "marginal" or cls == "marginal":
                return SIGN_COLORS["marginal"]
            if cls is not None and cls != "":
                return SIGN_COLORS["negative"] if cls == "sync" else SIGN_COLORS["positive"]
            v = vals[i, j]
            if not math.isfinite(v) or v == 0:
                return SIGN_COLORS["marginal"]
            return SIGN_COLORS["negative"] if v < 0 else SIGN_COLORS["positive"]
        return _ramp((vals[i, j] - vmin) / (vmax - vmin))

    body.append('<g shape-rendering="crispEdges">')
    for i in range(nm):
        # mu grows upward
        y = top + (nm - 1 - i) * ch
        for j in range(nl):
            x = left + j * cw
            body.append(f'<rect x="{x}" y="{y}" width="{cw}" height="{ch}" fill="{colour(i, j)}"/>')
    body.append("</g>")
    body.append(f'<rect x="{left}" y="{top}" width="{pw}" height="{ph}" fill="none" stroke="#000000"/>')

    for j in _axis_ticks(lams):
        x = left + (j + 0.5) * cw
        body.append(f'<line x1="{_num(x)}" y1="{top + ph}" x2="{_num(x)}" y2="{top + ph + 4}" stroke="#000000"/>')
        body.append(_text(x, top + ph + 17, _tick(lams[j])))
    for i in _axis_ticks(mus):
        y = top + (nm - 1 - i + 0.5) * ch
        body.append(f'<line x1="{left - 4}" y1="{_num(y)}" x2="{left}" y2="{_num(y)}" stroke="#000000"/>')
        body.append(_text(left - 7, y + 4, _tick(mus[i]), anchor="end"))
    body.append(_text(left + pw / 2, top + ph + 40, "λ"))
    body.append(_text(18, top + ph / 2, "μ", extra=f' transform="rotate(-90 18 {_num(top + ph / 2)})"'))

    lx = left + pw + 30
    if style == "sign":
        entries = [(SIGN_COLORS["negative"], "exponent < 0 (sync)"),
                   (SIGN_COLORS["positive"], "exponent ≥ 0 (no sync)"),
                   (SIGN_COLORS["marginal"], "marginal"),
                   ("url(#hatch)", "divergent")]
        for k, (fill, label) in enumerate(entries):
            y = top + 20 * k
            body.append(f'<rect x="{lx}" y="{y}" width="14" height="14" fill="{fill}" stroke="#000000"/>')
            body.append(_text(lx + 20, y + 11, label, anchor="start"))
    else:
        bar_h = max(ph, 100)
        steps = 50
        for k in range(steps):
            y = top + bar_h * (1 - (k + 1) / steps)
            body.append(f'<rect x="{lx}" y="{_num(y)}" width="16" height="{_num(bar_h / steps + 0.5)}" '
                        f'fill="{_ramp((k + 0.5) / steps)}"/>')
        body.append(f'<rect x="{lx}" y="{top}" width="16" height="{_num(bar_h)}" fill="none" stroke="#000000"/>')
        body.append(_text(lx + 22, top + 10, _tick(vmax), anchor="start"))
        body.append(_text(lx + 22, top + bar_h, _tick(vmin), anchor="start"))
        body.append(f'<rect x="{lx}" y="{_num(top + bar_h + 12)}" width="14" height="14" fill="url(#hatch)" stroke="#000000"/>')
        body.append(_text(lx + 20, top + bar_h + 23, "divergent", anchor="start"))
        height = max(height, int(top + bar_h + 40))
    return _doc(width, height, body, title)


def render_series(times, series: dict, title: str = "", xlabel: str = "t",
                  width: int = 640, height: int = 320) -> str:
    """Line plot of one or more named series sharing a time axis."""
    times = np.asarray(times, dtype=float)
    palette = ("#2b5cc6", "#d23a2f", "#2a9d4b", "#8a4fbf", "#e08a1e", "#333333")
    left, right, top, bottom = 70, 20 + 130, 30, 45
    pw, ph = width - left - right, height - top - bottom
    data = {k: np.asarray(v, dtype=float) for k, v in series.items()}
    allv = np.concatenate([v[np.isfinite(v)] for v in data.values()] or [np.zeros(0)])
    ymin, ymax = (float(allv.min()), float(allv.max())) if allv.size else (0.0, 1.0)
    if ymin == ymax:
        ymin, ymax = ymin - 0.5, ymax + 0.5
    tmin, tmax = (float(times[0]), float(times[-1])) if len(times) else (0.0, 1.0)
    if tmin == tmax:
        tmax = tmin + 1.0

    def sx(t):
        return left + (t - tmin) / (tmax - tmin) * pw

    def sy(v):
        return top + (1 - (v - ymin) / (ymax - ymin)) * ph

    body = [_text(left + pw / 2, 18, title),
            f'<rect x="{left}" y="{top}" width="{pw}" height="{ph}" fill="none" stroke="#000000"/>']
    for k in range(5):
        tv = tmin + (tmax - tmin) * k / 4
        yv = ymin + (ymax - ymin) * k / 4
        body.append(_text(sx(tv), top + ph + 16, _tick(tv)))
        body.append(_text(left - 6, sy(yv) + 4, _tick(yv), anchor="end"))
    body.append(_text(left + pw / 2, height - 8, xlabel))
    # keep the document small on long runs
    stride = max(1, len(times) // 2000)
    for n, (name, v) in enumerate(data.items()):
        colour = palette[n % len(palette)]
        pts = [f"{_num(sx(t))},{_num(sy(y))}" for t, y in zip(times[::stride], v[::stride]) if math.isfinite(y)]
        if pts:
            body.append(f'<polyline fill="none" stroke="{colour}" stroke-width="1.2" points="{" ".join(pts)}"/>')
        ly = top + 14 + 18 * n
        body.append(f'<line x1="{left + pw + 12}" y1="{ly - 4}" x2="{left + pw + 32}" y2="{ly - 4}" '
                    f'stroke="{colour}" stroke-width="2"/>')
        body.append(_text(left + pw + 38, ly, name, anchor="start"))
    return _doc(width, height, body, title or "series")
