"""Minimal SVG line charts drawn straight from CSV tables.

Two table layouts are understood:

* wide: the first column is x and every other numeric column is a curve;
* long: a column named ``series`` labels the rows, the x column is the first
  numeric column after it and each selected y column gives one curve per
  series value.

Output depends only on the CSV content and the options, so deleting an SVG
and plotting again reproduces it byte for byte.
"""

from __future__ import annotations

import csv
import math
from pathlib import Path
from xml.sax.saxutils import escape

PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf")
DASHES = ("", "6,3", "2,2", "8,3,2,3")

WIDTH, HEIGHT = 640, 420
MARGIN = dict(left=72, right=170, top=40, bottom=56)


def _float(s):
    try:
        return float(s)
    except (TypeError, ValueError):
        return math.nan


def read_table(path):
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise ValueError(f"{path} is empty")
    return rows[0], rows[1:]


def _nice_step(span, target=5):
    raw = span / target
    mag = 10 ** math.floor(math.log10(raw))
    for m in (1, 2, 5, 10):
        if raw <= m * mag:
            return m * mag
    return 10 * mag


def _ticks(lo, hi, log):
    if log:
        a, b = math.floor(math.log10(lo)), math.ceil(math.log10(hi))
        if a == b:
            b = a + 1
        stride = max(1, math.ceil((b - a) / 8))
        return [10.0**e for e in range(a, b + 1, stride)], 10.0**a, 10.0**b
    if hi == lo:
        lo, hi = lo - 0.5, hi + 0.5
    step = _nice_step(hi - lo)
    start = math.floor(lo / step) * step
    stop = math.ceil(hi / step) * step
    n = int(round((stop - start) / step))
    return [start + i * step for i in range(n + 1)], start, stop


def _fmt_tick(v, log):
    if log:
        return f"1e{int(round(math.log10(v)))}"
    if v == 0:
        return "0"
    return f"{v:.4g}"


def _auto_log(values):
    vals = [v for v in values if math.isfinite(v)]
    if not vals or min(vals) <= 0:
        return False
    return max(vals) / min(vals) > 100


def line_chart(curves, title="", xlabel="x", ylabel="y", logx=False, logy=False) -> str:
    """Render ``{label: (xs, ys)}`` as an SVG document.

    Points that are not finite, or not positive on a log axis, are dropped
    and break the polyline.
    """
    def keep(x, y):
        return (math.isfinite(x) and math.isfinite(y) and (not logx or x > 0) and (not logy or y > 0))

    pts = [(x, y) for xs, ys in curves.values() for x, y in zip(xs, ys) if keep(x, y)]
    if not pts:
        raise ValueError("nothing to plot")
    xt, x0, x1 = _ticks(min(p[0] for p in pts), max(p[0] for p in pts), logx)
    yt, y0, y1 = _ticks(min(p[1] for p in pts), max(p[1] for p in pts), logy)
    pw = WIDTH - MARGIN["left"] - MARGIN["right"]
    ph = HEIGHT - MARGIN["top"] - MARGIN["bottom"]

    def tx(x):
        f = (math.log10(x) - math.log10(x0)) / (math.log10(x1) - math.log10(x0)) if logx else (x - x0) / (x1 - x0)
        return MARGIN["left"] + f * pw

    def ty(y):
        f = (math.log10(y) - math.log10(y0)) / (math.log10(y1) - math.log10(y0)) if logy else (y - y0) / (y1 - y0)
        return MARGIN["top"] + (1 - f) * ph

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">',
        f'<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
        f'<text x="{MARGIN["left"] + pw / 2:.2f}" y="22" text-anchor="middle" font-size="14">{escape(title)}</text>',
    ]
    for v in xt:
        X = tx(v)
        out.append(f'<line x1="{X:.2f}" y1="{MARGIN["top"]}" x2="{X:.2f}" y2="{MARGIN["top"] + ph}" stroke="#e5e5e5"/>')
        out.append(f'<text x="{X:.2f}" y="{MARGIN["top"] + ph + 18}" text-anchor="middle">{_fmt_tick(v, logx)}</text>')
    for v in yt:
        Y = ty(v)
        out.append(f'<line x1="{MARGIN["left"]}" y1="{Y:.2f}" x2="{MARGIN["left"] + pw}" y2="{Y:.2f}" stroke="#e5e5e5"/>')
        out.append(f'<text x="{MARGIN["left"] - 6}" y="{Y + 4:.2f}" text-anchor="end">{_fmt_tick(v, logy)}</text>')
    out.append(f'<rect x="{MARGIN["left"]}" y="{MARGIN["top"]}" width="{pw}" height="{ph}" fill="none" stroke="black"/>')
    out.append(f'<text x="{MARGIN["left"] + pw / 2:.2f}" y="{HEIGHT - 12}" text-anchor="middle">{escape(xlabel)}</text>')
    out.append(
        f'<text x="16" y="{MARGIN["top"] + ph / 2:.2f}" text-anchor="middle" '
        f'transform="rotate(-90 16 {MARGIN["top"] + ph / 2:.2f})">{escape(ylabel)}</text>'
    )
    for idx, (label, (xs, ys)) in enumerate(curves.items()):
        color = PALETTE[idx % len(PALETTE)]
        dash = DASHES[(idx // len(PALETTE)) % len(DASHES)]
        dash_attr = f' stroke-dasharray="{dash}"' if dash else ""
        segment = []
        segments = []
        for x, y in zip(xs, ys):
            if keep(x, y):
                segment.append(f"{tx(x):.2f},{ty(y):.2f}")
            elif segment:
                segments.append(segment)
                segment = []
        if segment:
            segments.append(segment)
        for seg in segments:
            if len(seg) == 1:
                cx, cy = seg[0].split(",")
                out.append(f'<circle cx="{cx}" cy="{cy}" r="2.5" fill="{color}"/>')
            else:
                out.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.6"{dash_attr} points="{" ".join(seg)}"/>')
        ly = MARGIN["top"] + 12 + 18 * idx
        lx = MARGIN["left"] + pw + 12
        out.append(f'<line x1="{lx}" y1="{ly}" x2="{lx + 24}" y2="{ly}" stroke="{color}" stroke-width="2"{dash_attr}/>')
        out.append(f'<text x="{lx + 30}" y="{ly + 4}">{escape(str(label))}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def curves_from_table(header, rows, x=None, y=None):
    """Pick x and y columns from a CSV table; returns (curves, x_name, y_names)."""
    cols = {name: [r[i] if i < len(r) else "" for r in rows] for i, name in enumerate(header)}
    long = "series" in cols
    numeric = [h for h in header if h != "series"]
    if not numeric:
        raise ValueError("no numeric columns")
    x = x or numeric[0]
    if x not in cols:
        raise ValueError(f"unknown x column {x!r}")
    ys = list(y) if y else [h for h in numeric if h != x]
    for name in ys:
        if name not in cols:
            raise ValueError(f"unknown y column {name!r}")
    xs = [_float(v) for v in cols[x]]
    curves = {}
    if long:
        labels = list(dict.fromkeys(cols["series"]))
        for name in ys:
            vals = [_float(v) for v in cols[name]]
            for lab in labels:
                idx = [i for i, s in enumerate(cols["series"]) if s == lab]
                key = lab if len(ys) == 1 else f"{lab}:{name}"
                curves[key] = ([xs[i] for i in idx], [vals[i] for i in idx])
    else:
        for name in ys:
            curves[name] = (xs, [_float(v) for v in cols[name]])
    return curves, x, ys


def plot_csv(csv_path, svg_path, x=None, y=None, logx="auto", logy="auto", title=None, ylabel=None) -> Path:
    """Draw the selected columns of `csv_path` into `svg_path`.

    `logx`/`logy` accept ``True``, ``False`` or ``"auto"`` (log scale when all
    values are positive and span more than two decades).
    """
    header, rows = read_table(csv_path)
    curves, xname, ynames = curves_from_table(header, rows, x, y)
    if logx == "auto":
        logx = _auto_log([v for xs, _ in curves.values() for v in xs])
    if logy == "auto":
        logy = _auto_log([v for _, ys in curves.values() for v in ys])
    svg = line_chart(
        curves,
        title=Path(csv_path).stem if title is None else title,
        xlabel=xname,
        ylabel=ylabel or (ynames[0] if len(ynames) == 1 else "value"),
        logx=bool(logx),
        logy=bool(logy),
    )
    svg_path = Path(svg_path)
    svg_path.write_text(svg)
    return svg_path


__all__ = ["curves_from_table", "line_chart", "plot_csv", "read_table"]
