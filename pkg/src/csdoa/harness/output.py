"""CSV and SVG writers.

CSV files start with the schema line ``# csdoa-csv v1``; floats are written
with 17 significant digits so they parse back to the same double.
"""

from __future__ import annotations

import csv
import io
import math
from pathlib import Path
from typing import Dict, Iterable, Sequence, Tuple
from xml.sax.saxutils import escape

import numpy as np

CSV_HEADER = "# csdoa-csv v1"


def format_value(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return f"{float(value):.17g}"
    return str(value)


def write_csv(path, columns: Sequence[str], rows: Iterable[Sequence]) -> int:
    """Write rows under the versioned header; returns the row count."""
    buf = io.StringIO()
    buf.write(CSV_HEADER + "\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    count = 0
    for row in rows:
        if len(row) != len(columns):
            raise ValueError(f"row has {len(row)} fields, expected {len(columns)}")
        writer.writerow([format_value(v) for v in row])
        count += 1
    Path(path).write_text(buf.getvalue(), encoding="utf-8")
    return count


def read_csv(path) -> Tuple[list, list]:
    """Return ``(columns, rows)`` with every field as a string."""
    text = Path(path).read_text(encoding="utf-8")
    header, _, body = text.partition("\n")
    if header != CSV_HEADER:
        raise ValueError(f"{path}: missing {CSV_HEADER!r} header")
    records = [r for r in csv.reader(io.StringIO(body)) if r]
    return records[0], records[1:]


_PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b")
_W, _H = 640, 420
_PAD = dict(left=70, right=150, top=40, bottom=50)


def _scale(lo, hi, a, b):
    if hi == lo:
        hi = lo + 1.0
    return lambda v: a + (v - lo) * (b - a) / (hi - lo)


def _frame(title: str, xlabel: str, ylabel: str) -> list:
    x0, y1 = _PAD["left"], _H - _PAD["bottom"]
    return [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_W}" height="{_H}" '
        f'font-family="sans-serif" font-size="12">',
        f'<rect width="{_W}" height="{_H}" fill="white"/>',
        f'<text x="{_W / 2:.1f}" y="22" text-anchor="middle" font-size="14">{escape(title)}</text>',
        f'<text x="{(x0 + _W - _PAD["right"]) / 2:.1f}" y="{_H - 12}" '
        f'text-anchor="middle">{escape(xlabel)}</text>',
        f'<text x="16" y="{(y1 + _PAD["top"]) / 2:.1f}" text-anchor="middle" '
        f'transform="rotate(-90 16 {(y1 + _PAD["top"]) / 2:.1f})">{escape(ylabel)}</text>',
    ]


def _axes(fx, fy, xticks, yticks, ylabels) -> list:
    x0, x1 = _PAD["left"], _W - _PAD["right"]
    y0, y1 = _PAD["top"], _H - _PAD["bottom"]
    out = [f'<rect x="{x0}" y="{y0}" width="{x1 - x0}" height="{y1 - y0}" '
           f'fill="none" stroke="black"/>']
    for t in xticks:
        out.append(f'<text x="{fx(t):.1f}" y="{y1 + 16}" text-anchor="middle">{t:g}</text>')
    for t, label in zip(yticks, ylabels):
        out.append(f'<line x1="{x0}" x2="{x1}" y1="{fy(t):.1f}" y2="{fy(t):.1f}" '
                   f'stroke="#ddd"/>')
        out.append(f'<text x="{x0 - 6}" y="{fy(t) + 4:.1f}" text-anchor="end">{label}</text>')
    return out


def _legend(labels) -> list:
    x = _W - _PAD["right"] + 12
    out = []
    for i, label in enumerate(labels):
        y = _PAD["top"] + 14 + 18 * i
        color = _PALETTE[i % len(_PALETTE)]
        out.append(f'<line x1="{x}" x2="{x + 18}" y1="{y - 4}" y2="{y - 4}" '
                   f'stroke="{color}" stroke-width="2"/>')
        out.append(f'<text x="{x + 24}" y="{y}">{escape(label)}</text>')
    return out


def line_chart_svg(
    series: Dict[str, Tuple[Sequence[float], Sequence[float]]],
    title: str,
    xlabel: str,
    ylabel: str,
    log_y: bool = False,
) -> str:
    """A multi-series line chart; non-finite or (for log axes) non-positive points are skipped."""
    def ok(y):
        return math.isfinite(y) and (y > 0 or not log_y)

    tr = (lambda y: math.log10(y)) if log_y else (lambda y: y)
    xs = [x for xv, yv in series.values() for x, y in zip(xv, yv) if ok(y)]
    ys = [tr(y) for xv, yv in series.values() for y in yv if ok(y)]
    if not xs:
        xs, ys = [0.0, 1.0], [0.0, 1.0]
    fx = _scale(min(xs), max(xs), _PAD["left"], _W - _PAD["right"])
    if log_y:
        lo, hi = math.floor(min(ys)), math.ceil(max(ys))
        yticks = list(range(lo, hi + 1))
        ylabels = [f"1e{t}" for t in yticks]
    else:
        lo, hi = min(ys), max(ys)
        yticks = list(np.linspace(lo, hi, 5))
        ylabels = [f"{t:.3g}" for t in yticks]
    fy = _scale(lo, hi, _H - _PAD["bottom"], _PAD["top"])
    out = _frame(title, xlabel, ylabel)
    out += _axes(fx, fy, sorted(set(xs)), yticks, ylabels)
    for i, (label, (xv, yv)) in enumerate(series.items()):
        pts = " ".join(f"{fx(x):.1f},{fy(tr(y)):.1f}" for x, y in zip(xv, yv) if ok(y))
        color = _PALETTE[i % len(_PALETTE)]
        out.append(f'<polyline points="{pts}" fill="none" stroke="{color}" stroke-width="2"/>')
    out += _legend(series.keys())
    out.append("</svg>")
    return "\n".join(out) + "\n"


def root_scatter_svg(groups: Dict[str, Sequence[complex]], title: str) -> str:
    """Roots in the z-plane with the unit circle; points outside |z| <= 2 are dropped."""
    lim = 2.0
    size = _H - _PAD["top"] - _PAD["bottom"]
    fx = _scale(-lim, lim, _PAD["left"], _PAD["left"] + size)
    fy = _scale(-lim, lim, _H - _PAD["bottom"], _PAD["top"])
    out = _frame(title, "Re z", "Im z")
    out.append(f'<rect x="{_PAD["left"]}" y="{_PAD["top"]}" width="{size}" height="{size}" '
               f'fill="none" stroke="black"/>')
    r = fx(1.0) - fx(0.0)
    out.append(f'<circle cx="{fx(0):.1f}" cy="{fy(0):.1f}" r="{r:.1f}" fill="none" '
               f'stroke="#888" stroke-dasharray="4 3"/>')
    for i, (label, roots) in enumerate(groups.items()):
        color = _PALETTE[i % len(_PALETTE)]
        for z in roots:
            if abs(z) <= lim:
                out.append(f'<circle cx="{fx(z.real):.1f}" cy="{fy(z.imag):.1f}" r="2" '
                           f'fill="{color}"/>')
    out += _legend(groups.keys())
    out.append("</svg>")
    return "\n".join(out) + "\n"


def write_text(path, text: str) -> None:
    Path(path).write_text(text, encoding="utf-8")
