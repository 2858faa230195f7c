"""Round-trip-safe JSON/CSV/SVG emitters.

Every float is printed with 17 significant digits so that parsing the text
gives back the same double.  Non-finite values become the strings "inf",
"-inf" and "nan" (JSON has no literal for them).
"""

from __future__ import annotations

import json
import math
from pathlib import Path

import numpy as np

__all__ = ["fmt", "dumps_json", "write_json", "write_csv", "svg_polyline", "svg_histogram", "to_plain"]


def fmt(x: float) -> str:
    x = float(x)
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return format(x, ".17g")


def to_plain(obj):
    """Convert numpy scalars/arrays, tuples and dataclass-ish objects to JSON types."""
    if isinstance(obj, dict):
        return {str(k): to_plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [to_plain(v) for v in obj.tolist()]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return float(obj)
    if isinstance(obj, complex):
        return {"re": obj.real, "im": obj.imag}
    if obj is None or isinstance(obj, str):
        return obj
    if hasattr(obj, "to_dict"):
        return to_plain(obj.to_dict())
    return str(obj)


def _encode(obj, indent: int, level: int) -> str:
    pad = " " * (indent * (level + 1))
    end = " " * (indent * level)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{json.dumps(k)}: {_encode(v, indent, level + 1)}" for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, list):
        if not obj:
            return "[]"
        if all(not isinstance(v, (dict, list)) for v in obj):
            return "[" + ", ".join(_encode(v, indent, level + 1) for v in obj) + "]"
        items = [pad + _encode(v, indent, level + 1) for v in obj]
        return "[\n" + ",\n".join(items) + "\n" + end + "]"
    if isinstance(obj, bool) or obj is None:
        return json.dumps(obj)
    if isinstance(obj, float):
        s = fmt(obj)
        return json.dumps(s) if s in ("nan", "inf", "-inf") else s
    if isinstance(obj, int):
        return str(obj)
    return json.dumps(obj)


def dumps_json(obj, indent: int = 2) -> str:
    return _encode(to_plain(obj), indent, 0) + "\n"


def write_json(path, obj) -> None:
    Path(path).write_text(dumps_json(obj))


def write_csv(path, header, rows) -> None:
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(fmt(v) if isinstance(v, (float, np.floating)) else str(v) for v in row))
    Path(path).write_text("\n".join(lines) + "\n")


def svg_polyline(series: dict, title: str = "", xlabel: str = "", ylabel: str = "",
                 width: int = 480, height: int = 320) -> str:
    """Minimal line chart: ``series`` maps a label to (x, y) arrays."""
    pts = [(np.asarray(x, float), np.asarray(y, float)) for x, y in series.values()]
    xs = np.concatenate([p[0] for p in pts]) if pts else np.zeros(1)
    ys = np.concatenate([p[1] for p in pts]) if pts else np.zeros(1)
    x0, x1 = float(xs.min()), float(xs.max())
    y0, y1 = float(ys.min()), float(ys.max())
    x1 = x1 if x1 > x0 else x0 + 1
    y1 = y1 if y1 > y0 else y0 + 1
    m = 40

    def sx(v):
        return m + (v - x0) / (x1 - x0) * (width - 2 * m)

    def sy(v):
        return height - m - (v - y0) / (y1 - y0) * (height - 2 * m)

    colors = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e"]
    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}">',
           f'<text x="{width / 2}" y="20" text-anchor="middle">{title}</text>',
           f'<text x="{width / 2}" y="{height - 8}" text-anchor="middle">{xlabel}</text>',
           f'<text x="12" y="{height / 2}" transform="rotate(-90 12 {height / 2})" text-anchor="middle">{ylabel}</text>',
           f'<rect x="{m}" y="{m}" width="{width - 2 * m}" height="{height - 2 * m}" fill="none" stroke="#888"/>']
    for c, (label, (x, y)) in enumerate(series.items()):
        coords = " ".join(f"{sx(a):.2f},{sy(b):.2f}" for a, b in zip(np.asarray(x, float), np.asarray(y, float)))
        out.append(f'<polyline fill="none" stroke="{colors[c % len(colors)]}" points="{coords}"/>')
        out.append(f'<text x="{width - m}" y="{m + 14 * (c + 1)}" text-anchor="end" '
                   f'fill="{colors[c % len(colors)]}">{label}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def svg_histogram(counts, edges, title: str = "", width: int = 480, height: int = 320) -> str:
    counts = np.asarray(counts, float)
    edges = np.asarray(edges, float)
    m = 40
    top = counts.max() if counts.size and counts.max() > 0 else 1.0
    span = edges[-1] - edges[0] if edges[-1] > edges[0] else 1.0
    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}">',
           f'<text x="{width / 2}" y="20" text-anchor="middle">{title}</text>']
    for c, a, b in zip(counts, edges[:-1], edges[1:]):
        x = m + (a - edges[0]) / span * (width - 2 * m)
        w = (b - a) / span * (width - 2 * m)
        h = c / top * (height - 2 * m)
        out.append(f'<rect x="{x:.2f}" y="{height - m - h:.2f}" width="{w:.2f}" height="{h:.2f}" '
                   'fill="#1f77b4" stroke="white"/>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
