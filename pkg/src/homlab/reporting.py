"""Deterministic report emission: CSV tables, a schema-validated summary
JSON, and hand-emitted SVG line charts (no plotting dependency).

CSV bodies are byte-identical across reruns with the same config and seed:
floats are written with shortest round-trip repr, the header carries the
package version and never a timestamp.  Wall-clock readings go only into
the summary.
"""

from __future__ import annotations

import json
import math
from importlib import resources
from pathlib import Path

import jsonschema
import numpy as np

from . import __version__


def to_native(obj):
    """Recursively convert numpy scalars/arrays to plain Python types."""
    if isinstance(obj, dict):
        return {str(k): to_native(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_native(v) for v in obj]
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    if isinstance(obj, np.ndarray):
        return to_native(obj.tolist())
    return obj


def format_value(v) -> str:
    v = to_native(v)
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return repr(v)
    return str(v)


def write_csv(path: Path, columns, rows, subcommand: str) -> None:
    lines = [f"# homlab {__version__} {subcommand}"]
    lines.append(",".join(columns))
    for row in rows:
        lines.append(",".join(format_value(v) for v in row))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def load_schema() -> dict:
    with resources.files("homlab.data").joinpath("summary.schema.json").open() as fh:
        return json.load(fh)


def write_summary(path: Path, summary: dict) -> None:
    summary = to_native(summary)
    jsonschema.validate(summary, load_schema())
    path.write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n",
                    encoding="utf-8")


# ---------------------------------------------------------------------------
# minimal SVG line charts
# ---------------------------------------------------------------------------

_W, _H, _PAD = 640, 440, 56
_COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")


def _ticks(lo, hi, log):
    if log:
        lo_e = math.floor(math.log10(lo))
        hi_e = math.ceil(math.log10(hi))
        return [10.0**e for e in range(lo_e, hi_e + 1)]
    span = hi - lo or 1.0
    step = 10.0 ** math.floor(math.log10(span / 4.0))
    for mult in (1, 2, 5, 10):
        if span / (step * mult) <= 6:
            step *= mult
            break
    t0 = math.ceil(lo / step) * step
    out = []
    while t0 <= hi + 1e-12 * span:
        out.append(t0)
        t0 += step
    return out


def write_svg_lines(path: Path, series: dict, xlabel: str, ylabel: str,
                    title: str, loglog: bool = False) -> None:
    """series: name -> list of (x, y) pairs; y <= 0 points are dropped in
    log mode."""
    pts_all = [(x, y) for pts in series.values() for (x, y) in pts
               if not loglog or (x > 0 and y > 0)]
    if not pts_all:
        return
    xs = [p[0] for p in pts_all]
    ys = [p[1] for p in pts_all]
    xlo, xhi = min(xs), max(xs)
    ylo, yhi = min(ys), max(ys)
    if xlo == xhi:
        xlo, xhi = xlo * 0.9 or -1.0, xhi * 1.1 or 1.0
    if ylo == yhi:
        ylo, yhi = ylo * 0.9 or -1.0, yhi * 1.1 or 1.0

    def tx(x):
        if loglog:
            f = (math.log10(x) - math.log10(xlo)) / (math.log10(xhi) - math.log10(xlo))
        else:
            f = (x - xlo) / (xhi - xlo)
        return _PAD + f * (_W - 2 * _PAD)

    def ty(y):
        if loglog:
            f = (math.log10(y) - math.log10(ylo)) / (math.log10(yhi) - math.log10(ylo))
        else:
            f = (y - ylo) / (yhi - ylo)
        return _H - _PAD - f * (_H - 2 * _PAD)

    parts = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{_W}" height="{_H}" '
             f'viewBox="0 0 {_W} {_H}" font-family="sans-serif" font-size="12">',
             f'<rect width="{_W}" height="{_H}" fill="white"/>',
             f'<text x="{_W / 2}" y="20" text-anchor="middle" font-size="14">{title}</text>']
    ax = f'stroke="#333" stroke-width="1"'
    parts.append(f'<line x1="{_PAD}" y1="{_H - _PAD}" x2="{_W - _PAD}" y2="{_H - _PAD}" {ax}/>')
    parts.append(f'<line x1="{_PAD}" y1="{_PAD}" x2="{_PAD}" y2="{_H - _PAD}" {ax}/>')
    for t in _ticks(xlo, xhi, loglog):
        if t < xlo * (1 - 1e-9) or t > xhi * (1 + 1e-9):
            continue
        parts.append(f'<line x1="{tx(t)}" y1="{_H - _PAD}" x2="{tx(t)}" y2="{_H - _PAD + 5}" {ax}/>')
        parts.append(f'<text x="{tx(t)}" y="{_H - _PAD + 18}" text-anchor="middle">{t:g}</text>')
    for t in _ticks(ylo, yhi, loglog):
        if t < ylo * (1 - 1e-9) or t > yhi * (1 + 1e-9):
            continue
        parts.append(f'<line x1="{_PAD - 5}" y1="{ty(t)}" x2="{_PAD}" y2="{ty(t)}" {ax}/>')
        parts.append(f'<text x="{_PAD - 8}" y="{ty(t) + 4}" text-anchor="end">{t:g}</text>')
    parts.append(f'<text x="{_W / 2}" y="{_H - 12}" text-anchor="middle">{xlabel}</text>')
    parts.append(f'<text x="16" y="{_H / 2}" text-anchor="middle" '
                 f'transform="rotate(-90 16 {_H / 2})">{ylabel}</text>')
    for idx, (name, pts) in enumerate(series.items()):
        pts = [(x, y) for (x, y) in pts if not loglog or (x > 0 and y > 0)]
        if not pts:
            continue
        color = _COLORS[idx % len(_COLORS)]
        path_d = " ".join(f"{tx(x):.2f},{ty(y):.2f}" for x, y in sorted(pts))
        parts.append(f'<polyline points="{path_d}" fill="none" stroke="{color}" stroke-width="1.5"/>')
        for x, y in pts:
            parts.append(f'<circle cx="{tx(x):.2f}" cy="{ty(y):.2f}" r="2.5" fill="{color}"/>')
        parts.append(f'<text x="{_W - _PAD + 4}" y="{_PAD + 16 * idx}" fill="{color}">{name}</text>')
    parts.append("</svg>")
    path.write_text("\n".join(parts) + "\n", encoding="utf-8")
