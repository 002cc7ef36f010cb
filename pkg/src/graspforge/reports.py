"""Run reports: digests, histograms, and small deterministic SVG plots.

Every command writes a ``report.json`` embedding the resolved config, the
seed, input/output digests and summary statistics.  Wall-clock time goes to
the console only, so all emitted files are byte-reproducible.
"""

from __future__ import annotations

import hashlib
import json
from pathlib import Path

import numpy as np

__all__ = [
    "file_digest",
    "histogram",
    "svg_histogram",
    "svg_scatter",
    "write_report",
]


def file_digest(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(65536), b""):
            h.update(chunk)
    return h.hexdigest()


def histogram(values, bins: int = 10, value_range=None) -> dict:
    """Fixed-bin histogram; the top edge is inclusive so counts conserve."""
    values = np.asarray(list(values), dtype=np.float64)
    if value_range is None:
        lo = float(values.min()) if values.size else 0.0
        hi = float(values.max()) if values.size else 1.0
        if lo == hi:
            hi = lo + 1.0
    else:
        lo, hi = map(float, value_range)
    counts, edges = np.histogram(values, bins=bins, range=(lo, hi))
    return {
        "bin_edges": [float(e) for e in edges],
        "counts": [int(c) for c in counts],
        "n": int(values.size),
    }


def _svg_header(width, height):
    return (
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">'
        f'<rect width="{width}" height="{height}" fill="white"/>'
    )


def svg_histogram(hist: dict, path, title="", width=480, height=320) -> None:
    counts = hist["counts"]
    edges = hist["bin_edges"]
    peak = max(max(counts), 1)
    margin = 40
    plot_w = width - 2 * margin
    plot_h = height - 2 * margin
    parts = [_svg_header(width, height)]
    if title:
        parts.append(
            f'<text x="{width / 2:.1f}" y="20" text-anchor="middle" '
            f'font-family="sans-serif" font-size="13">{title}</text>'
        )
    n = len(counts)
    for i, c in enumerate(counts):
        bar_h = plot_h * c / peak
        x = margin + plot_w * i / n
        y = height - margin - bar_h
        parts.append(
            f'<rect x="{x:.2f}" y="{y:.2f}" width="{plot_w / n - 2:.2f}" '
            f'height="{bar_h:.2f}" fill="#4878a8"/>'
        )
    parts.append(
        f'<line x1="{margin}" y1="{height - margin}" x2="{width - margin}" '
        f'y2="{height - margin}" stroke="black"/>'
    )
    lo, hi = edges[0], edges[-1]
    parts.append(
        f'<text x="{margin}" y="{height - margin + 16}" font-family="sans-serif" '
        f'font-size="11">{lo:.3g}</text>'
        f'<text x="{width - margin}" y="{height - margin + 16}" text-anchor="end" '
        f'font-family="sans-serif" font-size="11">{hi:.3g}</text>'
    )
    parts.append("</svg>")
    Path(path).write_text("\n".join(parts) + "\n", encoding="utf-8")


def svg_scatter(points, colors, path, title="", width=480, height=480) -> None:
    """2-D scatter with a blue-to-red color ramp over ``colors`` in [0, 1]."""
    pts = np.asarray(points, dtype=np.float64)
    margin = 40
    if len(pts):
        lo = pts.min(axis=0)
        hi = pts.max(axis=0)
        span = np.where(hi - lo > 0, hi - lo, 1.0)
    else:
        lo, span = np.zeros(2), np.ones(2)
    parts = [_svg_header(width, height)]
    if title:
        parts.append(
            f'<text x="{width / 2:.1f}" y="20" text-anchor="middle" '
            f'font-family="sans-serif" font-size="13">{title}</text>'
        )
    plot = np.array([width - 2 * margin, height - 2 * margin])
    for p, c in zip(pts, colors):
        xy = margin + (p - lo) / span * plot
        c = min(max(float(c), 0.0), 1.0)
        r = int(round(255 * c))
        b = int(round(255 * (1.0 - c)))
        parts.append(
            f'<circle cx="{xy[0]:.2f}" cy="{height - xy[1]:.2f}" r="3" '
            f'fill="rgb({r},60,{b})" fill-opacity="0.8"/>'
        )
    parts.append("</svg>")
    Path(path).write_text("\n".join(parts) + "\n", encoding="utf-8")


def write_report(out_dir, command: str, config: dict, seed, inputs: dict,
                 outputs: dict, summary: dict, warnings=()) -> Path:
    """Deterministic report.json; returns its path."""
    out_dir = Path(out_dir)
    report = {
        "command": command,
        "config": config,
        "seed": seed,
        "inputs": {str(k): v for k, v in sorted(inputs.items())},
        "outputs": {str(k): v for k, v in sorted(outputs.items())},
        "summary": summary,
        "warnings": list(warnings),
    }
    path = out_dir / "report.json"
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(report, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path
