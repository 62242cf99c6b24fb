"""Deterministic CSV, text and SVG emission for analysis reports.

Everything here must be byte-identical across runs with the same inputs:
floats are formatted with %.10g and no timestamps are embedded.
"""

from __future__ import annotations

import csv
import hashlib
import json

import numpy as np


def fmt(x) -> str:
    if x is None:
        return "undefined"
    if isinstance(x, float) and np.isnan(x):
        return "nan"
    if isinstance(x, (float, np.floating)):
        return f"{float(x):.10g}"
    return str(x)


def write_csv(path, header: list[str], rows: list[list]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([fmt(v) for v in row])


def write_stamp(path, config: dict, seed) -> None:
    """Reproducibility stamp: hash of the effective config plus the seed."""
    payload = json.dumps(config, sort_keys=True, separators=(",", ":"))
    doc = {
        "config": config,
        "config_sha256": hashlib.sha256(payload.encode()).hexdigest(),
        "seed": seed,
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _svg_header(width: int, height: int) -> list[str]:
    return [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
    ]


def histogram_svg(path, counts: np.ndarray, edges: np.ndarray, title: str,
                  width: int = 480, height: int = 280) -> None:
    """Minimal bar chart; one bar per histogram bin."""
    counts = np.asarray(counts, dtype=float)
    edges = np.asarray(edges, dtype=float)
    margin = 40
    plot_w = width - 2 * margin
    plot_h = height - 2 * margin
    peak = counts.max() if counts.size and counts.max() > 0 else 1.0
    parts = _svg_header(width, height)
    parts.append(f'<text x="{width/2:.10g}" y="20" text-anchor="middle" font-size="13">{title}</text>')
    n = counts.size
    for i, c in enumerate(counts):
        bar_h = plot_h * (c / peak)
        x = margin + plot_w * i / n
        y = margin + plot_h - bar_h
        parts.append(
            f'<rect x="{x:.10g}" y="{y:.10g}" width="{plot_w / n:.10g}" '
            f'height="{bar_h:.10g}" fill="#4477aa" stroke="black" stroke-width="0.5"/>'
        )
    parts.append(
        f'<text x="{margin}" y="{height - 8}" font-size="11">{fmt(edges[0])}</text>'
    )
    parts.append(
        f'<text x="{width - margin}" y="{height - 8}" text-anchor="end" font-size="11">{fmt(edges[-1])}</text>'
    )
    parts.append("</svg>")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(parts) + "\n")


def curve_svg(path, xs, ys, title: str, width: int = 480, height: int = 280) -> None:
    """Single polyline plot for threshold curves and ROC-style figures."""
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    margin = 40
    plot_w = width - 2 * margin
    plot_h = height - 2 * margin
    x0, x1 = float(xs.min()), float(xs.max())
    y0, y1 = float(ys.min()), float(ys.max())
    xr = (x1 - x0) or 1.0
    yr = (y1 - y0) or 1.0
    pts = " ".join(
        f"{margin + plot_w * (x - x0) / xr:.10g},{margin + plot_h * (1 - (y - y0) / yr):.10g}"
        for x, y in zip(xs, ys)
    )
    parts = _svg_header(width, height)
    parts.append(f'<text x="{width/2:.10g}" y="20" text-anchor="middle" font-size="13">{title}</text>')
    parts.append(f'<polyline points="{pts}" fill="none" stroke="#cc3311" stroke-width="1.5"/>')
    parts.append(f'<text x="{margin}" y="{height - 8}" font-size="11">{fmt(x0)}</text>')
    parts.append(
        f'<text x="{width - margin}" y="{height - 8}" text-anchor="end" font-size="11">{fmt(x1)}</text>'
    )
    parts.append("</svg>")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(parts) + "\n")
