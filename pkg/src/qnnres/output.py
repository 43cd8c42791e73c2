"""CSV and SVG writers for trace records."""
from __future__ import annotations

import csv
import math
import os
from dataclasses import dataclass
from pathlib import Path
from xml.sax.saxutils import escape

import numpy as np

from .dynamics import TraceRecord

SVG_WIDTH, SVG_HEIGHT = 800, 600
MARGIN_LEFT, MARGIN_RIGHT, MARGIN_TOP, MARGIN_BOTTOM = 90, 30, 50, 60
MAX_SVG_POINTS = 4000


def fmt(x: float) -> str:
    """12 significant digits, the canonical number format of emitted files."""
    return f"{x:.12g}"


def write_text_atomic(path, text: str) -> Path:
    path = Path(path)
    tmp = path.with_name(f".{path.name}.tmp")
    try:
        with open(tmp, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        tmp.unlink(missing_ok=True)
        raise
    return path


def csv_text(trace: TraceRecord) -> str:
    lines = [",".join(("step", "time") + trace.labels)]
    for step, time, vals in zip(trace.steps, trace.times, trace.values):
        lines.append(",".join([str(int(step)), fmt(time)] + [fmt(v) for v in vals]))
    return "\n".join(lines) + "\n"


def emit_csv(trace: TraceRecord, path) -> Path:
    return write_text_atomic(path, csv_text(trace))


def read_csv(path) -> TraceRecord:
    with open(path, encoding="utf-8", newline="") as fh:
        rows = list(csv.reader(fh))
    header, body = rows[0], rows[1:]
    if header[:2] != ["step", "time"]:
        raise ValueError(f"{path}: not a trace CSV (header starts {header[:2]})")
    steps = [int(r[0]) for r in body]
    times = [float(r[1]) for r in body]
    values = np.array([[float(x) for x in r[2:]] for r in body], dtype=float)
    return TraceRecord(tuple(header[2:]), steps, times, values.reshape(len(body), len(header) - 2))


@dataclass(frozen=True)
class SvgFrame:
    """Data-to-pixel mapping of the plot area."""

    t_min: float
    t_max: float
    v_min: float
    v_max: float

    @classmethod
    def fit(cls, t, v) -> "SvgFrame":
        t_min, t_max = float(np.min(t)), float(np.max(t))
        v_min, v_max = float(np.nanmin(v)), float(np.nanmax(v))
        if t_max == t_min:
            t_max = t_min + 1.0
        if v_max == v_min:
            pad = max(abs(v_min), 1.0) * 0.5
            v_min, v_max = v_min - pad, v_max + pad
        return cls(t_min, t_max, v_min, v_max)

    def x_px(self, t):
        span = SVG_WIDTH - MARGIN_LEFT - MARGIN_RIGHT
        return MARGIN_LEFT + (np.asarray(t, dtype=float) - self.t_min) / (self.t_max - self.t_min) * span

    def y_px(self, v):
        span = SVG_HEIGHT - MARGIN_TOP - MARGIN_BOTTOM
        return SVG_HEIGHT - MARGIN_BOTTOM - (np.asarray(v, dtype=float) - self.v_min) / (self.v_max - self.v_min) * span


def _thin(n: int, limit: int) -> np.ndarray:
    if n <= limit:
        return np.arange(n)
    idx = np.unique(np.linspace(0, n - 1, limit).round().astype(int))
    return idx


def svg_text(trace: TraceRecord, metric: str) -> str:
    """Single-series line plot; long series are thinned to ``MAX_SVG_POINTS``."""
    values = trace.series(metric)
    keep = _thin(len(values), MAX_SVG_POINTS)
    t, v = trace.times[keep], values[keep]
    frame = SvgFrame.fit(t, v)
    xs, ys = frame.x_px(t), frame.y_px(v)
    points = " ".join(f"{x:.2f},{y:.2f}" for x, y in zip(xs, ys) if math.isfinite(y))
    x0, x1 = MARGIN_LEFT, SVG_WIDTH - MARGIN_RIGHT
    y0, y1 = SVG_HEIGHT - MARGIN_BOTTOM, MARGIN_TOP
    title = escape(metric)
    parts = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{SVG_WIDTH}" height="{SVG_HEIGHT}" '
        f'viewBox="0 0 {SVG_WIDTH} {SVG_HEIGHT}">',
        f"<title>{title}</title>",
        '<rect width="100%" height="100%" fill="white"/>',
        f'<text x="{SVG_WIDTH / 2}" y="28" text-anchor="middle" font-family="sans-serif" font-size="18">{title}</text>',
        f'<line x1="{x0}" y1="{y0}" x2="{x1}" y2="{y0}" stroke="black"/>',
        f'<line x1="{x0}" y1="{y0}" x2="{x0}" y2="{y1}" stroke="black"/>',
        f'<text x="{x0}" y="{y0 + 20}" text-anchor="middle" font-family="sans-serif" font-size="12">{fmt(frame.t_min)}</text>',
        f'<text x="{x1}" y="{y0 + 20}" text-anchor="middle" font-family="sans-serif" font-size="12">{fmt(frame.t_max)}</text>',
        f'<text x="{x0 - 8}" y="{y0 + 4}" text-anchor="end" font-family="sans-serif" font-size="12">{fmt(frame.v_min)}</text>',
        f'<text x="{x0 - 8}" y="{y1 + 4}" text-anchor="end" font-family="sans-serif" font-size="12">{fmt(frame.v_max)}</text>',
        f'<text x="{(x0 + x1) / 2}" y="{SVG_HEIGHT - 15}" text-anchor="middle" font-family="sans-serif" font-size="13">time</text>',
        f'<polyline fill="none" stroke="#1f4e9c" stroke-width="1.5" points="{points}"/>',
        "</svg>",
    ]
    return "\n".join(parts) + "\n"


def emit_svg(trace: TraceRecord, metric: str, path) -> Path:
    if metric not in trace.labels:
        raise KeyError(f"metric {metric!r} not in trace")
    return write_text_atomic(path, svg_text(trace, metric))
