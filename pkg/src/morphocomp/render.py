"""SVG spacetime diagrams: COM x in body lengths across, time in cycles down."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence
from xml.sax.saxutils import escape

import numpy as np

from .errors import MorphocompError
from .physics import Trace

PALETTE = ("#1b1b1b", "#d95f02", "#1b9e77", "#7570b3", "#e7298a", "#66a61e", "#e6ab02", "#a6761d")
BAND_FILLS = ("#f2f2f2", "#dfe9f5", "#f5e6d8", "#e3f0df")   # by pattern index
MAX_POINTS = 2000


class RenderError(MorphocompError):
    pass


@dataclass(frozen=True)
class Band:
    start: float          # cycles
    end: float
    s1: bool
    s2: bool


def stimulus_bands(trace: Trace) -> list[Band]:
    """Contiguous runs of a constant stimulus pattern."""
    if len(trace) == 0:
        return []
    bands = []
    start = 0.0
    for k in range(1, len(trace) + 1):
        if k == len(trace) or trace.s1[k] != trace.s1[k - 1] or trace.s2[k] != trace.s2[k - 1]:
            bands.append(Band(start, float(trace.cycle[k - 1]), bool(trace.s1[k - 1]), bool(trace.s2[k - 1])))
            if k < len(trace):
                start = float(trace.cycle[k - 1])
    return bands


def normalized(trace: Trace, body_length: float | None = None) -> tuple[np.ndarray, np.ndarray]:
    """(time in cycles, COM x displacement in body lengths), starting at (0, 0)."""
    bl = body_length or trace.body_length
    t = np.concatenate([[trace.cycle[0] - (trace.cycle[1] - trace.cycle[0]) if len(trace) > 1 else 0.0],
                        trace.cycle])
    t[0] = max(t[0], 0.0)
    x = np.concatenate([[trace.com0[0]], trace.com_x])
    return t, (x - trace.com0[0]) / bl


def _nice_ticks(lo: float, hi: float, n: int = 6) -> list[float]:
    span = max(hi - lo, 1e-9)
    raw = span / n
    mag = 10 ** np.floor(np.log10(raw))
    step = min((m * mag for m in (1, 2, 5, 10) if m * mag >= raw), default=mag * 10)
    first = np.ceil(lo / step) * step
    return [float(v) for v in np.arange(first, hi + step * 1e-6, step)]


def spacetime_svg(traces: Sequence[Trace], body_lengths: Sequence[float] | float | None = None,
                  labels: Sequence[str] | None = None, title: str = "",
                  width: int = 640, height: int = 520) -> str:
    """Render traces as one SVG; stimulus bands come from the first trace."""
    if not traces:
        raise RenderError("nothing to render: empty trace list")
    if any(len(t) == 0 for t in traces):
        raise RenderError("cannot render an empty trace")
    if body_lengths is None or isinstance(body_lengths, (int, float)):
        body_lengths = [body_lengths or t.body_length for t in traces]
    labels = list(labels) if labels else [f"trace {i}" for i in range(len(traces))]

    series = [normalized(t, bl) for t, bl in zip(traces, body_lengths)]
    t_max = max(float(t[-1]) for t, _ in series)
    x_lo = min(float(x.min()) for _, x in series)
    x_hi = max(float(x.max()) for _, x in series)
    pad = max(0.5, 0.05 * (x_hi - x_lo))
    x_lo, x_hi = x_lo - pad, x_hi + pad

    left, right, top, bottom = 70, 20, 40 if title else 20, 50
    pw, ph = width - left - right, height - top - bottom

    def sx(x: float) -> float:
        return left + (x - x_lo) / (x_hi - x_lo) * pw

    def sy(t: float) -> float:
        return top + t / t_max * ph

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
           f'viewBox="0 0 {width} {height}" data-time-unit="actuation-cycles" '
           f'data-position-unit="body-lengths" data-time-max="{t_max:g}" '
           f'data-position-min="{x_lo:.6g}" data-position-max="{x_hi:.6g}">']
    if title:
        out.append(f'<text x="{width / 2:.1f}" y="22" text-anchor="middle" font-size="14">{escape(title)}</text>')

    bands = stimulus_bands(traces[0])
    out.append('<g class="stimulus-bands">')
    for b in bands:
        idx = 2 * b.s1 + b.s2
        out.append(f'<rect class="stimulus-band" x="{left}" y="{sy(b.start):.2f}" width="{pw}" '
                   f'height="{sy(b.end) - sy(b.start):.2f}" fill="{BAND_FILLS[idx]}" '
                   f'data-s1="{int(b.s1)}" data-s2="{int(b.s2)}" data-start="{b.start:g}" data-end="{b.end:g}"/>')
        out.append(f'<text class="band-label" x="{left + pw - 4}" y="{sy(b.start) + 13:.2f}" '
                   f'text-anchor="end" font-size="10">s1={int(b.s1)} s2={int(b.s2)}</text>')
    for b in bands[1:]:
        out.append(f'<line class="stimulus-change" x1="{left}" x2="{left + pw}" y1="{sy(b.start):.2f}" '
                   f'y2="{sy(b.start):.2f}" stroke="#555" stroke-dasharray="4 3"/>')
    out.append('</g>')

    # axes
    out.append('<g class="axes" font-size="11">')
    out.append(f'<rect x="{left}" y="{top}" width="{pw}" height="{ph}" fill="none" stroke="#000"/>')
    for v in _nice_ticks(x_lo, x_hi):
        out.append(f'<line class="tick x" x1="{sx(v):.2f}" x2="{sx(v):.2f}" y1="{top + ph}" y2="{top + ph + 5}" stroke="#000"/>')
        out.append(f'<text x="{sx(v):.2f}" y="{top + ph + 18}" text-anchor="middle">{v:g}</text>')
    for v in _nice_ticks(0.0, t_max):
        out.append(f'<line class="tick t" x1="{left - 5}" x2="{left}" y1="{sy(v):.2f}" y2="{sy(v):.2f}" stroke="#000"/>')
        out.append(f'<text x="{left - 8}" y="{sy(v) + 4:.2f}" text-anchor="end">{v:g}</text>')
    out.append(f'<text class="axis-label x" x="{left + pw / 2:.1f}" y="{height - 10}" '
               f'text-anchor="middle">COM x (body lengths)</text>')
    out.append(f'<text class="axis-label t" transform="translate(18 {top + ph / 2:.1f}) rotate(-90)" '
               f'text-anchor="middle">time (actuation cycles)</text>')
    out.append('</g>')

    # stimulus indicators beside the first trajectory, drawn where the stimulus is present
    t0, x0 = series[0]
    out.append('<g class="stimulus-indicators" stroke-width="1">')
    for which, arr, off in (("s1", traces[0].s1, -0.2), ("s2", traces[0].s2, 0.2)):
        present = np.concatenate([[arr[0]], arr])
        pts = _polyline_points(t0, x0 + off, sx, sy, present)
        for seg in pts:
            out.append(f'<polyline class="stimulus-indicator {which}" fill="none" stroke="#888" points="{seg}"/>')
    out.append('</g>')

    out.append('<g class="trajectories" fill="none" stroke-width="1.8">')
    for i, ((t, x), lab) in enumerate(zip(series, labels)):
        (pts,) = _polyline_points(t, x, sx, sy, None)
        out.append(f'<polyline class="trajectory" data-label="{escape(lab)}" '
                   f'stroke="{PALETTE[i % len(PALETTE)]}" points="{pts}"/>')
    out.append('</g>')
    out.append('</svg>')
    return "\n".join(out) + "\n"


def _polyline_points(t: np.ndarray, x: np.ndarray, sx, sy, mask: np.ndarray | None) -> list[str]:
    """Downsampled point strings; with a mask, one string per run of True."""
    stride = max(1, len(t) // MAX_POINTS)
    keep = np.zeros(len(t), dtype=bool)
    keep[::stride] = True
    keep[-1] = True
    if mask is None:
        idx = np.flatnonzero(keep)
        return [" ".join(f"{sx(x[k]):.2f},{sy(t[k]):.2f}" for k in idx)]
    runs, cur = [], []
    for k in range(len(t)):
        if mask[k]:
            if keep[k] or not cur or k == len(t) - 1 or not mask[min(k + 1, len(t) - 1)]:
                cur.append(f"{sx(x[k]):.2f},{sy(t[k]):.2f}")
        elif cur:
            runs.append(" ".join(cur))
            cur = []
    if cur:
        runs.append(" ".join(cur))
    return [r for r in runs if " " in r]
