"""
SVG rendering for correlation heatmaps and per-anthem octave / beat-position
histograms. Plain SVG 1.1 text; identical input gives identical bytes.
matplotlib only supplies the diverging colour scale.
"""

import math
from typing import Dict, Mapping, Optional, Sequence
from xml.sax.saxutils import escape, quoteattr

import numpy as np
import pandas as pd
from matplotlib import colormaps
from matplotlib.colors import to_hex

from .score_model import Performance

DIVERGING_CMAP = "RdBu_r"
FONT = 'font-family="Helvetica, Arial, sans-serif"'
BAR_FILL = "#4c72b0"

CELL = 56
ROW_LABEL_WIDTH = 170
COLUMN_LABEL_HEIGHT = 90
MARGIN = 16


class SvgBuilder:
    def __init__(self, width: float, height: float, title: str = ""):
        self.parts = [
            '<?xml version="1.0" encoding="UTF-8" standalone="no"?>\n',
            f'<svg version="1.1" xmlns="http://www.w3.org/2000/svg" width="{width:.0f}" height="{height:.0f}" '
            f'viewBox="0 0 {width:.0f} {height:.0f}">\n',
        ]
        if title:
            self.parts.append(f"<title>{escape(title)}</title>\n")
        self.parts.append(f'<rect x="0" y="0" width="{width:.0f}" height="{height:.0f}" fill="#ffffff"/>\n')

    def rect(self, x: float, y: float, width: float, height: float, fill: str, tooltip: Optional[str] = None):
        if tooltip:
            self.parts.append(f'<rect x="{x:.1f}" y="{y:.1f}" width="{width:.1f}" height="{height:.1f}" '
                              f'fill="{fill}" stroke="#ffffff"><title>{escape(tooltip)}</title></rect>\n')
        else:
            self.parts.append(f'<rect x="{x:.1f}" y="{y:.1f}" width="{width:.1f}" height="{height:.1f}" '
                              f'fill="{fill}" stroke="#ffffff"/>\n')

    def text(self, x: float, y: float, string: str, size: int = 11, anchor: str = "start",
             fill: str = "#222222", rotate: Optional[float] = None):
        transform = f' transform="rotate({rotate:.0f} {x:.1f} {y:.1f})"' if rotate is not None else ""
        self.parts.append(f'<text x="{x:.1f}" y="{y:.1f}" font-size="{size}" text-anchor={quoteattr(anchor)} '
                          f'fill="{fill}" {FONT}{transform}>{escape(string)}</text>\n')

    def line(self, x1: float, y1: float, x2: float, y2: float, stroke: str = "#444444"):
        self.parts.append(f'<line x1="{x1:.1f}" y1="{y1:.1f}" x2="{x2:.1f}" y2="{y2:.1f}" stroke="{stroke}"/>\n')

    def to_bytes(self) -> bytes:
        return ("".join(self.parts) + "</svg>\n").encode("utf-8")


def diverging_color(value: float) -> str:
    """Hex colour for a value in [-1, 1]: -1 cold, 0 neutral, +1 warm."""
    clipped = min(1.0, max(-1.0, float(value)))
    return to_hex(colormaps[DIVERGING_CMAP]((clipped + 1.0) / 2.0))


# ---------------------
# Heatmap
# ---------------------
def render_heatmap_svg(matrix: pd.DataFrame, row_labels: Optional[Sequence[str]] = None,
                       column_labels: Optional[Sequence[str]] = None, title: str = "") -> bytes:
    values = matrix.to_numpy(dtype=float)
    if values.size == 0:
        raise ValueError("cannot render an empty matrix")
    if np.isnan(values).any():
        raise ValueError("heatmap matrix contains NaN entries")
    rows = list(row_labels) if row_labels is not None else [str(r) for r in matrix.index]
    columns = list(column_labels) if column_labels is not None else [str(c) for c in matrix.columns]
    if len(rows) != values.shape[0] or len(columns) != values.shape[1]:
        raise ValueError("label counts do not match the matrix shape")

    top = MARGIN + (24 if title else 0) + COLUMN_LABEL_HEIGHT
    left = MARGIN + ROW_LABEL_WIDTH
    width = left + CELL * len(columns) + MARGIN
    height = top + CELL * len(rows) + MARGIN
    svg = SvgBuilder(width, height, title)
    if title:
        svg.text(width / 2, MARGIN + 14, title, size=14, anchor="middle")

    for j, label in enumerate(columns):
        x = left + CELL * j + CELL / 2
        svg.text(x, top - 8, label, anchor="start", rotate=-45)
    for i, label in enumerate(rows):
        svg.text(left - 8, top + CELL * i + CELL / 2 + 4, label, anchor="end")
        for j, label_j in enumerate(columns):
            value = values[i, j]
            x, y = left + CELL * j, top + CELL * i
            svg.rect(x, y, CELL, CELL, diverging_color(value), tooltip=f"{label} x {label_j}: {value:.3f}")
            ink = "#ffffff" if abs(value) > 0.6 else "#222222"
            svg.text(x + CELL / 2, y + CELL / 2 + 4, f"{value:.2f}", size=11, anchor="middle", fill=ink)
    return svg.to_bytes()


# ---------------------
# Distributions
# ---------------------
def octave_histogram(perf: Performance) -> Dict[int, int]:
    """Note count per octave, middle C (pitch 60) in octave 4."""
    octaves = pd.Series([n.pitch // 12 - 1 for n in perf.notes], dtype=int)
    counts = octaves.value_counts().sort_index()
    return {int(k): int(v) for k, v in counts.items()}


def _signature_sections(perf: Performance):
    """(start_tick, numerator, denominator) sections; 4/4 before the first event."""
    by_tick: Dict[int, tuple] = {}
    for tick, numerator, denominator in perf.time_signatures:
        by_tick[tick] = (numerator, denominator)
    if 0 not in by_tick:
        by_tick[0] = (4, 4)
    return [(tick, *sig) for tick, sig in sorted(by_tick.items())]


def beat_position_histogram(perf: Performance) -> Dict[int, int]:
    """Distinct-onset count per beat-in-measure (1-based) under the active time signature.

    Measures are counted from the start of each signature section.
    """
    sections = _signature_sections(perf)
    starts = np.array([s[0] for s in sections])
    onsets = sorted({n.onset_tick for n in perf.notes})
    longest = max(numerator for _, numerator, _ in sections)
    counts = {beat: 0 for beat in range(1, longest + 1)}
    for tick in onsets:
        start, numerator, denominator = sections[int(np.searchsorted(starts, tick, side="right")) - 1]
        beat_ticks = perf.division * 4 / denominator
        beat_index = math.floor((tick - start) / beat_ticks + 1e-9)
        counts[beat_index % numerator + 1] += 1
    return counts


def _bar_panel(svg: SvgBuilder, x0: float, y0: float, width: float, height: float,
               counts: Mapping[int, int], title: str, axis_label: str):
    svg.text(x0 + width / 2, y0 - 10, title, size=13, anchor="middle")
    svg.line(x0, y0 + height, x0 + width, y0 + height)
    svg.line(x0, y0, x0, y0 + height)
    keys = list(counts)
    peak = max(max(counts.values(), default=0), 1)
    svg.text(x0 - 6, y0 + 4, str(peak), size=10, anchor="end")
    svg.text(x0 - 6, y0 + height, "0", size=10, anchor="end")
    if keys:
        slot = width / len(keys)
        for i, key in enumerate(keys):
            bar = height * counts[key] / peak
            x = x0 + slot * i + slot * 0.15
            if counts[key]:
                svg.rect(x, y0 + height - bar, slot * 0.7, bar, BAR_FILL, tooltip=f"{key}: {counts[key]}")
            svg.text(x0 + slot * i + slot / 2, y0 + height + 14, str(key), size=10, anchor="middle")
    svg.text(x0 + width / 2, y0 + height + 32, axis_label, size=11, anchor="middle")


def render_distributions_svg(perf: Performance, title: str = "") -> bytes:
    panel_width, panel_height = 320, 200
    top = MARGIN + (30 if title else 0) + 24
    width = MARGIN + 40 + panel_width + 60 + panel_width + MARGIN
    height = top + panel_height + 50 + MARGIN
    svg = SvgBuilder(width, height, title)
    if title:
        svg.text(width / 2, MARGIN + 16, title, size=15, anchor="middle")
    _bar_panel(svg, MARGIN + 40, top, panel_width, panel_height,
               octave_histogram(perf), "Octave distribution", "Octave (C4 = middle C)")
    _bar_panel(svg, MARGIN + 40 + panel_width + 60, top, panel_width, panel_height,
               beat_position_histogram(perf), "Beat distribution", "Beat in measure")
    return svg.to_bytes()
