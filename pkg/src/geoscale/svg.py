"""Minimal SVG line plots: polylines in data coordinates plus labelled axes.

Output is plain text with fixed number formatting, so identical inputs
produce identical files.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from xml.sax.saxutils import escape

import numpy as np

PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")


def _fmt(v: float) -> str:
    return f"{v:.2f}"


def nice_ticks(lo: float, hi: float, target: int = 6) -> np.ndarray:
    """Round tick positions (1, 2, 5 x 10^k steps) covering ``[lo, hi]``."""
    span = hi - lo
    if not np.isfinite(span) or span <= 0:
        return np.array([lo])
    raw = span / max(target - 1, 1)
    mag = 10.0 ** np.floor(np.log10(raw))
    # the 1-2-5 step closest to the raw step on a log scale
    step = mag * min((1, 2, 5, 10), key=lambda m: abs(np.log(m * mag / raw)))
    first = np.ceil(lo / step - 1e-9) * step
    ticks = np.arange(first, hi + 1e-9 * step, step)
    return np.round(ticks, 10) + 0.0  # drop negative zeros


def _tick_label(v: float) -> str:
    return f"{v:g}"


@dataclass
class _Series:
    points: np.ndarray
    color: str
    width: float
    label: str | None
    dashed: bool


@dataclass
class Figure:
    """A single panel.

    Parameters
    ----------
    title, xlabel, ylabel : str
    width, height : int
        Canvas size in pixels.
    xlim, ylim : (float, float), optional
        Data window; fitted to the series (with 3% padding) if omitted.
    """

    title: str = ""
    xlabel: str = "x1"
    ylabel: str = "x2"
    width: int = 480
    height: int = 400
    xlim: tuple | None = None
    ylim: tuple | None = None
    series: list = field(default_factory=list)

    margin_left = 56
    margin_right = 16
    margin_top = 30
    margin_bottom = 44

    def polyline(self, points, color: str | None = None, width: float = 1.2,
                 label: str | None = None, dashed: bool = False) -> "Figure":
        pts = np.asarray(points, dtype=float).reshape(-1, 2)
        if color is None:
            color = PALETTE[len(self.series) % len(PALETTE)]
        self.series.append(_Series(pts, color, width, label, dashed))
        return self

    def _limits(self):
        allpts = [s.points for s in self.series if len(s.points)]
        if allpts:
            stacked = np.concatenate(allpts)
            stacked = stacked[np.all(np.isfinite(stacked), axis=1)]
        else:
            stacked = np.zeros((0, 2))
        lims = []
        for d, given in enumerate((self.xlim, self.ylim)):
            if given is not None:
                lims.append((float(given[0]), float(given[1])))
                continue
            if len(stacked) == 0:
                lims.append((0.0, 1.0))
                continue
            lo, hi = float(stacked[:, d].min()), float(stacked[:, d].max())
            pad = 0.03 * (hi - lo) if hi > lo else 0.5
            lims.append((lo - pad, hi + pad))
        return lims

    def render(self) -> str:
        (x0, x1), (y0, y1) = self._limits()
        pw = self.width - self.margin_left - self.margin_right
        ph = self.height - self.margin_top - self.margin_bottom

        def px(x):
            return self.margin_left + (x - x0) / (x1 - x0) * pw

        def py(y):
            return self.margin_top + (y1 - y) / (y1 - y0) * ph

        out = [
            f'<svg xmlns="http://www.w3.org/2000/svg" width="{self.width}" height="{self.height}" '
            f'viewBox="0 0 {self.width} {self.height}" font-family="sans-serif" font-size="11">',
            f'<rect x="0" y="0" width="{self.width}" height="{self.height}" fill="white"/>',
            f'<defs><clipPath id="plot"><rect x="{self.margin_left}" y="{self.margin_top}" '
            f'width="{pw}" height="{ph}"/></clipPath></defs>',
        ]
        # frame and ticks
        out.append(f'<rect x="{self.margin_left}" y="{self.margin_top}" width="{pw}" height="{ph}" '
                   'fill="none" stroke="black" stroke-width="1"/>')
        bottom = self.margin_top + ph
        for t in nice_ticks(x0, x1):
            X = _fmt(px(t))
            out.append(f'<line x1="{X}" y1="{bottom}" x2="{X}" y2="{bottom + 4}" stroke="black"/>')
            out.append(f'<text x="{X}" y="{bottom + 16}" text-anchor="middle">{_tick_label(t)}</text>')
        for t in nice_ticks(y0, y1):
            Y = _fmt(py(t))
            out.append(f'<line x1="{self.margin_left - 4}" y1="{Y}" x2="{self.margin_left}" y2="{Y}" stroke="black"/>')
            out.append(f'<text x="{self.margin_left - 6}" y="{Y}" text-anchor="end" '
                       f'dominant-baseline="middle">{_tick_label(t)}</text>')
        out.append(f'<text x="{_fmt(self.margin_left + pw / 2)}" y="{self.height - 8}" '
                   f'text-anchor="middle">{escape(self.xlabel)}</text>')
        cy = _fmt(self.margin_top + ph / 2)
        out.append(f'<text x="14" y="{cy}" text-anchor="middle" '
                   f'transform="rotate(-90 14 {cy})">{escape(self.ylabel)}</text>')
        if self.title:
            out.append(f'<text x="{_fmt(self.width / 2)}" y="18" text-anchor="middle" '
                       f'font-size="13">{escape(self.title)}</text>')

        out.append('<g clip-path="url(#plot)" fill="none">')
        for s in self.series:
            # NaN rows split a series into separate runs
            finite = np.all(np.isfinite(s.points), axis=1)
            breaks = np.flatnonzero(np.diff(np.r_[0, finite.astype(int), 0]))
            dash = ' stroke-dasharray="4 3"' if s.dashed else ""
            title = f"<title>{escape(s.label)}</title>" if s.label else ""
            for start, stop in zip(breaks[::2], breaks[1::2]):
                run = s.points[start:stop]
                coords = " ".join(f"{_fmt(px(a))},{_fmt(py(b))}" for a, b in run)
                out.append(f'<polyline points="{coords}" stroke="{s.color}" '
                           f'stroke-width="{s.width}"{dash}>{title}</polyline>')
        out.append("</g>")
        out.append("</svg>")
        return "\n".join(out) + "\n"
