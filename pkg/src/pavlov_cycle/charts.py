"""Self-contained SVG charts for sweep summaries.

Two panels: median absorption steps against p on a log scale, and mean
cooperator fraction against p with the y = p reference line.  One series per
cycle size.  Rendered by hand so the output carries no timestamps, fonts, or
other environment-dependent bytes: identical inputs give identical files.
"""

from __future__ import annotations

import math

from .experiments import PhaseCell, atomic_write_text

_PALETTE = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"]

_PANEL_W = 430.0
_PANEL_H = 320.0
_MARGIN_L = 62.0
_MARGIN_B = 42.0
_MARGIN_T = 30.0


def _fmt(x: float) -> str:
    return f"{x:.2f}"


class _Panel:
    """Linear panel mapping data space to SVG user units."""

    def __init__(self, x0: float, title: str, xlim: tuple[float, float], ylim: tuple[float, float]):
        self.ox = x0 + _MARGIN_L
        self.oy = _MARGIN_T + (_PANEL_H - _MARGIN_T - _MARGIN_B)
        self.width = _PANEL_W - _MARGIN_L - 18.0
        self.height = _PANEL_H - _MARGIN_T - _MARGIN_B
        self.title = title
        self.xlim = xlim
        self.ylim = ylim

    def x(self, v: float) -> float:
        lo, hi = self.xlim
        span = hi - lo or 1.0
        return self.ox + (v - lo) / span * self.width

    def y(self, v: float) -> float:
        lo, hi = self.ylim
        span = hi - lo or 1.0
        return self.oy - (v - lo) / span * self.height

    def frame(self, xlabel: str, ylabel: str) -> list[str]:
        parts = [
            f'<rect x="{_fmt(self.ox)}" y="{_fmt(self.oy - self.height)}" '
            f'width="{_fmt(self.width)}" height="{_fmt(self.height)}" '
            'fill="none" stroke="#333333" stroke-width="1"/>',
            f'<text x="{_fmt(self.ox + self.width / 2)}" y="{_fmt(_MARGIN_T - 12)}" '
            f'text-anchor="middle" font-size="13">{self.title}</text>',
            f'<text x="{_fmt(self.ox + self.width / 2)}" y="{_fmt(self.oy + 34)}" '
            f'text-anchor="middle" font-size="11">{xlabel}</text>',
            f'<text x="{_fmt(self.ox - 48)}" y="{_fmt(self.oy - self.height / 2)}" '
            f'text-anchor="middle" font-size="11" '
            f'transform="rotate(-90 {_fmt(self.ox - 48)} {_fmt(self.oy - self.height / 2)})">'
            f"{ylabel}</text>",
        ]
        return parts

    def xticks(self, values: list[float]) -> list[str]:
        parts = []
        for v in values:
            px = self.x(v)
            parts.append(
                f'<line x1="{_fmt(px)}" y1="{_fmt(self.oy)}" x2="{_fmt(px)}" '
                f'y2="{_fmt(self.oy + 4)}" stroke="#333333" stroke-width="1"/>'
            )
            parts.append(
                f'<text x="{_fmt(px)}" y="{_fmt(self.oy + 16)}" text-anchor="middle" '
                f'font-size="10">{v:g}</text>'
            )
        return parts

    def yticks(self, pairs: list[tuple[float, str]]) -> list[str]:
        parts = []
        for v, label in pairs:
            py = self.y(v)
            parts.append(
                f'<line x1="{_fmt(self.ox - 4)}" y1="{_fmt(py)}" x2="{_fmt(self.ox)}" '
                f'y2="{_fmt(py)}" stroke="#333333" stroke-width="1"/>'
            )
            parts.append(
                f'<text x="{_fmt(self.ox - 7)}" y="{_fmt(py + 3)}" text-anchor="end" '
                f'font-size="10">{label}</text>'
            )
        return parts

    def polyline(self, pts: list[tuple[float, float]], color: str, dashed: bool = False) -> str:
        coords = " ".join(f"{_fmt(self.x(a))},{_fmt(self.y(b))}" for a, b in pts)
        dash = ' stroke-dasharray="5,4"' if dashed else ""
        return f'<polyline points="{coords}" fill="none" stroke="{color}" stroke-width="1.5"{dash}/>'


def render_phase_charts(cells: list[PhaseCell], path: str) -> None:
    """Write the two-panel summary chart for one strategy's sweep."""
    if not cells:
        raise ValueError("no summary cells to plot")
    ns = sorted({c.n for c in cells})
    ps = sorted({c.p for c in cells})
    xlim = (min(ps), max(ps)) if len(ps) > 1 else (ps[0] - 0.05, ps[0] + 0.05)

    logs = [math.log10(max(c.median_steps, 1.0)) for c in cells]
    lo_dec = math.floor(min(logs))
    hi_dec = math.ceil(max(logs)) or 1

    left = _Panel(0.0, "median steps to absorption", xlim, (lo_dec, hi_dec))
    right = _Panel(_PANEL_W, "mean cooperator fraction at stop", xlim, (0.0, 1.0))

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{int(2 * _PANEL_W)}" '
        f'height="{int(_PANEL_H)}" viewBox="0 0 {int(2 * _PANEL_W)} {int(_PANEL_H)}">',
        f'<rect width="{int(2 * _PANEL_W)}" height="{int(_PANEL_H)}" fill="#ffffff"/>',
    ]
    parts += left.frame("p", "steps (log10)")
    parts += right.frame("p", "cooperator fraction")

    tick_ps = ps if len(ps) <= 9 else [ps[i] for i in range(0, len(ps), max(1, len(ps) // 8))]
    parts += left.xticks(tick_ps)
    parts += right.xticks(tick_ps)
    parts += left.yticks([(d, f"1e{d}") for d in range(lo_dec, hi_dec + 1)])
    parts += right.yticks([(v / 10, f"{v / 10:.1f}") for v in range(0, 11, 2)])

    # reference line y = p on the fraction panel
    ref_y = [min(max(xlim[0], 0.0), 1.0), min(max(xlim[1], 0.0), 1.0)]
    parts.append(right.polyline(list(zip(xlim, ref_y)), "#888888", dashed=True))
    parts.append(
        f'<text x="{_fmt(right.x(xlim[1]) - 4)}" y="{_fmt(right.y(ref_y[1]) - 5)}" '
        f'text-anchor="end" font-size="10" fill="#888888">y = p</text>'
    )

    for k, n in enumerate(ns):
        color = _PALETTE[k % len(_PALETTE)]
        series = sorted((c for c in cells if c.n == n), key=lambda c: c.p)
        steps_pts = [(c.p, math.log10(max(c.median_steps, 1.0))) for c in series]
        frac_pts = [(c.p, c.mean_coop_fraction) for c in series]
        parts.append(left.polyline(steps_pts, color))
        parts.append(right.polyline(frac_pts, color))
        ly = _MARGIN_T + 12 + 14 * k
        parts.append(
            f'<line x1="{_fmt(left.ox + 8)}" y1="{_fmt(ly - 3)}" x2="{_fmt(left.ox + 26)}" '
            f'y2="{_fmt(ly - 3)}" stroke="{color}" stroke-width="1.5"/>'
        )
        parts.append(
            f'<text x="{_fmt(left.ox + 30)}" y="{_fmt(ly)}" font-size="10">n={n}</text>'
        )

    parts.append("</svg>")
    atomic_write_text(path, "\n".join(parts) + "\n")
