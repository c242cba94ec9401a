"""Minimal hand-rolled SVG scatter plot for objective pairs.

Kept dependency-free on purpose: the CSV files are the authoritative
output and the plot is a quick visual of the candidate cloud with the
Pareto front highlighted.  Output is a deterministic string.
"""

from __future__ import annotations

from typing import Sequence

WIDTH, HEIGHT = 640, 480
MARGIN = 56


def _sx(x: float) -> float:
    return MARGIN + x * (WIDTH - 2 * MARGIN)


def _sy(y: float) -> float:
    return HEIGHT - MARGIN - y * (HEIGHT - 2 * MARGIN)


def scatter_svg(
    points: Sequence[tuple[float, float]],
    front: Sequence[tuple[float, float]],
    *,
    xlabel: str = "coverage",
    ylabel: str = "1 - MAE",
    title: str = "",
) -> str:
    """Unit-square scatter with the front drawn as a polyline on top."""
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}">',
        f'<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
    ]
    # axes and ticks over the unit square
    x0, y0 = _sx(0.0), _sy(0.0)
    x1, y1 = _sx(1.0), _sy(1.0)
    parts.append(f'<line x1="{x0:.1f}" y1="{y0:.1f}" x2="{x1:.1f}" y2="{y0:.1f}" stroke="black"/>')
    parts.append(f'<line x1="{x0:.1f}" y1="{y0:.1f}" x2="{x0:.1f}" y2="{y1:.1f}" stroke="black"/>')
    for t in (0.0, 0.25, 0.5, 0.75, 1.0):
        tx, ty = _sx(t), _sy(t)
        parts.append(f'<line x1="{tx:.1f}" y1="{y0:.1f}" x2="{tx:.1f}" y2="{y0 + 5:.1f}" stroke="black"/>')
        parts.append(
            f'<text x="{tx:.1f}" y="{y0 + 20:.1f}" font-size="11" text-anchor="middle">{t:g}</text>'
        )
        parts.append(f'<line x1="{x0 - 5:.1f}" y1="{ty:.1f}" x2="{x0:.1f}" y2="{ty:.1f}" stroke="black"/>')
        parts.append(
            f'<text x="{x0 - 8:.1f}" y="{ty + 4:.1f}" font-size="11" text-anchor="end">{t:g}</text>'
        )
    parts.append(
        f'<text x="{(x0 + x1) / 2:.1f}" y="{HEIGHT - 12}" font-size="13" text-anchor="middle">{xlabel}</text>'
    )
    parts.append(
        f'<text x="14" y="{(y0 + y1) / 2:.1f}" font-size="13" text-anchor="middle" '
        f'transform="rotate(-90 14 {(y0 + y1) / 2:.1f})">{ylabel}</text>'
    )
    if title:
        parts.append(f'<text x="{(x0 + x1) / 2:.1f}" y="24" font-size="14" text-anchor="middle">{title}</text>')

    for x, y in points:
        parts.append(f'<circle cx="{_sx(x):.2f}" cy="{_sy(y):.2f}" r="3" fill="#9aa0a6" fill-opacity="0.7"/>')
    if front:
        path = " ".join(f"{_sx(x):.2f},{_sy(y):.2f}" for x, y in front)
        parts.append(f'<polyline points="{path}" fill="none" stroke="#c5221f" stroke-width="1.5"/>')
        for x, y in front:
            parts.append(f'<circle cx="{_sx(x):.2f}" cy="{_sy(y):.2f}" r="4" fill="#c5221f"/>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"
