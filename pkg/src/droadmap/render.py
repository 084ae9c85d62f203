"""Deterministic SVG rendering of occupancy maps and roadmaps.

The output is plain SVG 1.1 text with fixed float formatting, so a given
(map, roadmap, path) always renders to identical bytes. Edges are drawn as
arrows in their currently likely direction, colored on a red-to-green ramp
by how far the direction scalar has committed away from zero.
"""

from __future__ import annotations

import numpy as np

from .env import FREE, OBSTACLE, OccupancyMap
from .roadmap import RelaxedDrm
from .search import Path

# |d| at which the confidence ramp saturates (direction effectively committed)
RAMP_SATURATION = 5.0

_UNDECIDED_RGB = (200, 30, 30)
_COMMITTED_RGB = (30, 150, 30)


def _fmt(x: float) -> str:
    return f"{x:.4f}".rstrip("0").rstrip(".")


def edge_color(d: float) -> str:
    t = min(abs(float(d)), RAMP_SATURATION) / RAMP_SATURATION
    rgb = tuple(
        int(round(a + t * (b - a))) for a, b in zip(_UNDECIDED_RGB, _COMMITTED_RGB)
    )
    return f"rgb({rgb[0]},{rgb[1]},{rgb[2]})"


def _map_rects(occ: OccupancyMap, scale: float) -> list[str]:
    out = []
    res = occ.resolution
    for iy in range(occ.height):
        row = occ.cells[iy]
        ix = 0
        while ix < occ.width:
            state = row[ix]
            if state == FREE:
                ix += 1
                continue
            run = ix
            while run < occ.width and row[run] == state:
                run += 1
            color = "#202020" if state == OBSTACLE else "#9a9a9a"
            out.append(
                f'<rect x="{_fmt(ix * res * scale)}" y="{_fmt(iy * res * scale)}" '
                f'width="{_fmt((run - ix) * res * scale)}" height="{_fmt(res * scale)}" '
                f'fill="{color}"/>'
            )
            ix = run
    return out


def _arrow(ax, ay, bx, by, color: str, scale: float, width: float) -> str:
    """Line from a to b plus a small triangular head at b."""
    dx, dy = bx - ax, by - ay
    length = float(np.hypot(dx, dy))
    parts = [
        f'<line x1="{_fmt(ax * scale)}" y1="{_fmt(ay * scale)}" '
        f'x2="{_fmt(bx * scale)}" y2="{_fmt(by * scale)}" '
        f'stroke="{color}" stroke-width="{_fmt(width)}"/>'
    ]
    if length > 0:
        ux, uy = dx / length, dy / length
        head = min(0.25 * length, 0.04) * scale
        tipx, tipy = bx * scale, by * scale
        basex, basey = tipx - ux * head, tipy - uy * head
        px, py = -uy, ux
        half = head * 0.45
        parts.append(
            f'<polygon points="{_fmt(tipx)},{_fmt(tipy)} '
            f'{_fmt(basex + px * half)},{_fmt(basey + py * half)} '
            f'{_fmt(basex - px * half)},{_fmt(basey - py * half)}" fill="{color}"/>'
        )
    return "".join(parts)


def render_svg(
    occ: OccupancyMap,
    g: RelaxedDrm | None = None,
    path: Path | None = None,
    scale: float = 100.0,
) -> str:
    """SVG document for a map with an optional roadmap overlay and query path."""
    w = occ.world_width * scale
    h = occ.world_height * scale
    lines = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" '
        f'width="{_fmt(w)}" height="{_fmt(h)}" viewBox="0 0 {_fmt(w)} {_fmt(h)}">',
        f'<rect x="0" y="0" width="{_fmt(w)}" height="{_fmt(h)}" fill="#ffffff"/>',
    ]
    lines.extend(_map_rects(occ, scale))
    if g is not None:
        stroke = max(0.5, 0.006 * scale)
        for (u, v), d in zip(np.asarray(g.edges).reshape(-1, 2), g.d):
            a = g.vertices[int(u)]
            b = g.vertices[int(v)]
            if d < 0:
                a, b = b, a
            lines.append(_arrow(a[0], a[1], b[0], b[1], edge_color(d), scale, stroke))
        r = max(1.0, 0.008 * scale)
        for x, y in g.vertices:
            lines.append(
                f'<circle cx="{_fmt(x * scale)}" cy="{_fmt(y * scale)}" '
                f'r="{_fmt(r)}" fill="#1040a0"/>'
            )
    if path is not None and g is not None:
        pts = [path.start] + [tuple(g.vertices[v]) for v in path.waypoints] + [path.goal]
        coords = " ".join(f"{_fmt(x * scale)},{_fmt(y * scale)}" for x, y in pts)
        lines.append(
            f'<polyline points="{coords}" fill="none" stroke="#000000" '
            f'stroke-width="{_fmt(max(1.0, 0.01 * scale))}"/>'
        )
    lines.append("</svg>")
    return "\n".join(lines) + "\n"
