"""Phase portraits of 2x2 games as plain SVG."""

from __future__ import annotations

from typing import Iterable

import numpy as np

from .chain import MorseDecomposition
from .game import Game
from .replicator import field_batch

SIZE = 600
MARGIN = 40
GRID = 15


def _xy(u: float, v: float) -> tuple[float, float]:
    span = SIZE - 2 * MARGIN
    return MARGIN + u * span, SIZE - MARGIN - v * span


def phase_portrait_svg(g: Game, md: MorseDecomposition, title: str = "") -> str:
    """Unit square: x = P(player 1 plays 0), y = P(player 2 plays 0).

    Boxes of sink Morse sets are shaded grey; arrows show the field direction
    with length proportional to speed.
    """
    if g.strategy_counts != (2, 2):
        raise ValueError(f"phase portraits need a 2x2 game, got {g.shape_str}")
    cover = md.graph.cover
    k = cover.kappa
    span = SIZE - 2 * MARGIN
    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{SIZE}" height="{SIZE}" viewBox="0 0 {SIZE} {SIZE}">',
        "<defs><marker id=\"head\" markerWidth=\"6\" markerHeight=\"6\" refX=\"5\" refY=\"3\" orient=\"auto\">"
        '<path d="M0,0 L6,3 L0,6 z" fill="black"/></marker></defs>',
        f'<rect x="0" y="0" width="{SIZE}" height="{SIZE}" fill="white"/>',
    ]
    for box in _sink_boxes(md):
        c1, c2 = cover.box_cells(box)
        # cell floor (i, k-1-i) covers x_0 in [i/k, (i+1)/k]
        i = int(cover.cells[0].floors[c1][0])
        j = int(cover.cells[1].floors[c2][0])
        x0, y1 = _xy(i / k, (j + 1) / k)
        out.append(
            f'<rect x="{x0:.2f}" y="{y1:.2f}" width="{span / k:.2f}" height="{span / k:.2f}" '
            'fill="#bbbbbb" stroke="none"/>'
        )
    x0, y0 = _xy(0, 1)
    out.append(f'<rect x="{x0}" y="{y0}" width="{span}" height="{span}" fill="none" stroke="black"/>')

    ticks = (np.arange(GRID) + 0.5) / GRID
    u, v = np.meshgrid(ticks, ticks, indexing="ij")
    u, v = u.ravel(), v.ravel()
    pts = np.stack([u, 1 - u, v, 1 - v], axis=1)
    vel = field_batch(g, pts)[:, [0, 2]]
    speed = np.max(np.abs(vel), axis=1)
    top = speed.max()
    cell = 1.0 / GRID
    for (a, b), vv, s in zip(zip(u, v), vel, speed):
        if top == 0 or s == 0:
            out.append('<circle cx="{:.2f}" cy="{:.2f}" r="2" fill="black"/>'.format(*_xy(a, b)))
            continue
        d = vv / s * 0.8 * cell * (0.35 + 0.65 * s / top)
        xa, ya = _xy(a - d[0] / 2, b - d[1] / 2)
        xb, yb = _xy(a + d[0] / 2, b + d[1] / 2)
        out.append(
            f'<line x1="{xa:.2f}" y1="{ya:.2f}" x2="{xb:.2f}" y2="{yb:.2f}" '
            'stroke="black" stroke-width="1.2" marker-end="url(#head)"/>'
        )
    lx, ly = _xy(0.5, 0)
    out.append(f'<text x="{lx}" y="{ly + 28}" text-anchor="middle" font-size="14">P(player 1 plays 0)</text>')
    tx, ty = _xy(0, 0.5)
    out.append(
        f'<text x="{tx - 24}" y="{ty}" text-anchor="middle" font-size="14" '
        f'transform="rotate(-90 {tx - 24} {ty})">P(player 2 plays 0)</text>'
    )
    if title:
        out.append(f'<text x="{SIZE / 2}" y="24" text-anchor="middle" font-size="16">{title}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def _sink_boxes(md: MorseDecomposition) -> Iterable[int]:
    for k in md.sinks:
        yield from md.morse_sets[k].tolist()
