"""Static SVG 1.1 output: film drawings and log-log scaling plots.

Coordinates are written with a fixed number of digits so identical input
gives identical bytes.
"""

from __future__ import annotations

from typing import Sequence

import numpy as np

from .film import FilmComplex

WIDTH = 640.0
PAD = 24.0


def _num(x: float) -> str:
    s = f"{x:.3f}".rstrip("0").rstrip(".")
    return "0" if s in ("-0", "") else s


def _bounds(f: FilmComplex) -> tuple[np.ndarray, np.ndarray]:
    chunks = [e.points for e in f.edges]
    w = f.wireframe
    if len(w):
        c, r = w.centers, w.radii
        chunks += [c - r[:, None], c + r[:, None]]
    if not chunks:
        return np.array([-1.0, -1.0]), np.array([1.0, 1.0])
    pts = np.vstack(chunks)
    lo, hi = pts.min(axis=0), pts.max(axis=0)
    span = np.maximum(hi - lo, 1e-9)
    return lo - 0.05 * span, hi + 0.05 * span


def film_svg(f: FilmComplex) -> str:
    """Disks shaded, liquid filled, multiplicity-1 edges thin and collapsed edges thick."""
    lo, hi = _bounds(f)
    scale = (WIDTH - 2 * PAD) / max(hi[0] - lo[0], hi[1] - lo[1])
    height = (hi[1] - lo[1]) * scale + 2 * PAD
    width = (hi[0] - lo[0]) * scale + 2 * PAD

    def xy(p):
        return _num(PAD + (p[0] - lo[0]) * scale), _num(height - PAD - (p[1] - lo[1]) * scale)

    def path(points, close=False):
        parts = []
        for i, p in enumerate(points):
            x, y = xy(p)
            parts.append(f"{'M' if i == 0 else 'L'}{x} {y}")
        return " ".join(parts) + (" Z" if close else "")

    out = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{_num(width)}" height="{_num(height)}" '
        f'viewBox="0 0 {_num(width)} {_num(height)}">',
        f'<rect x="0" y="0" width="{_num(width)}" height="{_num(height)}" fill="#ffffff"/>',
        '<g id="disks" fill="#c8c8c8" stroke="#808080" stroke-width="1">',
    ]
    for d in f.wireframe.disks:
        x, y = xy(d.center)
        out.append(f'<circle cx="{x}" cy="{y}" r="{_num(d.radius * scale)}"/>')
    out.append("</g>")
    out.append('<g id="liquid" fill="#9ecae1" stroke="none">')
    for k in range(len(f.regions)):
        out.append(f'<path d="{path(f.region_points(k), close=True)}"/>')
    out.append("</g>")
    out.append('<g id="film" fill="none" stroke="#08306b" stroke-linejoin="round" stroke-linecap="round">')
    for e in f.edges:
        width_attr = "4" if e.multiplicity == 2 else "1.25"
        cls = "collapsed" if e.multiplicity == 2 else "boundary"
        out.append(f'<path class="{cls}" stroke-width="{width_attr}" d="{path(e.points)}"/>')
    out.append("</g>")
    out.append("</svg>")
    return "\n".join(out) + "\n"


def scaling_svg(eps: Sequence[float], series: dict[str, Sequence[float]], title: str = "") -> str:
    """One log-log panel per series of absolute values against ε."""
    names = sorted(series)
    panel_h = 220.0
    height = PAD + len(names) * (panel_h + PAD)
    out = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{_num(WIDTH)}" height="{_num(height)}" '
        f'viewBox="0 0 {_num(WIDTH)} {_num(height)}">',
        f'<rect x="0" y="0" width="{_num(WIDTH)}" height="{_num(height)}" fill="#ffffff"/>',
    ]
    if title:
        out.append(f'<text x="{_num(PAD)}" y="{_num(PAD * 0.75)}" font-size="12" font-family="sans-serif">{title}</text>')
    lx = np.log10(np.asarray(eps, dtype=float))
    for i, name in enumerate(names):
        y = np.abs(np.asarray(series[name], dtype=float))
        top = PAD + i * (panel_h + PAD)
        left, right = 3 * PAD, WIDTH - PAD
        bottom = top + panel_h - PAD
        out.append(f'<rect x="{_num(left)}" y="{_num(top)}" width="{_num(right - left)}" '
                   f'height="{_num(bottom - top)}" fill="none" stroke="#000000"/>')
        out.append(f'<text x="{_num(left + 4)}" y="{_num(top + 14)}" font-size="12" font-family="sans-serif">'
                   f"log10 |{name}| vs log10 ε</text>")
        ok = y > 0
        if np.count_nonzero(ok) == 0:
            continue
        ly = np.log10(y[ok])
        xs = lx[ok]
        x0, x1 = xs.min(), xs.max()
        y0, y1 = ly.min(), ly.max()
        x1 = x1 if x1 > x0 else x0 + 1.0
        y1 = y1 if y1 > y0 else y0 + 1.0
        px = left + 8 + (xs - x0) / (x1 - x0) * (right - left - 16)
        py = bottom - 8 - (ly - y0) / (y1 - y0) * (bottom - top - 32)
        pts = " ".join(f"{_num(a)},{_num(b)}" for a, b in zip(px, py))
        out.append(f'<polyline points="{pts}" fill="none" stroke="#08306b" stroke-width="1.5"/>')
        for a, b in zip(px, py):
            out.append(f'<circle cx="{_num(a)}" cy="{_num(b)}" r="3" fill="#08306b"/>')
        out.append(f'<text x="{_num(left)}" y="{_num(bottom + 14)}" font-size="10" font-family="sans-serif">'
                   f"ε from {10 ** x0:.1e} to {10 ** x1:.1e}; |{name}| from {10 ** y0:.3e} to {10 ** y1:.3e}</text>")
    out.append("</svg>")
    return "\n".join(out) + "\n"
