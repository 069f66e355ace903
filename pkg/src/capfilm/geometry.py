"""Planar geometric kernel.

Points are handled as float arrays of shape ``(n, 2)``; per-vertex scalar
fields are plain 1-D arrays aligned with a polyline's vertex list.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

DEFAULT_TOL = 1e-9


def as_points(points) -> np.ndarray:
    arr = np.asarray(points, dtype=float)
    if arr.ndim == 1:
        arr = arr.reshape(1, 2)
    if arr.ndim != 2 or arr.shape[1] != 2:
        raise ValueError(f"expected an (n, 2) array of points, got shape {arr.shape}")
    return arr


def left_normal(v: np.ndarray) -> np.ndarray:
    """Rotate vectors by +90 degrees."""
    v = np.asarray(v, dtype=float)
    return np.stack([-v[..., 1], v[..., 0]], axis=-1)


def cross2(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return a[..., 0] * b[..., 1] - a[..., 1] * b[..., 0]


@dataclass(frozen=True, eq=False)
class Polyline:
    """Ordered vertex chain; closed chains are treated cyclically.

    A closed polyline does not repeat its first vertex at the end.
    """

    vertices: np.ndarray
    closed: bool = False

    def __post_init__(self):
        pts = as_points(self.vertices).copy()
        if len(pts) < 2:
            raise ValueError("a polyline needs at least two vertices")
        if not np.all(np.isfinite(pts)):
            raise ValueError("polyline coordinates must be finite")
        steps = np.diff(pts, axis=0)
        if self.closed:
            steps = np.vstack([steps, pts[:1] - pts[-1:]])
        if np.any(np.all(steps == 0.0, axis=1)):
            raise ValueError("consecutive polyline vertices must be distinct")
        pts.setflags(write=False)
        object.__setattr__(self, "vertices", pts)

    def __len__(self) -> int:
        return len(self.vertices)

    def __eq__(self, other) -> bool:
        if not isinstance(other, Polyline):
            return NotImplemented
        return self.closed == other.closed and np.array_equal(self.vertices, other.vertices)

    def segments(self) -> tuple[np.ndarray, np.ndarray]:
        """Start and end points of every segment."""
        a = self.vertices
        if self.closed:
            return a, np.roll(a, -1, axis=0)
        return a[:-1], a[1:]

    def reversed(self) -> "Polyline":
        return Polyline(self.vertices[::-1], self.closed)

    def is_simple(self, tol: float = DEFAULT_TOL) -> bool:
        return not polyline_self_intersects(self.vertices, self.closed, tol)


def polyline_length(p: Polyline) -> float:
    a, b = p.segments()
    return float(np.sum(np.linalg.norm(b - a, axis=1)))


def signed_area(p: Polyline) -> float:
    """Shoelace area, positive for counterclockwise chains."""
    if not p.closed:
        raise ValueError("open chain has no area")
    return polygon_area(p.vertices)


def polygon_area(points: np.ndarray) -> float:
    # shift to a local origin so small polygons far from 0 keep their digits
    pts = points - points[0]
    x, y = pts[:, 0], pts[:, 1]
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(np.roll(x, -1), y))


# --------------------------------------------------------------------------
# convex hulls


@dataclass(frozen=True, eq=False)
class ConvexPolygon:
    """Counterclockwise convex polygon.

    ``degenerate`` hulls (a point or a segment) have zero area; containment
    then means lying on the degenerate set within tolerance.
    """

    vertices: np.ndarray
    degenerate: bool = False

    def __eq__(self, other) -> bool:
        if not isinstance(other, ConvexPolygon):
            return NotImplemented
        return self.degenerate == other.degenerate and np.array_equal(self.vertices, other.vertices)

    @property
    def area(self) -> float:
        return 0.0 if self.degenerate else polygon_area(self.vertices)

    def signed_distance(self, points) -> np.ndarray:
        """Distance to the boundary, positive inside and negative outside."""
        pts = as_points(points)
        v = self.vertices
        if len(v) == 1:
            return -np.linalg.norm(pts - v[0], axis=1)
        if self.degenerate:
            return -point_segment_distance(pts, v[:1], v[1:2])[:, 0]
        a, b = v, np.roll(v, -1, axis=0)
        dist = point_segment_distance(pts, a, b).min(axis=1)
        edge = b - a
        edge_len = np.linalg.norm(edge, axis=1)
        # inward offset of every point from every supporting line
        side = cross2(edge[None, :, :], pts[:, None, :] - a[None, :, :]) / edge_len[None, :]
        inside = np.all(side >= 0.0, axis=1)
        return np.where(inside, dist, -dist)

    def contains(self, points, tol: float = DEFAULT_TOL) -> np.ndarray:
        return self.signed_distance(points) >= -tol


def convex_hull(points) -> ConvexPolygon:
    """Monotone-chain hull; collinear or coincident input gives a degenerate hull."""
    pts = as_points(points)
    if len(pts) == 0:
        raise ValueError("convex hull of an empty point set")
    uniq = np.unique(pts, axis=0)
    if len(uniq) == 1:
        return ConvexPolygon(uniq.copy(), degenerate=True)
    order = np.lexsort((uniq[:, 1], uniq[:, 0]))
    srt = uniq[order]

    def half(seq):
        chain: list[np.ndarray] = []
        for p in seq:
            while len(chain) >= 2 and cross2(chain[-1] - chain[-2], p - chain[-2]) <= 0.0:
                chain.pop()
            chain.append(p)
        return chain

    lower = half(srt)
    upper = half(srt[::-1])
    hull = np.array(lower[:-1] + upper[:-1])
    if len(hull) < 3 or polygon_area(hull) <= 0.0:
        ends = np.array([srt[0], srt[-1]])
        return ConvexPolygon(ends, degenerate=True)
    return ConvexPolygon(hull, degenerate=False)


# --------------------------------------------------------------------------
# curvature and normals


def circumcircle_curvature(p0: np.ndarray, p1: np.ndarray, p2: np.ndarray) -> np.ndarray:
    """Signed curvature of the circle through three points (left turn positive)."""
    d01 = np.linalg.norm(p1 - p0, axis=-1)
    d12 = np.linalg.norm(p2 - p1, axis=-1)
    d02 = np.linalg.norm(p2 - p0, axis=-1)
    denom = d01 * d12 * d02
    num = 2.0 * cross2(p1 - p0, p2 - p1)
    with np.errstate(divide="ignore", invalid="ignore"):
        kappa = np.where(denom > 0.0, num / np.where(denom > 0.0, denom, 1.0), 0.0)
    return kappa


def fit_curvature(p: Polyline, window: int = 1) -> np.ndarray:
    """Per-vertex signed curvature from the circle through ``i-window, i, i+window``.

    Counterclockwise traversal of a convex curve gives positive values. On open
    chains the first and last ``window`` vertices copy the nearest interior value.
    """
    if window < 1:
        raise ValueError("window must be at least 1")
    pts = p.vertices
    n = len(pts)
    if n < 2 * window + 1:
        raise ValueError(f"need at least {2 * window + 1} vertices for window {window}")
    if p.closed:
        return circumcircle_curvature(np.roll(pts, window, axis=0), pts, np.roll(pts, -window, axis=0))
    inner = circumcircle_curvature(pts[: n - 2 * window], pts[window : n - window], pts[2 * window :])
    return np.concatenate([np.full(window, inner[0]), inner, np.full(window, inner[-1])])


def vertex_normals(points: np.ndarray, closed: bool) -> np.ndarray:
    """Unit left normals; interior vertices use the bisector of adjacent edge normals."""
    pts = as_points(points)
    if closed:
        fwd = np.roll(pts, -1, axis=0) - pts
        seg = fwd
        prev_seg = np.roll(seg, 1, axis=0)
    else:
        seg = np.diff(pts, axis=0)
        prev_seg = np.vstack([seg[:1], seg])
        seg = np.vstack([seg, seg[-1:]])
    n_next = left_normal(seg / np.linalg.norm(seg, axis=1)[:, None])
    n_prev = left_normal(prev_seg / np.linalg.norm(prev_seg, axis=1)[:, None])
    bis = n_next + n_prev
    norm = np.linalg.norm(bis, axis=1)
    # a full reversal has no bisector; fall back to the outgoing edge normal
    bad = norm < 1e-12
    bis[bad] = n_next[bad]
    norm[bad] = 1.0
    return bis / norm[:, None]


def normal_offset(p: Polyline, u, side: int = 1, tol: float = DEFAULT_TOL) -> Polyline:
    """Move each vertex by ``side * u`` along its unit left normal.

    ``side=+1`` offsets to the left of the traversal direction, so a
    counterclockwise loop grows with ``side=-1``.
    """
    if side not in (1, -1):
        raise ValueError("side must be +1 or -1")
    u = np.asarray(u, dtype=float)
    if u.shape == ():
        u = np.full(len(p), float(u))
    if u.shape != (len(p),):
        raise ValueError("offset field must have one value per vertex")
    if np.any(u < 0.0) or not np.all(np.isfinite(u)):
        raise ValueError("offset amplitudes must be finite and non-negative")
    normals = vertex_normals(p.vertices, p.closed)
    moved = p.vertices + side * u[:, None] * normals
    try:
        out = Polyline(moved, p.closed)
    except ValueError as exc:
        raise ValueError("offset not embedded") from exc
    if polyline_self_intersects(out.vertices, out.closed, tol):
        raise ValueError("offset not embedded")
    if p.closed and np.sign(polygon_area(out.vertices)) != np.sign(polygon_area(p.vertices)):
        raise ValueError("offset not embedded")
    return out


# --------------------------------------------------------------------------
# distances


def point_segment_distance(points: np.ndarray, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Distance matrix ``(n_points, n_segments)``."""
    pts = as_points(points)
    a = as_points(a)
    b = as_points(b)
    ab = b - a
    ab2 = np.einsum("ij,ij->i", ab, ab)
    ap = pts[:, None, :] - a[None, :, :]
    with np.errstate(divide="ignore", invalid="ignore"):
        t = np.einsum("pkj,kj->pk", ap, ab) / np.where(ab2 > 0, ab2, 1.0)[None, :]
    t = np.clip(t, 0.0, 1.0)
    closest = a[None, :, :] + t[..., None] * ab[None, :, :]
    return np.linalg.norm(pts[:, None, :] - closest, axis=2)


def _carrier(obj) -> tuple[np.ndarray, np.ndarray]:
    """Segments of a polyline, or a degenerate segment for a bare point."""
    if isinstance(obj, Polyline):
        return obj.segments()
    pts = as_points(obj)
    if len(pts) == 1:
        return pts, pts
    return pts[:-1], pts[1:]


def segment_distance(a0, a1, b0, b1) -> float:
    """Minimal distance between two sets of segments."""
    cross = segments_intersect(a0[:, None, :], a1[:, None, :], b0[None, :, :], b1[None, :, :], 0.0)
    if np.any(cross):
        return 0.0
    d = min(
        point_segment_distance(a0, b0, b1).min(),
        point_segment_distance(a1, b0, b1).min(),
        point_segment_distance(b0, a0, a1).min(),
        point_segment_distance(b1, a0, a1).min(),
    )
    return float(d)


def min_distance(p, q: Iterable) -> float:
    """Minimal Euclidean distance between ``p`` and every carrier in ``q``.

    Carriers are polylines or point arrays.
    """
    a0, a1 = _carrier(p)
    best = np.inf
    for obj in q:
        b0, b1 = _carrier(obj)
        best = min(best, segment_distance(a0, a1, b0, b1))
    return float(best)


# --------------------------------------------------------------------------
# intersections


def segments_intersect(p0, p1, q0, q1, tol: float = DEFAULT_TOL) -> np.ndarray:
    """Closed-segment intersection test, broadcasting over leading axes."""
    d1 = p1 - p0
    d2 = q1 - q0
    scale = np.maximum(np.linalg.norm(d1, axis=-1), np.linalg.norm(d2, axis=-1))
    eps = tol * np.maximum(scale, 1e-300) ** 2
    o1 = cross2(d1, q0 - p0)
    o2 = cross2(d1, q1 - p0)
    o3 = cross2(d2, p0 - q0)
    o4 = cross2(d2, p1 - q0)
    proper = (((o1 > eps) & (o2 < -eps)) | ((o1 < -eps) & (o2 > eps))) & (
        ((o3 > eps) & (o4 < -eps)) | ((o3 < -eps) & (o4 > eps))
    )

    def on_seg(o, a, b, c):
        lo = np.minimum(a, b) - tol * scale[..., None]
        hi = np.maximum(a, b) + tol * scale[..., None]
        return (np.abs(o) <= eps) & np.all((c >= lo) & (c <= hi), axis=-1)

    touch = on_seg(o1, p0, p1, q0) | on_seg(o2, p0, p1, q1) | on_seg(o3, q0, q1, p0) | on_seg(o4, q0, q1, p1)
    return proper | touch


def crossing_pairs(a: np.ndarray, b: np.ndarray, ids: np.ndarray | None = None, tol: float = DEFAULT_TOL):
    """Indices ``(i, j)``, ``i < j``, of intersecting segments ``a[k] -> b[k]``.

    ``ids`` gives endpoint node ids ``(k, 2)``; pairs sharing a node are skipped.
    Uses a sweep over x-extents to prune candidates.
    """
    a = as_points(a)
    b = as_points(b)
    n = len(a)
    if n < 2:
        return []
    xmin = np.minimum(a[:, 0], b[:, 0])
    xmax = np.maximum(a[:, 0], b[:, 0])
    ymin = np.minimum(a[:, 1], b[:, 1])
    ymax = np.maximum(a[:, 1], b[:, 1])
    order = np.argsort(xmin, kind="stable")
    xs = xmin[order]
    ends = np.searchsorted(xs, xmax[order], side="right")
    pad = tol * max(1.0, float(np.max(np.abs(np.concatenate([a, b])))))
    counts = np.maximum(ends - np.arange(1, n + 1), 0)
    total = int(counts.sum())
    if total == 0:
        return []
    first = np.repeat(np.arange(n), counts)
    offset = np.arange(total) - np.repeat(np.cumsum(counts) - counts, counts)
    i = order[first]
    j = order[first + 1 + offset]
    keep = (ymin[j] <= ymax[i] + pad) & (ymax[j] >= ymin[i] - pad)
    i, j = i[keep], j[keep]
    if ids is not None:
        shared = (
            (ids[j, 0] == ids[i, 0]) | (ids[j, 0] == ids[i, 1]) | (ids[j, 1] == ids[i, 0]) | (ids[j, 1] == ids[i, 1])
        )
        i, j = i[~shared], j[~shared]
    if len(i) == 0:
        return []
    hit = segments_intersect(a[i], b[i], a[j], b[j], tol)
    lo = np.minimum(i[hit], j[hit])
    hi = np.maximum(i[hit], j[hit])
    return sorted(zip(lo.tolist(), hi.tolist()))


def polyline_self_intersects(points: np.ndarray, closed: bool, tol: float = DEFAULT_TOL) -> bool:
    pts = as_points(points)
    n = len(pts)
    idx = np.arange(n)
    if closed:
        a, b = pts, np.roll(pts, -1, axis=0)
        ids = np.stack([idx, np.roll(idx, -1)], axis=1)
    else:
        a, b = pts[:-1], pts[1:]
        ids = np.stack([idx[:-1], idx[1:]], axis=1)
    if crossing_pairs(a, b, ids, tol):
        return True
    # adjacent segments folding back onto each other
    d_in = b - a
    d_out = np.roll(d_in, -1, axis=0) if closed else d_in[1:]
    d_in = d_in if closed else d_in[:-1]
    cos = np.einsum("ij,ij->i", d_in, d_out) / (np.linalg.norm(d_in, axis=1) * np.linalg.norm(d_out, axis=1))
    sin = cross2(d_in, d_out) / (np.linalg.norm(d_in, axis=1) * np.linalg.norm(d_out, axis=1))
    return bool(np.any((cos < 0.0) & (np.abs(sin) <= tol)))


# --------------------------------------------------------------------------
# regions and balls


def points_in_polygon(points, polygon: np.ndarray) -> np.ndarray:
    """Even-odd containment of points in a simple closed polygon."""
    pts = as_points(points)
    poly = as_points(polygon)
    x, y = pts[:, 0][:, None], pts[:, 1][:, None]
    x0, y0 = poly[:, 0][None, :], poly[:, 1][None, :]
    x1, y1 = np.roll(poly[:, 0], -1)[None, :], np.roll(poly[:, 1], -1)[None, :]
    straddle = (y0 > y) != (y1 > y)
    with np.errstate(divide="ignore", invalid="ignore"):
        xc = x0 + (y - y0) * (x1 - x0) / (y1 - y0)
    hits = straddle & (x < xc)
    return (np.sum(hits, axis=1) % 2) == 1


def length_inside_ball(points: np.ndarray, center, radius: float, closed: bool = False) -> float:
    """Length of the part of a polyline inside the open ball ``B_radius(center)``."""
    pts = as_points(points)
    c = np.asarray(center, dtype=float)
    if closed:
        a, b = pts, np.roll(pts, -1, axis=0)
    else:
        a, b = pts[:-1], pts[1:]
    d = b - a
    f = a - c
    qa = np.einsum("ij,ij->i", d, d)
    qb = 2.0 * np.einsum("ij,ij->i", f, d)
    qc = np.einsum("ij,ij->i", f, f) - radius * radius
    disc = qb * qb - 4.0 * qa * qc
    ok = (disc > 0.0) & (qa > 0.0)
    sq = np.sqrt(np.where(ok, disc, 0.0))
    with np.errstate(divide="ignore", invalid="ignore"):
        t0 = np.where(ok, (-qb - sq) / (2.0 * qa), 0.0)
        t1 = np.where(ok, (-qb + sq) / (2.0 * qa), 0.0)
    lo = np.clip(t0, 0.0, 1.0)
    hi = np.clip(t1, 0.0, 1.0)
    frac = np.where(ok, np.maximum(hi - lo, 0.0), 0.0)
    return float(np.sum(frac * np.sqrt(qa)))


def resample_polyline(points: np.ndarray, n_segments: int) -> np.ndarray:
    """Uniform arc-length resampling of an open chain, endpoints kept exactly."""
    pts = as_points(points)
    seg = np.linalg.norm(np.diff(pts, axis=0), axis=1)
    s = np.concatenate([[0.0], np.cumsum(seg)])
    target = np.linspace(0.0, s[-1], n_segments + 1)
    out = np.column_stack([np.interp(target, s, pts[:, 0]), np.interp(target, s, pts[:, 1])])
    out[0] = pts[0]
    out[-1] = pts[-1]
    return out


def arc_points(p0, p1, curvature: float, n_segments: int) -> np.ndarray:
    """Circular arc from ``p0`` to ``p1`` with signed curvature (left turn positive)."""
    p0 = np.asarray(p0, dtype=float)
    p1 = np.asarray(p1, dtype=float)
    chord = p1 - p0
    c = float(np.linalg.norm(chord))
    t = np.linspace(0.0, 1.0, n_segments + 1)
    if abs(curvature) * c < 1e-12:
        return p0[None, :] + t[:, None] * chord[None, :]
    r = 1.0 / abs(curvature)
    if c > 2.0 * r:
        raise ValueError("chord longer than the circle diameter")
    half = np.arcsin(c / (2.0 * r))
    mid = 0.5 * (p0 + p1)
    nrm = left_normal(chord / c)
    # the centre lies on the left for a left-turning arc
    center = mid + np.sign(curvature) * np.sqrt(max(r * r - 0.25 * c * c, 0.0)) * nrm
    a0 = np.arctan2(*(p0 - center)[::-1])
    sweep = 2.0 * half * np.sign(curvature)
    ang = a0 + sweep * t
    out = center[None, :] + r * np.column_stack([np.cos(ang), np.sin(ang)])
    out[0] = p0
    out[-1] = p1
    return out


def regular_polygon(n: int, radius: float = 1.0, center=(0.0, 0.0), phase: float = 0.0) -> np.ndarray:
    ang = phase + 2.0 * np.pi * np.arange(n) / n
    return np.column_stack([center[0] + radius * np.cos(ang), center[1] + radius * np.sin(ang)])


def rotation(theta: float) -> np.ndarray:
    c, s = np.cos(theta), np.sin(theta)
    return np.array([[c, -s], [s, c]])


def as_polylines(items: Sequence) -> list[Polyline]:
    return [it if isinstance(it, Polyline) else Polyline(it) for it in items]
