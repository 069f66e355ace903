"""Competitor constructions: de-collapsing, volume-preserving bumps, and an
upper-bound probe for the minimal energy at small liquid area."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass

import numpy as np

from .film import (
    FilmComplex,
    FilmEdge,
    LiquidRegion,
    Vertex,
    WireFrame,
    liquid_volume,
    relaxed_energy,
    validate,
)
from .geometry import Polyline, fit_curvature, normal_offset, point_segment_distance, polygon_area
from .solver import _arclength, _at
from .spanning import SpanningSpec, is_spanning, steiner_baseline

__all__ = [
    "DecollapseParams",
    "PerturbationTrace",
    "ProbeRow",
    "boundary_length",
    "bump_competitor",
    "decollapse",
    "default_sites",
    "expansion_fit",
    "fit_exponent",
    "max_bump_t",
    "upper_bound_probe",
]


@dataclass(frozen=True)
class DecollapseParams:
    eta: float
    delta: float

    def __post_init__(self):
        for name in ("eta", "delta"):
            v = getattr(self, name)
            if not (0.0 < v < 1.0):
                raise ValueError(f"{name} must lie in (0, 1), got {v}")


@dataclass(frozen=True)
class PerturbationTrace:
    ts: tuple[float, ...]
    energies: tuple[float, ...]
    fitted_slope: float
    fitted_quadratic: float
    baseline: float
    residual: float

    def __post_init__(self):
        ts = np.asarray(self.ts, dtype=float)
        if len(ts) == 0 or np.any(ts <= 0.0) or np.any(np.diff(ts) <= 0.0):
            raise ValueError("ts must be positive and strictly increasing")
        if len(self.energies) != len(ts) or not np.all(np.isfinite(self.energies)):
            raise ValueError("need one finite energy per t")

    def to_csv(self) -> str:
        buf = io.StringIO()
        out = csv.writer(buf, lineterminator="\r\n")
        out.writerow(["t", "energy", "baseline", "slope", "quad", "residual"])
        for t, e in zip(self.ts, self.energies):
            out.writerow([repr(t), repr(e), repr(self.baseline), repr(self.fitted_slope),
                          repr(self.fitted_quadratic), repr(self.residual)])
        return buf.getvalue()


def fit_exponent(x, y) -> float:
    """Slope of the least-squares line through ``(log x, log y)``."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if len(x) < 2 or np.any(x <= 0.0) or np.any(y <= 0.0):
        raise ValueError("log-log fit needs at least two positive points")
    return float(np.polyfit(np.log(x), np.log(y), 1)[0])


# --------------------------------------------------------------------------
# small helpers


def _refine(pts: np.ndarray, extra_s) -> np.ndarray:
    """Insert points at arc lengths ``extra_s`` without changing the curve."""
    cum = _arclength(pts)
    s = np.union1d(cum, np.clip(np.asarray(extra_s, dtype=float), 0.0, cum[-1]))
    keep = np.concatenate([[True], np.diff(s) > 1e-12 * cum[-1]])
    s = s[keep]
    s[-1] = cum[-1]
    out = _at(pts, s, cum)
    # original vertices are reproduced bit for bit
    hit = np.searchsorted(s, cum)
    hit = np.minimum(hit, len(s) - 1)
    exact = np.abs(s[hit] - cum) <= 1e-12 * cum[-1]
    out[hit[exact]] = pts[exact]
    return out


def _sigma(f: FilmComplex) -> np.ndarray:
    return np.array([v.position for v in f.vertices], dtype=float).reshape(-1, 2)


def _dist_to_edges(pts: np.ndarray, edges) -> np.ndarray:
    best = np.full(len(pts), np.inf)
    for e in edges:
        d = point_segment_distance(pts, e.points[:-1], e.points[1:])
        best = np.minimum(best, d.min(axis=1))
    return best


def _project(f: FilmComplex, x, candidates) -> tuple[int, float, float]:
    """Nearest ``(edge, arc length, distance)`` of ``x`` over ``candidates``."""
    x = np.asarray(x, dtype=float).reshape(1, 2)
    best = (-1, 0.0, np.inf)
    for k in candidates:
        pts = f.edges[k].points
        a, b = pts[:-1], pts[1:]
        d = b - a
        ll = np.einsum("ij,ij->i", d, d)
        tt = np.clip(np.einsum("ij,ij->i", x - a, d) / np.where(ll > 0, ll, 1.0), 0.0, 1.0)
        dist = np.linalg.norm(a + tt[:, None] * d - x, axis=1)
        i = int(np.argmin(dist))
        if dist[i] < best[2]:
            cum = _arclength(pts)
            best = (k, float(cum[i] + tt[i] * np.sqrt(ll[i])), float(dist[i]))
    if best[0] < 0:
        raise ValueError("no candidate edge to place the construction on")
    return best


def _union(f: FilmComplex, g: FilmComplex) -> FilmComplex:
    nv, ne = len(f.vertices), len(f.edges)
    edges = [FilmEdge(e.start + nv, e.end + nv, e.points, e.multiplicity) for e in g.edges]
    regions = [LiquidRegion(tuple((e + ne, fw) for e, fw in r.loop)) for r in g.regions]
    return FilmComplex(f.wireframe, f.vertices + g.vertices, f.edges + tuple(edges), f.regions + tuple(regions))


def boundary_length(f: FilmComplex) -> float:
    """Total length of the liquid boundary (each boundary edge once)."""
    return float(sum(f.edges[k].length for k in f.boundary_edges()))


# --------------------------------------------------------------------------
# de-collapsing


def _open_edges(f: FilmComplex, opened: dict[int, tuple[np.ndarray, np.ndarray, int]]) -> FilmComplex:
    """Replace each listed mult-2 edge by a mult-1 copy plus its offset curve."""
    edges = list(f.edges)
    regions = list(f.regions)
    for k, (base, off, side) in opened.items():
        e = f.edges[k]
        edges[k] = FilmEdge(e.start, e.end, base, 1)
        j = len(edges)
        edges.append(FilmEdge(e.start, e.end, off, 1))
        # the sliver lies left of its loop
        loop = ((k, True), (j, False)) if side == 1 else ((j, True), (k, False))
        regions.append(LiquidRegion(loop))
    return FilmComplex(f.wireframe, f.vertices, tuple(edges), tuple(regions))


def _offset(base: np.ndarray, u: np.ndarray, side: int) -> np.ndarray:
    off = normal_offset(Polyline(base), u, side).vertices.copy()
    off[0], off[-1] = base[0], base[-1]
    return off


def _try_open(f: FilmComplex, k: int, base: np.ndarray, u: np.ndarray, side: int) -> np.ndarray | None:
    try:
        off = _offset(base, u, side)
    except ValueError:
        return None
    g = _open_edges(f, {k: (base, off, side)})
    return None if validate(g) else off


def _edge_fields(f: FilmComplex, k: int, eta: float):
    """Refined base polyline and the caps of ``u`` that do not depend on delta."""
    e = f.edges[k]
    L = e.length
    ramp = np.linspace(0.0, min(4.0 * eta, L), 17)
    extra = np.concatenate([ramp, L - ramp, np.linspace(0.0, L, 129)])
    base = _refine(e.points, extra)
    sigma = _sigma(f)
    d_sigma = np.min(np.linalg.norm(base[:, None, :] - sigma[None, :, :], axis=2), axis=1)
    d_bdry = _dist_to_edges(base, [f.edges[j] for j in f.boundary_edges()])
    d_wire = np.maximum(f.wireframe.distance(base), 0.0)
    near = np.minimum(np.minimum(d_sigma, d_bdry), d_wire) / 2.0
    near[0] = near[-1] = 0.0
    kappa = np.abs(fit_curvature(Polyline(base)))
    with np.errstate(divide="ignore"):
        curv = np.where(kappa > 0.0, 1.0 / kappa, np.inf)
    return base, near, curv


def _tube_radius(f: FilmComplex, k: int, base: np.ndarray, near: np.ndarray, side: int) -> float:
    """Largest amplitude ``c`` with an embedded offset ``min(c, near)``, by bisection."""
    hi = f.edges[k].length
    if _try_open(f, k, base, np.minimum(hi, near), side) is not None:
        return hi
    lo = 0.0
    for _ in range(8):
        mid = 0.5 * (lo + hi)
        if _try_open(f, k, base, np.minimum(mid, near), side) is not None:
            lo = mid
        else:
            hi = mid
    return lo


def decollapse(f: FilmComplex, p: DecollapseParams, check_spanning: SpanningSpec | None = None,
               retries: int = 10) -> tuple[FilmComplex, float]:
    """Open every multiplicity-2 edge into a thin one-sided sliver.

    The offset amplitude at each vertex is the smallest of ``eta``, half the
    distance to vertices, liquid boundary and wire frame, ``delta`` times the
    feasible tube radius and ``delta`` over the curvature. Returns the opened
    complex and the length of its liquid boundary.
    """
    collapsed = [k for k, e in enumerate(f.edges) if e.multiplicity == 2]
    if not collapsed and not f.regions:
        raise ValueError("nothing to de-collapse: no multiplicity-2 edges and no liquid")
    problems = validate(f)
    if problems:
        raise ValueError("input film is invalid: " + "; ".join(problems))
    fields = {}
    for k in collapsed:
        base, near, curv = _edge_fields(f, k, p.eta)
        choice = None
        for side in (1, -1):
            rho = _tube_radius(f, k, base, near, side)
            if rho > 0.0 and (choice is None or rho > choice[1]):
                choice = (side, rho)
        if choice is None:
            raise ValueError(f"edge {k} admits no embedded offset on either side")
        fields[k] = (base, near, curv, choice[0], choice[1])

    delta = p.delta
    for _ in range(retries + 1):
        opened = {}
        ok = True
        for k, (base, near, curv, side, rho) in fields.items():
            u = np.minimum(np.minimum(np.minimum(p.eta, near), delta * rho), delta * curv)
            try:
                opened[k] = (base, _offset(base, u, side), side)
            except ValueError:
                ok = False
                break
        if ok:
            g = _open_edges(f, opened)
            if not validate(g):
                break
        delta *= 0.5
    else:
        raise ValueError(f"offset not embedded after {retries} halvings of delta")

    # K must survive inside the boundary of the opened set
    bdry = [g.edges[j] for j in g.boundary_edges()]
    for e in f.edges:
        if _dist_to_edges(e.points, bdry).max() > 1e-9:
            raise ValueError("de-collapsed boundary does not contain K")
    if check_spanning is not None and not is_spanning(g, f.wireframe, check_spanning).spanning:
        raise ValueError("de-collapsed film is not spanning")
    return g, boundary_length(g)


# --------------------------------------------------------------------------
# bump competitor


def _profile(s: np.ndarray, center: float, r: float) -> np.ndarray:
    sig = np.clip((s - center) / r, -1.0, 1.0)
    return (1.0 - sig**2) ** 2


@dataclass(frozen=True)
class _Window:
    edge: int
    s0: float
    r: float
    pts: np.ndarray  # window points on the original curve
    phi: np.ndarray  # unit-amplitude profile
    direction: np.ndarray  # fixed displacement direction
    unit_area: float  # area swept per unit amplitude
    before: np.ndarray
    after: np.ndarray


def _window(f: FilmComplex, k: int, s0: float, r: float, direction_sign: int, n: int = 64) -> _Window:
    e = f.edges[k]
    pts = e.points
    cum = _arclength(pts)
    lo, hi = s0 - r, s0 + r
    if lo <= 0.0 or hi >= cum[-1]:
        raise ValueError("construction window leaves its edge")
    fine = _refine(pts, np.concatenate([[lo, hi], np.linspace(lo, hi, n + 1)]))
    fs = _arclength(fine)
    i0 = int(np.argmin(np.abs(fs - lo)))
    i1 = int(np.argmin(np.abs(fs - hi)))
    win = fine[i0 : i1 + 1]
    chord = win[-1] - win[0]
    d = direction_sign * np.array([-chord[1], chord[0]]) / np.linalg.norm(chord)
    phi = _profile(fs[i0 : i1 + 1], s0, r)
    phi[0] = phi[-1] = 0.0
    moved = win + phi[:, None] * d
    unit = polygon_area(np.vstack([win, moved[::-1][1:-1]]))
    return _Window(k, s0, r, win, phi, d, abs(unit), fine[: i0 + 1], fine[i1:])


def _radius(f: FilmComplex, x, override: float | None) -> float:
    d = float(np.min(np.linalg.norm(_sigma(f) - np.asarray(x, dtype=float), axis=1)))
    if override is None:
        return 0.25 * d
    if not 0.0 < override <= 0.5 * d:
        raise ValueError(f"window radius {override} does not fit: distance to the nearest vertex is {d:.3e}")
    return float(override)


def _bulge_window(f, x1, r1):
    mult2 = [k for k, e in enumerate(f.edges) if e.multiplicity == 2]
    if not mult2:
        raise ValueError("no multiplicity-2 edge to bulge")
    k, s, _ = _project(f, x1, mult2)
    r = _radius(f, _at(f.edges[k].points, np.array([s]), _arclength(f.edges[k].points))[0], r1)
    return _window(f, k, s, r, +1)


def _dent_window(f, x2, r2):
    owner = {}
    for ri, reg in enumerate(f.regions):
        for e, fw in reg.loop:
            owner[e] = fw
    if not owner:
        raise ValueError("no liquid boundary to dent")
    k, s, _ = _project(f, x2, sorted(owner))
    r = _radius(f, _at(f.edges[k].points, np.array([s]), _arclength(f.edges[k].points))[0], r2)
    # move toward the region interior, which lies left of the loop
    return _window(f, k, s, r, +1 if owner[k] else -1)


def max_bump_t(f: FilmComplex, x1=None, x2=None, r1: float | None = None, r2: float | None = None) -> float:
    """Largest ``t`` whose bump and dent stay inside their cylinders."""
    limits = []
    if x1 is not None:
        w = _bulge_window(f, x1, r1)
        limits.append(w.r * w.unit_area)
    if x2 is not None:
        w = _dent_window(f, x2, r2)
        limits.append(w.r * w.unit_area)
    if not limits:
        raise ValueError("need x1 or x2")
    return float(min(limits))


def bump_competitor(f: FilmComplex, t: float, x1=None, x2=None, r1: float | None = None,
                    r2: float | None = None, spec: SpanningSpec | None = None) -> FilmComplex:
    """Bulge one sheet of a collapsed edge near ``x1`` by area ``t`` and dent the
    liquid boundary near ``x2`` by the same area.

    Either point may be omitted to build the one-sided construction. Windows
    default to a quarter of the distance to the nearest vertex. When ``spec``
    is given, the competitor is re-checked for spanning.
    """
    if t < 0.0:
        raise ValueError("t must be non-negative")
    if x1 is None and x2 is None:
        raise ValueError("need x1 or x2")
    if t == 0.0:
        return f
    w1 = _bulge_window(f, x1, r1) if x1 is not None else None
    w2 = _dent_window(f, x2, r2) if x2 is not None else None
    if w1 is not None and w2 is not None:
        c1 = w1.pts[len(w1.pts) // 2]
        c2 = w2.pts[len(w2.pts) // 2]
        if np.linalg.norm(c1 - c2) <= np.sqrt(2.0) * (w1.r + w2.r):
            raise ValueError("bump and dent cylinders overlap")
    t_max = min(w.r * w.unit_area for w in (w1, w2) if w is not None)
    if t >= t_max:
        raise ValueError(f"t too large: bump exits its cylinder (max admissible t = {t_max:.6e})")

    vertices = list(f.vertices)
    edges = list(f.edges)
    regions = list(f.regions)
    if w2 is not None:
        e = f.edges[w2.edge]
        dented = w2.pts + (t / w2.unit_area) * w2.phi[:, None] * w2.direction
        pts = np.vstack([w2.before[:-1], dented, w2.after[1:]])
        edges[w2.edge] = FilmEdge(e.start, e.end, pts, e.multiplicity)
    if w1 is not None:
        e = f.edges[w1.edge]
        a, b = len(vertices), len(vertices) + 1
        vertices += [Vertex(tuple(w1.pts[0])), Vertex(tuple(w1.pts[-1]))]
        edges[w1.edge] = FilmEdge(e.start, a, w1.before, 2)
        straight = len(edges)
        edges.append(FilmEdge(a, b, w1.pts, 1))
        bulge = len(edges)
        edges.append(FilmEdge(a, b, w1.pts + (t / w1.unit_area) * w1.phi[:, None] * w1.direction, 1))
        edges.append(FilmEdge(b, e.end, w1.after, 2))
        regions.append(LiquidRegion(((straight, True), (bulge, False))))
    out = FilmComplex(f.wireframe, tuple(vertices), tuple(edges), tuple(regions))
    problems = validate(out)
    if problems:
        raise ValueError(f"competitor at t={t:.6e} is invalid: " + "; ".join(problems))
    if spec is not None and not is_spanning(out, f.wireframe, spec).spanning:
        raise ValueError(f"competitor at t={t:.6e} is not spanning")
    return out


def default_sites(f: FilmComplex):
    """Arc-length midpoints of the longest collapsed edge and the longest boundary edge."""
    def mid(k):
        pts = f.edges[k].points
        cum = _arclength(pts)
        return _at(pts, np.array([0.5 * cum[-1]]), cum)[0]

    mult2 = [k for k, e in enumerate(f.edges) if e.multiplicity == 2]
    bdry = sorted(f.boundary_edges())
    x1 = mid(max(mult2, key=lambda k: f.edges[k].length)) if mult2 else None
    x2 = mid(max(bdry, key=lambda k: f.edges[k].length)) if bdry else None
    return x1, x2


def expansion_fit(f: FilmComplex, ts, x1=None, x2=None, r1: float | None = None, r2: float | None = None,
                  spec: SpanningSpec | None = None) -> PerturbationTrace:
    """Fit ``F(t) = F(0) + s t + q t^2`` over bump competitors.

    ``x1`` and ``x2`` default to the midpoints chosen by :func:`default_sites`.
    """
    ts = np.asarray(ts, dtype=float)
    if len(ts) < 4:
        raise ValueError("need at least 4 values of t")
    if np.any(ts <= 0.0) or np.any(np.diff(ts) <= 0.0):
        raise ValueError("ts must be positive and strictly increasing")
    if ts[-1] < 10.0 * ts[0] * (1.0 - 1e-12):
        raise ValueError("ts must span at least a decade")
    if x1 is None and x2 is None:
        x1, x2 = default_sites(f)
    base = relaxed_energy(f)
    energies = []
    for t in ts:
        energies.append(relaxed_energy(bump_competitor(f, float(t), x1, x2, r1, r2, spec)))
    dE = np.asarray(energies) - base
    A = np.column_stack([ts, ts**2])
    coef, *_ = np.linalg.lstsq(A, dE, rcond=None)
    resid = float(np.linalg.norm(A @ coef - dE))
    return PerturbationTrace(tuple(float(t) for t in ts), tuple(energies), float(coef[0]), float(coef[1]),
                             base, resid)


# --------------------------------------------------------------------------
# upper-bound probe


@dataclass(frozen=True)
class ProbeRow:
    epsilon: float
    estimate: float
    opened_area: float
    eta: float
    baseline: float  # twice the Steiner length


def _ball(area: float, center, n: int = 1024) -> FilmComplex:
    # regular n-gon with the requested area
    radius = np.sqrt(2.0 * area / (n * np.sin(2.0 * np.pi / n)))
    ang = 2.0 * np.pi * np.arange(n + 1) / n
    pts = np.column_stack([center[0] + radius * np.cos(ang), center[1] + radius * np.sin(ang)])
    pts[-1] = pts[0]
    return FilmComplex(WireFrame(()), (Vertex(tuple(pts[0])),), (FilmEdge(0, 0, pts),), (LiquidRegion(((0, True),)),))


def upper_bound_probe(w: WireFrame, spec: SpanningSpec, epsilons, area_fraction: float = 1e-2,
                      check: bool = True) -> list[ProbeRow]:
    """Energy of explicit competitors: an opened Plateau network plus a far round drop.

    The network is opened until it holds less than ``area_fraction`` of the
    liquid; the rest sits in a disk placed one frame diameter away from
    everything.
    """
    eps_list = [float(e) for e in epsilons]
    if any(not e > 0.0 for e in eps_list):
        raise ValueError("ε must be positive")
    ell, S = steiner_baseline(w, spec)
    lo, hi = w.bbox()
    diam = w.diameter()
    box_hi = hi + 2.0 * diam
    rows = []
    for eps in eps_list:
        eta = min(0.5, area_fraction * eps / max(ell, 1e-12))
        while True:
            F, _ = decollapse(S, DecollapseParams(eta, eta))
            area = liquid_volume(F)
            if area < area_fraction * eps:
                break
            eta *= 0.5
        rest = eps - area
        radius = np.sqrt(rest / np.pi)
        pts = np.vstack([e.points for e in F.edges])
        x_far = max(float(pts[:, 0].max()), float(hi[0]))
        center = (x_far + diam + radius, 0.5 * float(lo[1] + hi[1]))
        if center[0] + radius > box_hi[0]:
            raise ValueError("no room to place the drop inside the working box")
        probe = _union(F, _ball(rest, center))
        if check:
            problems = validate(probe)
            if problems:
                raise ValueError(f"probe at ε={eps:g} is invalid: " + "; ".join(problems))
            if abs(liquid_volume(probe) - eps) > 1e-9 * eps:
                raise ValueError(f"probe at ε={eps:g} misses the target area")
            if not is_spanning(probe, w, spec).spanning:
                raise ValueError(f"probe at ε={eps:g} is not spanning")
        rows.append(ProbeRow(eps, relaxed_energy(probe), area, eta, 2.0 * ell))
    return rows
