"""Checks of the structural properties a minimizing film should have."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .film import FilmComplex, WireFrame
from .geometry import ConvexPolygon, convex_hull, length_inside_ball

__all__ = [
    "TestField",
    "VerificationReport",
    "convex_hull_check",
    "density_check",
    "disk_hull_margin",
    "first_variation_check",
    "first_variation_residual",
    "hull_field_residual",
    "junction_check",
    "random_fields",
    "radial_field",
    "steiner_angle_deviation",
]


@dataclass(frozen=True)
class VerificationReport:
    check: str
    passed: bool
    margin: float
    details: str = ""
    applicable: bool = True

    def __post_init__(self):
        if not np.isfinite(self.margin):
            raise ValueError(f"{self.check}: margin must be finite")

    @property
    def status(self) -> str:
        if not self.applicable:
            return "skipped"
        return "pass" if self.passed else "fail"

    def row(self) -> dict:
        return {"check": self.check, "status": self.status, "margin": self.margin, "details": self.details}


# --------------------------------------------------------------------------
# sampling helpers


def _samples(f: FilmComplex) -> np.ndarray:
    """Polyline vertices and segment midpoints of every edge."""
    chunks = []
    for e in f.edges:
        chunks.append(e.points)
        chunks.append(0.5 * (e.points[:-1] + e.points[1:]))
    return np.vstack(chunks) if chunks else np.zeros((0, 2))


def disk_hull_margin(w: WireFrame, points, n_angles: int = 2048) -> np.ndarray:
    """Signed distance to the boundary of conv(W), positive inside.

    Uses the support function ``h(n) = max_i c_i.n + r_i``: the margin of ``p``
    is ``min_n h(n) - p.n``, exact for convex sets on both sides.
    """
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    c, r = w.centers, w.radii

    def gap(theta):
        n = np.stack([np.cos(theta), np.sin(theta)], axis=-1)
        h = np.max(np.einsum("...k,ik->...i", n, c) + r, axis=-1)
        return h - np.einsum("...k,...k->...", n, pts if n.ndim == 2 else pts[:, None, :])

    grid = 2.0 * np.pi * np.arange(n_angles) / n_angles
    vals = gap(np.broadcast_to(grid, (len(pts), n_angles)))
    k = np.argmin(vals, axis=1)
    step = 2.0 * np.pi / n_angles
    lo, hi = grid[k] - step, grid[k] + step
    # golden-section refinement of each bracket
    g = (np.sqrt(5.0) - 1.0) / 2.0
    for _ in range(60):
        a = hi - g * (hi - lo)
        b = lo + g * (hi - lo)
        left = gap(a) < gap(b)
        hi = np.where(left, b, hi)
        lo = np.where(left, lo, a)
    return np.minimum(vals.min(axis=1), gap(0.5 * (lo + hi)))


def _anchor_hull(f: FilmComplex) -> ConvexPolygon:
    return convex_hull(f.anchor_points())


# --------------------------------------------------------------------------
# convex hull


def convex_hull_check(f: FilmComplex, lam: float, tol: float = 1e-9) -> VerificationReport:
    """Containment of K in conv(W), and in conv of its anchor points when λ < 0.

    Anchor points sit on the boundary of their own hull and are checked
    against ``tol``; the reported margin is taken over the remaining samples.
    """
    pts = _samples(f)
    if len(pts) == 0:
        return VerificationReport("convex_hull", True, 0.0, "empty film")
    wire = disk_hull_margin(f.wireframe, pts) if len(f.wireframe) else np.full(len(pts), np.inf)
    wire_margin = float(wire.min())
    diam = f.wireframe.diameter() if len(f.wireframe) else 1.0
    if lam > 0.0:
        return VerificationReport(
            "convex_hull", False, wire_margin,
            f"hypothesis λ≤0 not met (λ={lam:.6g}); min margin to conv(W) {wire_margin:.3e} "
            f"({wire_margin / diam:.3e} diameters)",
            applicable=False,
        )
    ok = wire_margin >= -tol
    margin = wire_margin
    details = f"min margin to conv(W) {wire_margin:.3e}"
    anchors = f.anchor_points()
    if lam < 0.0 and len(anchors):
        hull = _anchor_hull(f)
        sd = hull.signed_distance(pts)
        at_anchor = np.min(np.linalg.norm(pts[:, None, :] - anchors[None, :, :], axis=2), axis=1) <= tol
        if np.any(sd[at_anchor] < -tol):
            ok = False
        rest = sd[~at_anchor]
        inner = float(rest.min()) if len(rest) else 0.0
        ok = ok and inner >= -tol
        margin = min(margin, inner)
        details += f"; min margin to the anchor hull {inner:.3e}"
    return VerificationReport("convex_hull", bool(ok), margin, details)


# --------------------------------------------------------------------------
# first variation


@dataclass(frozen=True)
class TestField:
    """A vector field ``X(points) -> (n, 2)`` vanishing within ``support`` of W."""

    __test__ = False  # not a pytest class despite the name

    func: Callable[[np.ndarray], np.ndarray]
    support: float = 0.0

    def __call__(self, points) -> np.ndarray:
        return np.asarray(self.func(np.asarray(points, dtype=float)), dtype=float)

    def scaled(self, a: float) -> "TestField":
        return TestField(lambda p: a * self.func(p), self.support)


def _ramp(x):
    """C2 step from 0 at x<=0 to 1 at x>=1."""
    x = np.clip(x, 0.0, 1.0)
    return x**3 * (10.0 - 15.0 * x + 6.0 * x**2)


def _ramp_prime(x):
    inside = (x > 0.0) & (x < 1.0)
    xc = np.clip(x, 0.0, 1.0)
    return np.where(inside, 30.0 * xc**2 * (1.0 - xc) ** 2, 0.0)


def random_fields(w: WireFrame, n: int, seed: int = 0, support: float | None = None,
                  modes: int = 3) -> list[TestField]:
    """Smooth random fields cut off near the wire frame."""
    if support is None:
        support = 0.5 * float(w.radii.min()) if len(w) else 0.0
    rng = np.random.default_rng(seed)
    scale = w.diameter() if len(w) else 1.0
    out = []
    for _ in range(n):
        freq = rng.normal(size=(modes, 2)) * (2.0 * np.pi / scale)
        phase = rng.uniform(0.0, 2.0 * np.pi, size=(modes, 2))
        amp = rng.normal(size=(modes, 2)) / modes

        def func(p, freq=freq, phase=phase, amp=amp):
            arg = p @ freq.T  # (n, modes)
            val = np.stack([np.sin(arg + phase[:, 0]) @ amp[:, 0], np.sin(arg + phase[:, 1]) @ amp[:, 1]], axis=1)
            if len(w) and support > 0.0:
                val = val * _ramp(w.distance(p) / support - 1.0)[:, None]
            return val

        out.append(TestField(func, support))
    return out


def radial_field(inner: float, outer: float, center=(0.0, 0.0)) -> TestField:
    """``psi(|x|) x/|x|`` with a smooth bump ``psi`` supported in an annulus."""
    c = np.asarray(center, dtype=float)

    def func(p):
        d = p - c
        r = np.linalg.norm(d, axis=1)
        s = (r - inner) / (outer - inner)
        psi = np.where((s > 0) & (s < 1), (4.0 * s * (1.0 - s)) ** 3, 0.0)
        return psi[:, None] * d / np.where(r > 0, r, 1.0)[:, None]

    return TestField(func)


def _check_support(f: FilmComplex, X: TestField):
    w = f.wireframe
    if not len(w):
        return
    pts = _samples(f)
    near = w.distance(pts) < X.support
    if X.support <= 0.0:
        near = w.distance(pts) <= 1e-12
    vals = X(pts[near]) if np.any(near) else np.zeros((0, 2))
    if len(vals) and np.max(np.abs(vals)) > 0.0:
        raise ValueError("test field does not vanish near the wire frame")


def _variation_sides(f: FilmComplex, X: TestField) -> tuple[float, float]:
    """``(∫_{∂E} X·ν, Σ_e m_e ∫_e div^K X)`` by the composite midpoint rule.

    Along each segment ``div^K X = d/ds (X·τ)`` is the difference quotient of
    the endpoint values, so its midpoint integral is the endpoint difference.
    """
    div = 0.0
    for e in f.edges:
        p = e.points
        seg = np.diff(p, axis=0)
        length = np.linalg.norm(seg, axis=1)
        tau = seg / length[:, None]
        vals = X(p)
        div += e.multiplicity * float(np.sum(np.einsum("ij,ij->i", vals[1:] - vals[:-1], tau)))
    flux = 0.0
    for r in f.regions:
        for k, fwd in r.loop:
            p = f.edges[k].oriented(fwd)
            seg = np.diff(p, axis=0)
            # outward normal is the right normal of a counterclockwise loop
            nu = np.column_stack([seg[:, 1], -seg[:, 0]])
            mid = 0.5 * (p[:-1] + p[1:])
            flux += float(np.sum(np.einsum("ij,ij->i", X(mid), nu)))
    return flux, div


def first_variation_residual(f: FilmComplex, lam: float, fields: Sequence[TestField]) -> float:
    """Largest imbalance ``|λ∫X·ν − Σ m ∫div^K X|`` over the test fields."""
    worst = 0.0
    for X in fields:
        _check_support(f, X)
        flux, div = _variation_sides(f, X)
        worst = max(worst, abs(lam * flux - div))
    return worst


def first_variation_check(f: FilmComplex, lam: float, fields: Sequence[TestField],
                          rtol: float = 1e-2) -> VerificationReport:
    """Residual of the first-variation identity relative to the size of its terms."""
    worst, scale = 0.0, 0.0
    for X in fields:
        _check_support(f, X)
        flux, div = _variation_sides(f, X)
        worst = max(worst, abs(lam * flux - div))
        scale = max(scale, abs(lam * flux), abs(div))
    rel = worst / scale if scale > 0.0 else 0.0
    return VerificationReport("first_variation", rel <= rtol, rel,
                              f"max residual {worst:.3e} over {len(fields)} fields, relative {rel:.3e}")


# --------------------------------------------------------------------------
# hull test field


class _HullDistance:
    """Distance to a convex polygon (or segment or point) with its derivatives."""

    def __init__(self, hull: ConvexPolygon):
        v = hull.vertices
        self.vertices = v
        if len(v) >= 3:
            self.a, self.b = v, np.roll(v, -1, axis=0)
        elif len(v) == 2:
            self.a, self.b = v[:1], v[1:]
        else:
            self.a, self.b = v[:0], v[:0]
        self.hull = hull

    def __call__(self, pts):
        """Distance, gradient, and whether the nearest feature is a vertex."""
        pts = np.asarray(pts, dtype=float).reshape(-1, 2)
        best = np.linalg.norm(pts[:, None, :] - self.vertices[None, :, :], axis=2)
        k = np.argmin(best, axis=1)
        dist = best[np.arange(len(pts)), k]
        foot = self.vertices[k]
        on_vertex = np.ones(len(pts), dtype=bool)
        fan_gap = np.full(len(pts), np.inf)
        if len(self.a):
            d = self.b - self.a
            ll = np.einsum("ij,ij->i", d, d)
            t = np.einsum("pij,ij->pi", pts[:, None, :] - self.a[None], d) / ll
            fan_gap = np.min(np.minimum(np.abs(t), np.abs(1.0 - t)) * np.sqrt(ll), axis=1)
            inner = (t > 0.0) & (t < 1.0)
            proj = self.a[None] + np.clip(t, 0.0, 1.0)[..., None] * d[None]
            de = np.linalg.norm(pts[:, None, :] - proj, axis=2)
            de = np.where(inner, de, np.inf)
            j = np.argmin(de, axis=1)
            dj = de[np.arange(len(pts)), j]
            use = dj < dist
            dist = np.where(use, dj, dist)
            foot = np.where(use[:, None], proj[np.arange(len(pts)), j], foot)
            on_vertex = ~use
        if len(self.vertices) >= 3:
            inside = self.hull.signed_distance(pts) >= 0.0
            dist = np.where(inside, 0.0, dist)
        grad = np.zeros_like(pts)
        pos = dist > 0.0
        grad[pos] = (pts[pos] - foot[pos]) / dist[pos, None]
        return dist, grad, on_vertex, fan_gap


def hull_field_residual(f: FilmComplex, lam: float, eta: float, tol: float = 1e-8) -> VerificationReport:
    """Sign certificates for the field ``γ(u)∇u`` with ``u = dist(·, Z)``.

    ``Z`` is the hull of the anchor points and ``γ`` rises from 0 at ``2η`` to
    1 at ``3η``. Certifies that ``div^K X ≥ 0`` samplewise, that the first
    variation identity holds to ``tol``, and when λ < 0 that the liquid stays
    within ``η`` of ``Z``.
    """
    name = "hull_field"
    if lam > 0.0:
        return VerificationReport(name, False, 0.0, f"hypothesis not met (λ={lam:.6g} > 0)", applicable=False)
    if eta <= 0.0:
        raise ValueError("eta must be positive")
    anchors = f.anchor_points()
    if len(anchors) == 0:
        return VerificationReport(name, False, 0.0, "no anchors, so Z is empty", applicable=False)
    hd = _HullDistance(convex_hull(anchors))

    def func(p):
        u, g, _, _ = hd(p)
        return _ramp((u - 2.0 * eta) / eta)[:, None] * g

    X = TestField(func)
    # samplewise divergence along each segment, at segment midpoints
    worst_div = np.inf
    skipped = 0
    for e in f.edges:
        p = e.points
        seg = np.diff(p, axis=0)
        tau = seg / np.linalg.norm(seg, axis=1)[:, None]
        mid = 0.5 * (p[:-1] + p[1:])
        u, g, vert, fan = hd(mid)
        keep = fan > 1e-9
        skipped += int(np.sum(~keep))
        tg = np.einsum("ij,ij->i", tau, g)
        div = _ramp_prime((u - 2.0 * eta) / eta) / eta * tg**2
        curv = np.where(vert & (u > 0.0), (1.0 - tg**2) / np.where(u > 0.0, u, 1.0), 0.0)
        div = div + _ramp((u - 2.0 * eta) / eta) * curv
        if np.any(keep):
            worst_div = min(worst_div, float(div[keep].min()))
    if not np.isfinite(worst_div):
        worst_div = 0.0
    flux, total_div = _variation_sides(f, X)
    lam_flux = lam * flux
    residual = abs(lam_flux - total_div)
    ok_div = worst_div >= -1e-9
    ok_flux = lam_flux <= tol
    ok_identity = residual <= tol
    details = [f"min div^K X {worst_div:.3e}", f"λ∫X·ν {lam_flux:.3e}", f"identity residual {residual:.3e}"]
    if skipped:
        details.append(f"{skipped} samples on the normal fan skipped")
    ok = ok_div and ok_flux and ok_identity
    if lam < 0.0 and f.regions:
        far = max(float(hd(f.region_points(k))[0].max()) for k in range(len(f.regions)))
        details.append(f"max liquid distance to Z {far:.3e}")
        ok = ok and far < eta
    if not ok_identity:
        details.append("identity violated: configuration is not stationary")
    return VerificationReport(name, bool(ok), residual, "; ".join(details))


# --------------------------------------------------------------------------
# density


def density_check(f: FilmComplex, radii: Sequence[float] | None = None, n_samples: int = 100, seed: int = 0,
                  points=None) -> float:
    """Smallest ``length(K ∩ B_r(x)) / r`` over admissible sample balls.

    Balls must avoid the wire frame and every anchor. Without ``radii`` each
    sample draws ``r`` uniformly up to 90% of its admissible radius. ``K`` is
    measured as a set, so collapsed edges count once.
    """
    rng = np.random.default_rng(seed)
    if points is None:
        lengths = np.array([e.length for e in f.edges])
        if lengths.sum() <= 0.0:
            raise ValueError("film has no length to sample")
        which = rng.choice(len(f.edges), size=n_samples, p=lengths / lengths.sum())
        pts = []
        for k in which:
            p = f.edges[k].points
            cum = np.concatenate([[0.0], np.cumsum(np.linalg.norm(np.diff(p, axis=0), axis=1))])
            s = rng.uniform(0.0, cum[-1])
            pts.append([np.interp(s, cum, p[:, 0]), np.interp(s, cum, p[:, 1])])
        pts = np.array(pts)
    else:
        pts = np.asarray(points, dtype=float).reshape(-1, 2)
    anchors = f.anchor_points()
    room = np.full(len(pts), np.inf)
    if len(f.wireframe):
        room = np.minimum(room, f.wireframe.distance(pts))
    if len(anchors):
        room = np.minimum(room, np.min(np.linalg.norm(pts[:, None, :] - anchors[None], axis=2), axis=1))
    best = np.inf
    for x, cap in zip(pts, room):
        if radii is None:
            if not np.isfinite(cap):
                raise ValueError("give radii for films without a wire frame")
            rs = [rng.uniform(0.05, 0.9) * cap]
        else:
            rs = [r for r in radii if 0.0 < r < cap]
        for r in rs:
            total = sum(length_inside_ball(e.points, x, r) for e in f.edges)
            best = min(best, total / r)
    if not np.isfinite(best):
        raise ValueError("no admissible sample ball")
    return float(best)


# --------------------------------------------------------------------------
# junctions


def junction_check(f: FilmComplex, tol: float = 1e-2) -> VerificationReport:
    from .solver import junction_residual

    res = junction_residual(f)
    return VerificationReport("junction_balance", res < tol, res, f"max weighted tangent sum {res:.3e}")


def steiner_angle_deviation(f: FilmComplex) -> float:
    """Largest deviation in degrees from 120° between edges at a junction of degree 3."""
    ends: dict[int, list[np.ndarray]] = {}
    for e in f.edges:
        for v, p0, p1 in ((e.start, e.points[0], e.points[1]), (e.end, e.points[-1], e.points[-2])):
            ends.setdefault(v, []).append((p1 - p0) / np.linalg.norm(p1 - p0))
    worst = 0.0
    for v in f.junctions():
        t = ends.get(v, [])
        if len(t) != 3:
            continue
        for i in range(3):
            for j in range(i + 1, 3):
                c = np.clip(float(np.dot(t[i], t[j])), -1.0, 1.0)
                worst = max(worst, abs(np.degrees(np.arccos(c)) - 120.0))
    return worst
