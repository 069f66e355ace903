"""Area-constrained minimization of the relaxed energy at fixed film topology.

The flow is a projected, Sobolev-preconditioned gradient descent on vertex
positions. Each step solves with the multiplicity-weighted graph Laplacian of
the network, removes the area-gradient component with a scalar multiplier, and
then restores the liquid area by a uniform shift of region boundary vertices
along their normals.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu
from scipy.spatial import cKDTree

from .film import (
    ANCHOR_TOL,
    Classification,
    FilmComplex,
    FilmEdge,
    LiquidRegion,
    SolveReport,
    Vertex,
    WireFrame,
    classify,
    relaxed_energy,
    validate,
)
from .geometry import circumcircle_curvature, cross2, crossing_pairs, resample_polyline
from .spanning import SpanningSpec, is_spanning


class SolverError(RuntimeError):
    """The flow broke down numerically (as opposed to bad input)."""


@dataclass(frozen=True)
class SolveConfig:
    step: float = 1.0
    max_iterations: int = 4000
    gradient_tolerance: float = 1e-8
    volume_tolerance: float = 1e-12
    collapse_merge_distance: float = 0.0
    resample_target_edge_length: float = 0.01
    max_halvings: int = 40
    min_edge_segments: int = 16
    tangential_share: float = 0.01
    spanning_resolution: float | None = None

    def __post_init__(self):
        if not self.step > 0.0:
            raise ValueError("step must be positive")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be at least 1")
        if not (self.gradient_tolerance > 0.0 and self.volume_tolerance > 0.0):
            raise ValueError("tolerances must be positive")
        if self.collapse_merge_distance < 0.0:
            raise ValueError("collapse_merge_distance must be non-negative")
        if not self.resample_target_edge_length > 0.0:
            raise ValueError("resample_target_edge_length must be positive")


@dataclass(frozen=True)
class Scenario:
    wireframe: WireFrame
    spec: SpanningSpec
    epsilon: float
    initial: FilmComplex
    config: SolveConfig = field(default_factory=SolveConfig)

    def __post_init__(self):
        if not self.epsilon > 0.0:
            raise ValueError("epsilon must be positive")
        if self.initial.wireframe != self.wireframe:
            raise ValueError("initial film lives on a different wire frame")
        if len(self.wireframe) and self.spec.n_disks != len(self.wireframe):
            raise ValueError("winding vectors must have one entry per disk")

    def check(self) -> None:
        problems = validate(self.initial)
        if problems:
            raise ValueError("initial film is invalid: " + "; ".join(problems))
        if not self.initial.regions:
            raise ValueError("initial film has no liquid region to hold area epsilon")
        if len(self.wireframe):
            cert = is_spanning(self.initial, self.wireframe, self.spec, self.config.spanning_resolution)
            if not cert.spanning:
                raise ValueError("initial film is not spanning")


# --------------------------------------------------------------------------
# diagnostics


def lambda_estimate(f: FilmComplex, collar: int = 2) -> tuple[float, float]:
    """Mean signed curvature of the liquid boundary and its maximum deviation."""
    if not f.regions:
        raise ValueError("λ undefined without ∂*E")
    values = []
    for region in f.regions:
        for e, fwd in region.loop:
            edge = f.edges[e]
            if edge.multiplicity != 1:
                continue
            pts = edge.oriented(fwd)
            n = len(pts)
            lo, hi = 1 + collar, n - 1 - collar
            if hi <= lo:
                continue
            idx = np.arange(lo, hi)
            values.append(circumcircle_curvature(pts[idx - 1], pts[idx], pts[idx + 1]))
    if not values:
        raise ValueError("boundary edges are too coarse for a curvature estimate")
    k = np.concatenate(values)
    lam = float(k.mean())
    return lam, float(np.max(np.abs(k - lam)))


def junction_residual(f: FilmComplex) -> float:
    """Largest unbalanced multiplicity-weighted tangent sum at a junction."""
    junctions = set(f.junctions())
    if not junctions:
        return 0.0
    force = {j: np.zeros(2) for j in junctions}
    for e in f.edges:
        for v, p0, p1 in ((e.start, e.points[0], e.points[1]), (e.end, e.points[-1], e.points[-2])):
            if v in force:
                t = p1 - p0
                force[v] += e.multiplicity * t / np.linalg.norm(t)
    return float(max(np.linalg.norm(v) for v in force.values()))


def straightness(f: FilmComplex) -> float:
    """Largest chord deviation of a multiplicity-2 edge, relative to its length."""
    worst = 0.0
    for e in f.edges:
        if e.multiplicity != 2 or len(e.points) < 3:
            continue
        a, b = e.points[0], e.points[-1]
        chord = b - a
        c = np.linalg.norm(chord)
        dev = np.abs(cross2(chord, e.points - a)) / c
        worst = max(worst, float(dev.max() / e.length))
    return worst


# --------------------------------------------------------------------------
# collapse merge


def _arclength(pts: np.ndarray) -> np.ndarray:
    return np.concatenate([[0.0], np.cumsum(np.linalg.norm(np.diff(pts, axis=0), axis=1))])


def _at(pts: np.ndarray, s: np.ndarray, cum: np.ndarray) -> np.ndarray:
    return np.column_stack([np.interp(s, cum, pts[:, 0]), np.interp(s, cum, pts[:, 1])])


def _zip_length(P: np.ndarray, Q: np.ndarray, d: float, min_length: float = 0.0) -> float | None:
    """Arc length over which the chains ``P`` and ``Q`` (both leaving the same
    vertex) bound a sliver of width at most ``d`` lying inside the region."""
    sp_, sq = _arclength(P), _arclength(Q)
    total = min(sp_[-1], sq[-1])
    s = np.unique(np.concatenate([sp_, sq]))
    s = s[(s > 0.0) & (s <= total)]
    if len(s) == 0:
        return None
    p = _at(P, s, sp_)
    q = _at(Q, s, sq)
    eps = 1e-9 * total
    tp = _at(P, np.minimum(s + eps, sp_[-1]), sp_) - _at(P, np.maximum(s - eps, 0.0), sp_)
    tq = _at(Q, np.minimum(s + eps, sq[-1]), sq) - _at(Q, np.maximum(s - eps, 0.0), sq)
    tp /= np.linalg.norm(tp, axis=1)[:, None]
    tq /= np.linalg.norm(tq, axis=1)[:, None]
    gap = q - p
    ok = (
        (np.linalg.norm(gap, axis=1) <= d)
        & (np.einsum("ij,ij->i", tp, tq) > 0.5)
        & (tp[:, 0] * gap[:, 1] - tp[:, 1] * gap[:, 0] <= 0.0)
    )
    if not ok[0]:
        return None

    def run_length(mask):
        bad = np.flatnonzero(~mask)
        return float(s[len(s) - 1 if len(bad) == 0 else bad[0] - 1]) if mask[0] else 0.0

    s_cut = run_length(ok)
    first = max(sp_[1], sq[1])
    if s_cut >= max(first, min_length):
        return s_cut
    # sides already pressed together: zip even a short run
    closed = ok & (np.linalg.norm(gap, axis=1) <= 1e-3 * d)
    if run_length(closed) >= first:
        return s_cut
    return None


def _drop_vertex(vertices: list, edges: list, v: int):
    remap = lambda i: i - (i > v)  # noqa: E731
    vertices = vertices[:v] + vertices[v + 1 :]
    edges = [FilmEdge(remap(e.start), remap(e.end), e.points, e.multiplicity) for e in edges]
    return vertices, edges


def _merge_at(f: FilmComplex, ri: int, k: int, s_cut: float) -> FilmComplex:
    loop = f.regions[ri].loop
    (e_in, fin), (e_out, fout) = loop[k - 1], loop[k]
    P = f.edges[e_in].oriented(fin)[::-1]
    Q = f.edges[e_out].oriented(fout)
    v = f.edges[e_out].start if fout else f.edges[e_out].end
    sp_, sq = _arclength(P), _arclength(Q)
    if s_cut >= min(sp_[-1], sq[-1]) - min(sp_[-1] - sp_[-2], sq[-1] - sq[-2]):
        raise ValueError("merge would disconnect a region into invalid topology")
    p_cut = _at(P, np.array([s_cut]), sp_)[0]
    q_cut = _at(Q, np.array([s_cut]), sq)[0]
    J = 0.5 * (p_cut + q_cut)
    h_min = float(np.diff(sp_).min())
    s_mid = np.concatenate([sp_[sp_ < s_cut - 0.25 * h_min], [s_cut]])
    mid = 0.5 * (_at(P, s_mid, sp_) + _at(Q, s_mid, sq))
    mid[0] = P[0]
    mid[-1] = J

    def rest(chain, cum):
        h = np.diff(cum).min()
        keep = chain[cum > s_cut + 0.25 * h]
        return np.vstack([J, keep])

    P_rest, Q_rest = rest(P, sp_), rest(Q, sq)
    if len(P_rest) < 2 or len(Q_rest) < 2:
        raise ValueError("merge would disconnect a region into invalid topology")

    vertices = list(f.vertices)
    jid = len(vertices)
    vertices.append(Vertex(tuple(J)))
    edges = list(f.edges)
    old_in, old_out = edges[e_in], edges[e_out]
    if fin:
        edges[e_in] = FilmEdge(old_in.start, jid, P_rest[::-1], 1)
    else:
        edges[e_in] = FilmEdge(jid, old_in.end, P_rest, 1)
    if fout:
        edges[e_out] = FilmEdge(jid, old_out.end, Q_rest, 1)
    else:
        edges[e_out] = FilmEdge(old_out.start, jid, Q_rest[::-1], 1)

    others = [i for i, e in enumerate(edges) if i not in (e_in, e_out) and v in (e.start, e.end)]
    if f.vertices[v].anchor is None and len(others) == 1 and edges[others[0]].multiplicity == 2:
        m = edges[others[0]]
        head = m.points if m.end == v else m.points[::-1]
        src = m.start if m.end == v else m.end
        edges[others[0]] = FilmEdge(src, jid, np.vstack([head, mid[1:]]), 2)
        vertices, edges = _drop_vertex(vertices, edges, v)
    else:
        edges.append(FilmEdge(v, jid, mid, 2))
    out = replace(f, vertices=tuple(vertices), edges=tuple(edges))
    if validate(out):
        raise ValueError("merge would disconnect a region into invalid topology")
    return out


def collapse_merge(f: FilmComplex, d: float, strict: bool = True, min_length: float = 0.0) -> FilmComplex:
    """Zip thin slivers of liquid into multiplicity-2 edges along their midcurve.

    Slivers are grown from a boundary vertex where two consecutive boundary
    edges run side by side within distance ``d`` for at least ``min_length``.
    With ``strict`` an invalid merge raises; otherwise that candidate is skipped.
    """
    if d < 0.0:
        raise ValueError("merge distance must be non-negative")
    if d == 0.0:
        return f
    skipped: set = set()
    changed = True
    while changed:
        changed = False
        for ri, region in enumerate(f.regions):
            loop = region.loop
            if len(loop) < 2:
                continue
            for k in range(len(loop)):
                e_in, fin = loop[k - 1]
                e_out, fout = loop[k]
                if e_in == e_out:
                    continue
                P = f.edges[e_in].oriented(fin)[::-1]
                Q = f.edges[e_out].oriented(fout)
                s_cut = _zip_length(P, Q, d, min_length)
                if s_cut is None:
                    continue
                key = (P[0].tobytes(), P[1].tobytes(), Q[1].tobytes())
                if key in skipped:
                    continue
                try:
                    f = _merge_at(f, ri, k, s_cut)
                except ValueError:
                    if strict:
                        raise
                    skipped.add(key)
                    continue
                changed = True
                break
            if changed:
                break
    return f


# --------------------------------------------------------------------------
# flow


class _Mesh:
    """Flat node array view of a film for vectorized energy and area work."""

    def __init__(self, f: FilmComplex):
        self.film = f
        self.w = f.wireframe
        nv = len(f.vertices)
        chunks = [np.array([v.position for v in f.vertices], dtype=float).reshape(-1, 2)]
        self.edge_nodes = []
        count = nv
        for e in f.edges:
            inner = np.asarray(e.points[1:-1], dtype=float)
            chunks.append(inner)
            self.edge_nodes.append(np.concatenate([[e.start], np.arange(count, count + len(inner)), [e.end]]))
            count += len(inner)
        self.X = np.vstack(chunks)
        self.N = count
        self.mult = np.array([e.multiplicity for e in f.edges], dtype=float)
        si, sj, sm = [], [], []
        for nodes, m in zip(self.edge_nodes, self.mult):
            si.append(nodes[:-1])
            sj.append(nodes[1:])
            sm.append(np.full(len(nodes) - 1, m))
        self.si = np.concatenate(si) if si else np.zeros(0, int)
        self.sj = np.concatenate(sj) if sj else np.zeros(0, int)
        self.sm = np.concatenate(sm) if sm else np.zeros(0)
        self.ids = np.stack([self.si, self.sj], axis=1)
        self.loops = []
        push = []
        for region in f.regions:
            seq = []
            for e, fwd in region.loop:
                nodes = self.edge_nodes[e] if fwd else self.edge_nodes[e][::-1]
                seq.append(nodes[:-1])
                push.append(self.edge_nodes[e][1:-1])
            self.loops.append(np.concatenate(seq))
        self.push = np.concatenate(push) if push else np.zeros(0, int)
        self.anchor = np.full(self.N, -1)
        for i, v in enumerate(f.vertices):
            if v.anchor is not None:
                self.anchor[i] = v.anchor
        self.inner_turns = [nodes for nodes in self.edge_nodes if len(nodes) >= 3]
        mids = [(n[1:-1], n[:-2], n[2:]) for n in self.edge_nodes if len(n) >= 3]
        self.mid = np.concatenate([x[0] for x in mids]) if mids else np.zeros(0, int)
        self.mid_prev = np.concatenate([x[1] for x in mids]) if mids else np.zeros(0, int)
        self.mid_next = np.concatenate([x[2] for x in mids]) if mids else np.zeros(0, int)
        self._basis_dofs()

    def _basis_dofs(self):
        rows, cols, ndof = [], [], 0
        self.free_nodes = np.flatnonzero(self.anchor < 0)
        self.anchor_nodes = np.flatnonzero(self.anchor >= 0)
        for i in self.free_nodes:
            rows += [2 * i, 2 * i + 1]
            cols += [ndof, ndof + 1]
            ndof += 2
        self.anchor_cols = np.arange(ndof, ndof + len(self.anchor_nodes))
        self.ndof = ndof + len(self.anchor_nodes)
        self._free_rows = np.array(rows, dtype=int)
        self._free_cols = np.array(cols, dtype=int)

    def basis(self, X: np.ndarray) -> sp.csr_matrix:
        rows = list(self._free_rows)
        cols = list(self._free_cols)
        vals = [1.0] * len(rows)
        for col, i in zip(self.anchor_cols, self.anchor_nodes):
            d = self.w.disks[self.anchor[i]]
            t = np.array([-(X[i, 1] - d.center[1]), X[i, 0] - d.center[0]]) / d.radius
            rows += [2 * i, 2 * i + 1]
            cols += [col, col]
            vals += [t[0], t[1]]
        return sp.csr_matrix((vals, (rows, cols)), shape=(2 * self.N, self.ndof))

    # -- energy and area -------------------------------------------------

    def energy(self, X):
        d = X[self.sj] - X[self.si]
        return float(np.sum(self.sm * np.linalg.norm(d, axis=1)))

    def energy_grad(self, X):
        d = X[self.sj] - X[self.si]
        ln = np.linalg.norm(d, axis=1)
        u = (self.sm / ln)[:, None] * d
        g = np.zeros_like(X)
        np.add.at(g, self.si, -u)
        np.add.at(g, self.sj, u)
        return g, ln

    def area(self, X):
        total = 0.0
        for loop in self.loops:
            p = X[loop]
            q = np.roll(p, -1, axis=0)
            total += 0.5 * float(np.sum(p[:, 0] * q[:, 1] - p[:, 1] * q[:, 0]))
        return total

    def region_areas(self, X):
        out = []
        for loop in self.loops:
            p = X[loop]
            q = np.roll(p, -1, axis=0)
            out.append(0.5 * float(np.sum(p[:, 0] * q[:, 1] - p[:, 1] * q[:, 0])))
        return out

    def area_grad(self, X):
        a = np.zeros_like(X)
        for loop in self.loops:
            nxt = X[np.roll(loop, -1)]
            prv = X[np.roll(loop, 1)]
            diff = nxt - prv
            np.add.at(a, loop, 0.5 * np.column_stack([diff[:, 1], -diff[:, 0]]))
        return a

    # -- admissibility ---------------------------------------------------

    def admissible(self, X) -> bool:
        if not np.all(np.isfinite(X)):
            return False
        free = self.anchor < 0
        if len(self.w) and np.any(self.w.distance(X[free]) <= 0.0):
            return False
        if any(a <= 0.0 for a in self.region_areas(X)):
            return False
        for nodes in self.inner_turns:
            d = np.diff(X[nodes], axis=0)
            ln = np.linalg.norm(d, axis=1)
            if np.any(ln == 0.0):
                return False
            cos = np.einsum("ij,ij->i", d[:-1], d[1:]) / (ln[:-1] * ln[1:])
            if np.any(cos < -0.9):
                return False
        if crossing_pairs(X[self.si], X[self.sj], self.ids, tol=ANCHOR_TOL):
            return False
        return True

    def project_anchors(self, X):
        for i in self.anchor_nodes:
            X[i] = self.w.project(self.anchor[i], X[i])
        return X

    def project_volume(self, X, eps, tol, iters: int = 12):
        """Uniform normal shift of region boundary vertices onto ``area = eps``."""
        if not len(self.push):
            return X, True
        X = X.copy()
        for _ in range(iters):
            A = self.area(X)
            if abs(A - eps) < 0.1 * tol:
                return X, True
            a = self.area_grad(X)[self.push]
            na = np.linalg.norm(a, axis=1)
            if np.any(na == 0.0):
                return X, False
            delta = (eps - A) / na.sum()
            X[self.push] += delta * a / na[:, None]
        return X, abs(self.area(X) - eps) < tol

    def residual(self, X, force: np.ndarray) -> float:
        """Max force norm: normal part at edge-interior nodes, the constrained
        tangential part at anchors, the full vector at junctions."""
        out = force.copy()
        if len(self.mid):
            t = X[self.mid_next] - X[self.mid_prev]
            n = np.column_stack([-t[:, 1], t[:, 0]]) / np.linalg.norm(t, axis=1)[:, None]
            out[self.mid] = np.einsum("ij,ij->i", force[self.mid], n)[:, None] * n
        for i in self.anchor_nodes:
            d = self.w.disks[self.anchor[i]]
            rad = (X[i] - np.asarray(d.center)) / d.radius
            out[i] = force[i] - np.dot(force[i], rad) * rad
        return float(np.max(np.linalg.norm(out, axis=1))) if len(out) else 0.0

    def to_film(self, X) -> FilmComplex:
        f = self.film
        verts = tuple(
            Vertex(tuple(X[i]), v.anchor) for i, v in enumerate(f.vertices)
        )
        edges = tuple(
            FilmEdge(e.start, e.end, X[nodes], e.multiplicity) for e, nodes in zip(f.edges, self.edge_nodes)
        )
        return replace(f, vertices=verts, edges=edges)


def _target_segments(length: float, cfg: SolveConfig) -> int:
    n = max(cfg.min_edge_segments, int(math.ceil(length / cfg.resample_target_edge_length)))
    return min(n, 4000)


def resample_film(f: FilmComplex, cfg: SolveConfig, only: set[int] | None = None) -> FilmComplex:
    edges = []
    for k, e in enumerate(f.edges):
        if only is not None and k not in only:
            edges.append(e)
            continue
        n = _target_segments(e.length, cfg)
        edges.append(FilmEdge(e.start, e.end, resample_polyline(e.points, n), e.multiplicity))
    return f.with_edges(edges)


def _needs_resample(f: FilmComplex, cfg: SolveConfig) -> set[int]:
    out = set()
    for k, e in enumerate(f.edges):
        ln = np.linalg.norm(np.diff(e.points, axis=0), axis=1)
        n = len(ln)
        target = _target_segments(float(ln.sum()), cfg)
        if ln.max() > 3.0 * ln.min() or n < 0.5 * target or n > 2 * target:
            out.add(k)
    return out


def _stiffness(m: "_Mesh", X, wgt, share: float) -> sp.csr_matrix:
    """Length Hessian per segment, ``wgt * (I - u u^T)``, plus ``share`` of the
    isotropic graph Laplacian so tangential motion stays damped."""
    d = X[m.sj] - X[m.si]
    u = d / np.linalg.norm(d, axis=1)[:, None]
    blocks = (1.0 - share) * (np.eye(2)[None, :, :] - u[:, :, None] * u[:, None, :]) + share * np.eye(2)[None, :, :]
    blocks *= wgt[:, None, None]
    rows, cols, vals = [], [], []
    for a in range(2):
        for b in range(2):
            v = blocks[:, a, b]
            for (p, q, sgn) in ((m.si, m.si, 1.0), (m.sj, m.sj, 1.0), (m.si, m.sj, -1.0), (m.sj, m.si, -1.0)):
                rows.append(2 * p + a)
                cols.append(2 * q + b)
                vals.append(sgn * v)
    n = 2 * m.N
    return sp.coo_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(n, n)).tocsr()


def _approach_ratio(m: "_Mesh", X, dX, k: int = 12) -> float:
    """Largest closing speed of a node toward a nearby non-incident segment,
    relative to their current gap."""
    ns = len(m.si)
    if ns < 3:
        return 0.0
    mid = 0.5 * (X[m.si] + X[m.sj])
    k = min(k, ns)
    _, cand = cKDTree(mid).query(X, k=k)
    cand = cand.reshape(m.N, k)
    node = np.arange(m.N)[:, None]
    incident = (m.si[cand] == node) | (m.sj[cand] == node)
    a, b = X[m.si[cand]], X[m.sj[cand]]
    ab = b - a
    t = np.clip(np.einsum("ijk,ijk->ij", X[:, None, :] - a, ab) / np.maximum(np.einsum("ijk,ijk->ij", ab, ab), 1e-300), 0.0, 1.0)
    foot = a + t[..., None] * ab
    gap = np.linalg.norm(X[:, None, :] - foot, axis=2)
    rel = dX[:, None, :] - ((1.0 - t)[..., None] * dX[m.si[cand]] + t[..., None] * dX[m.sj[cand]])
    # only the approaching part of the relative motion counts
    closing = -np.einsum("ijk,ijk->ij", rel, X[:, None, :] - foot) / np.maximum(gap, 1e-300)
    r = np.where(incident | (gap == 0.0), 0.0, np.maximum(closing, 0.0) / np.maximum(gap, 1e-300))
    return float(r.max())


def _area_hessian(m: "_Mesh") -> sp.csr_matrix:
    rows, cols, vals = [], [], []
    for loop in m.loops:
        nxt = np.roll(loop, -1)
        # d^2 A / dx_k dy_{k+1} = 1/2, d^2 A / dy_k dx_{k+1} = -1/2
        for p, q, v in ((2 * loop, 2 * nxt + 1, 0.5), (2 * loop + 1, 2 * nxt, -0.5)):
            rows += [p, q]
            cols += [q, p]
            vals += [np.full(len(loop), v)] * 2
    n = 2 * m.N
    if not rows:
        return sp.csr_matrix((n, n))
    return sp.coo_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(n, n)).tocsr()


class _Flow:
    def __init__(self, s: Scenario):
        self.s = s
        self.cfg = s.config
        self.eps = s.epsilon
        self.halvings = 0
        self.merges = 0
        self.notes: list[str] = []
        self._mu = None
        self.trace = None

    def mesh(self, f: FilmComplex, it: int):
        m = _Mesh(f)
        X, ok = m.project_volume(m.X, self.eps, self.cfg.volume_tolerance)
        if not ok or not m.admissible(X):
            raise SolverError(f"volume projection failed at iteration {it}: offset not embedded")
        return m, X

    def direction(self, m: _Mesh, X):
        g, ln = m.energy_grad(X)
        a = m.area_grad(X)
        B = m.basis(X)
        gr = B.T @ g.ravel()
        ar = B.T @ a.ravel()
        wgt = m.sm / ln
        K = _stiffness(m, X, wgt, self.cfg.tangential_share)
        tau = 1e-9 * float(wgt.max()) if len(wgt) else 1.0
        diag = np.full(m.ndof, tau)
        for col, i in zip(m.anchor_cols, m.anchor_nodes):
            # curvature of the constraint circle stiffens the sliding mode
            diag[col] += abs(float(np.linalg.norm(g[i]))) / m.w.disks[m.anchor[i]].radius
        D = sp.diags(diag)
        attempts = [K]
        if len(m.loops) and self._mu is not None:
            # Lagrangian Hessian first; it is dropped when it fails to give descent
            attempts.insert(0, K - self._mu * _area_hessian(m))
        for H in attempts:
            lu = splu((B.T @ H @ B + D).tocsc())
            yg = lu.solve(gr)
            if not len(m.loops):
                mu, dz = 0.0, -yg
                break
            ya = lu.solve(ar)
            den = float(ar @ ya)
            mu = float(ar @ yg) / den
            tangent = -(yg - mu * ya)
            if den > 0.0 and float((gr - mu * ar) @ tangent) < 0.0 or H is attempts[-1]:
                dz = tangent + (self.eps - m.area(X)) / den * ya
                break
        dX = (B @ dz).reshape(-1, 2)
        # trust region: no node travels more than half its shortest incident segment
        reach = np.full(m.N, np.inf)
        np.minimum.at(reach, m.si, ln)
        np.minimum.at(reach, m.sj, ln)
        ratio = float(np.max(np.linalg.norm(dX, axis=1) / reach)) if m.N else 0.0
        ratio = max(ratio, _approach_ratio(m, X, dX))
        if ratio > 0.5:
            dX *= 0.5 / ratio
        self._mu = mu
        return dX, mu, m.residual(X, g - mu * a)

    def run(self):
        cfg = self.cfg
        f = resample_film(self.s.initial, cfg)
        m, X = self.mesh(f, 0)
        E = m.energy(X)
        step = cfg.step
        streak = 0
        mu, fnorm = float("nan"), float("inf")
        converged = False
        it = 0
        for it in range(1, cfg.max_iterations + 1):
            dX, mu, fnorm = self.direction(m, X)
            vol_ok = abs(m.area(X) - self.eps) < cfg.volume_tolerance
            if fnorm < cfg.gradient_tolerance and vol_ok:
                converged = True
                break
            accepted = False
            while True:
                Y = m.project_anchors(X + step * dX)
                Y, ok = m.project_volume(Y, self.eps, cfg.volume_tolerance)
                if ok and m.admissible(Y):
                    E_new = m.energy(Y)
                    if E_new <= E + 1e-13 * max(E, 1.0):
                        accepted = True
                        break
                if self.trace is not None:
                    self.trace.append((it, step, E_new - E if ok and m.admissible(Y) else None))
                step *= 0.5
                self.halvings += 1
                streak = 0
                if self.halvings > cfg.max_halvings:
                    break
            if not accepted:
                self.notes.append(f"step halving cap reached at iteration {it}")
                break
            X, E = Y, E_new
            streak += 1
            if streak >= 4 and step < cfg.step:
                step = min(cfg.step, 2.0 * step)
                streak = 0
            f = m.to_film(X)
            changed = False
            if cfg.collapse_merge_distance > 0.0:
                # cusps are thin near their tip too; only zip slivers several edges long
                merged = collapse_merge(
                    f, cfg.collapse_merge_distance, strict=False, min_length=4.0 * cfg.resample_target_edge_length
                )
                if merged is not f:
                    n_before = sum(e.multiplicity == 2 for e in f.edges)
                    self.merges += 1
                    f = resample_film(merged, cfg)
                    changed = True
                    self.notes.append(
                        f"collapse merge at iteration {it} ({n_before} -> "
                        f"{sum(e.multiplicity == 2 for e in f.edges)} collapsed edges)"
                    )
            redo = _needs_resample(f, cfg)
            if redo:
                f = resample_film(f, cfg, redo)
                changed = True
            if changed:
                m, X = self.mesh(f, it)
                E = m.energy(X)
        return m.to_film(X), it, converged, mu, fnorm


def minimize(s: Scenario) -> tuple[FilmComplex, SolveReport]:
    """Minimize the relaxed energy at liquid area ``s.epsilon`` with fixed topology."""
    s.check()
    flow = _Flow(s)
    f, iterations, converged, mu, fnorm = flow.run()
    problems = validate(f)
    if problems:
        raise SolverError("flow produced an invalid film: " + "; ".join(problems))
    spanning_ok = True
    if len(s.wireframe):
        spanning_ok = is_spanning(f, s.wireframe, s.spec, s.config.spanning_resolution).spanning
        if not spanning_ok:
            raise SolverError("flow exited spanning class")
    lam, spread = lambda_estimate(f) if f.regions else (0.0, 0.0)
    report = SolveReport(
        energy=relaxed_energy(f),
        volume=sum(_Mesh(f).region_areas(_Mesh(f).X)) if f.regions else 0.0,
        lam=lam,
        classification=classify(f),
        junction_residual=junction_residual(f),
        spanning_ok=spanning_ok,
        iterations=iterations,
        converged=converged,
        lambda_spread=spread,
        multiplier=mu,
        gradient_norm=fnorm,
        halvings=flow.halvings,
        merges=flow.merges,
        notes=tuple(flow.notes),
    )
    return f, report
