"""Spanning classes as winding vectors, the spanning decision, and the Plateau baseline.

The decision procedure works on a grid of the accessible region with the
network inflated by half a grid step. Every disk gets a vertical branch cut;
grid edges crossing a cut carry a unit winding label. Connected pieces of the
cut grid are glued along labelled edges, and the winding vectors of closed
walks in each grid component form an integer lattice. A class is realizable
by a loop avoiding the network iff it lies in one of these lattices.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy import optimize
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import breadth_first_order, connected_components

from .film import Disk, FilmComplex, FilmEdge, Vertex, WireFrame
from .geometry import Polyline, as_points, cross2, point_segment_distance


@dataclass(frozen=True)
class SpanningSpec:
    """Nonempty set of winding vectors, one integer per disk."""

    classes: tuple[tuple[int, ...], ...]

    def __post_init__(self):
        classes = tuple(tuple(int(x) for x in c) for c in self.classes)
        object.__setattr__(self, "classes", classes)
        if not classes:
            raise ValueError("a spanning class needs at least one winding vector")
        if len(set(classes)) != len(classes):
            raise ValueError("winding vectors must be distinct")
        if len({len(c) for c in classes}) != 1:
            raise ValueError("winding vectors must all have the same length")
        if any(not any(c) for c in classes):
            raise ValueError("the zero winding vector is not a spanning class")

    @property
    def n_disks(self) -> int:
        return len(self.classes[0])

    @classmethod
    def single_disks(cls, n: int) -> "SpanningSpec":
        return cls(tuple(tuple(int(i == k) for i in range(n)) for k in range(n)))


@dataclass(frozen=True, eq=False)
class SpanningCertificate:
    spanning: bool
    witness: Polyline | None = None
    winding: tuple[int, ...] | None = None
    resolution: float = float("nan")


# --------------------------------------------------------------------------
# winding numbers


def winding_vector(loop, w: WireFrame, tol: float = 1e-12) -> tuple[int, ...]:
    """Winding number of a closed loop around every disk centre."""
    pts = loop.vertices if isinstance(loop, Polyline) else as_points(loop)
    if isinstance(loop, Polyline) and not loop.closed:
        raise ValueError("winding vectors need a closed loop")
    a, b = pts, np.roll(pts, -1, axis=0)
    dist = point_segment_distance(w.centers, a, b).min(axis=1)
    if np.any(dist <= w.radii * (1.0 + tol)):
        raise ValueError("loop touches a disk")
    out = []
    for c in w.centers:
        va = a - c
        vb = b - c
        ang = np.arctan2(cross2(va, vb), np.einsum("ij,ij->i", va, vb))
        turns = ang.sum() / (2.0 * np.pi)
        out.append(int(round(turns)))
    return tuple(out)


# --------------------------------------------------------------------------
# grid machinery


def default_resolution(w: WireFrame) -> float:
    gap = w.min_gap() if len(w) > 1 else np.inf
    return float(min(gap, w.radii.min()) / 20.0)


def _segments_of(K) -> tuple[np.ndarray, np.ndarray]:
    if isinstance(K, FilmComplex):
        items = [e.points for e in K.edges]
    else:
        items = [k.vertices if isinstance(k, Polyline) else as_points(k) for k in K]
    a_list, b_list = [], []
    for pts in items:
        if len(pts) == 1:
            a_list.append(pts)
            b_list.append(pts)
        else:
            a_list.append(pts[:-1])
            b_list.append(pts[1:])
    if not a_list:
        return np.zeros((0, 2)), np.zeros((0, 2))
    return np.vstack(a_list), np.vstack(b_list)


class _Grid:
    """Free grid nodes of Omega minus the inflated network, with cut labels."""

    def __init__(self, a: np.ndarray, b: np.ndarray, w: WireFrame, h: float):
        self.h = h
        self.w = w
        lo, hi = w.bbox()
        if len(a):
            lo = np.minimum(lo, np.minimum(a.min(axis=0), b.min(axis=0)))
            hi = np.maximum(hi, np.maximum(a.max(axis=0), b.max(axis=0)))
        margin = max(4.0 * h, 0.1 * float(np.hypot(*(hi - lo))))
        lo = lo - margin
        hi = hi + margin
        nx = int(math.ceil((hi[0] - lo[0]) / h)) + 1
        ny = int(math.ceil((hi[1] - lo[1]) / h)) + 1
        self.nx, self.ny = nx, ny
        self.origin = lo
        self.xs = lo[0] + h * np.arange(nx)
        self.ys = lo[1] + h * np.arange(ny)
        gx, gy = np.meshgrid(self.xs, self.ys)
        free = np.ones((ny, nx), dtype=bool)
        for c, r in zip(w.centers, w.radii):
            free &= np.hypot(gx - c[0], gy - c[1]) > r + 0.5 * h
        if len(a):
            free &= ~self._blocked(a, b)
        self.free = free.ravel()
        self._build_edges()

    def _blocked(self, a, b) -> np.ndarray:
        h = self.h
        step = 0.25 * h
        reach = 0.5 * h + 0.5 * step
        seg = b - a
        counts = np.maximum(1, np.ceil(np.linalg.norm(seg, axis=1) / step).astype(int))
        idx = np.repeat(np.arange(len(a)), counts + 1)
        offs = np.concatenate([np.arange(c + 1) / c for c in counts])
        samples = a[idx] + offs[:, None] * seg[idx]
        col0 = np.floor((samples[:, 0] - self.origin[0]) / h).astype(int)
        row0 = np.floor((samples[:, 1] - self.origin[1]) / h).astype(int)
        blocked = np.zeros((self.ny, self.nx), dtype=bool)
        for dr in range(-1, 3):
            for dc in range(-1, 3):
                r = row0 + dr
                c = col0 + dc
                ok = (r >= 0) & (r < self.ny) & (c >= 0) & (c < self.nx)
                r, c, s = r[ok], c[ok], samples[ok]
                near = np.hypot(self.xs[c] - s[:, 0], self.ys[r] - s[:, 1]) <= reach
                blocked[r[near], c[near]] = True
        return blocked

    def _build_edges(self):
        nx, ny = self.nx, self.ny
        node = np.arange(nx * ny).reshape(ny, nx)
        free = self.free.reshape(ny, nx)
        hu = node[:, :-1][free[:, :-1] & free[:, 1:]]
        vu = node[:-1, :][free[:-1, :] & free[1:, :]]
        self.u = np.concatenate([hu, vu])
        self.v = np.concatenate([hu + 1, vu + nx])
        labels = np.zeros((len(self.u), len(self.w)), dtype=np.int64)
        n_h = len(hu)
        hx0 = self.xs[hu % nx]
        hx1 = self.xs[hu % nx + 1]
        hy = self.ys[hu // nx]
        for k, c in enumerate(self.w.centers):
            cross = (hx0 < c[0]) & (c[0] <= hx1) & (hy > c[1])
            labels[:n_h][cross, k] = -1
        self.labels = labels
        n = nx * ny
        zero = ~np.any(labels != 0, axis=1)
        cut = coo_matrix((np.ones(int(zero.sum())), (self.u[zero], self.v[zero])), shape=(n, n)).tocsr()
        self.cut_graph = cut
        self.n_comp, self.comp = connected_components(cut, directed=False)
        self.cross_idx = np.flatnonzero(~zero)

    def coords(self, nodes) -> np.ndarray:
        nodes = np.asarray(nodes)
        return np.column_stack([self.xs[nodes % self.nx], self.ys[nodes // self.nx]])


def _reduce_lattice(gens: list[tuple[int, ...]], n: int):
    """Row-echelon basis of the integer lattice spanned by ``gens``.

    Returns pivot rows and, for each, its coefficients over the generators.
    """
    rows = [list(g) for g in gens]
    coef = [[int(i == j) for j in range(len(gens))] for i in range(len(gens))]
    pivots = []
    active = list(range(len(rows)))
    for col in range(n):
        live = [i for i in active if rows[i][col] != 0]
        while len(live) > 1:
            live.sort(key=lambda i: abs(rows[i][col]))
            p = live[0]
            for i in live[1:]:
                q = rows[i][col] // rows[p][col]
                rows[i] = [x - q * y for x, y in zip(rows[i], rows[p])]
                coef[i] = [x - q * y for x, y in zip(coef[i], coef[p])]
            live = [i for i in live if rows[i][col] != 0]
        if live:
            p = live[0]
            pivots.append((col, rows[p], coef[p]))
            active.remove(p)
    return pivots


def _lattice_solve(pivots, n_gens: int, target: Sequence[int]):
    """Integer coefficients expressing ``target`` over the generators, or None."""
    res = list(target)
    out = [0] * n_gens
    for col, row, coef in pivots:
        if res[col] % row[col] != 0:
            return None
        q = res[col] // row[col]
        if q:
            res = [x - q * y for x, y in zip(res, row)]
            out = [x + q * y for x, y in zip(out, coef)]
    if any(res):
        return None
    return out


class _Cover:
    """Quotient of the cut grid: pieces glued along labelled cut crossings."""

    def __init__(self, grid: _Grid):
        self.grid = grid
        g = grid
        nw = len(g.w)
        comp = g.comp
        seen = {}
        for k in g.cross_idx:
            a, b = int(comp[g.u[k]]), int(comp[g.v[k]])
            key = (a, b, tuple(int(x) for x in g.labels[k]))
            if key not in seen:
                seen[key] = int(k)
        self.qedges = [(a, b, np.array(lab, dtype=np.int64), k) for (a, b, lab), k in sorted(seen.items())]
        free_comps = sorted({int(c) for c in np.unique(comp[g.free])})
        adj: dict[int, list[int]] = {c: [] for c in free_comps}
        for i, (a, b, _, _) in enumerate(self.qedges):
            adj[a].append(i)
            adj[b].append(i)
        self.pot: dict[int, np.ndarray] = {}
        self.parent: dict[int, tuple[int, int, int]] = {}  # comp -> (qedge, from node, to node)
        self.root_of: dict[int, int] = {}
        self.groups: list[dict] = []
        for c0 in free_comps:
            if c0 in self.pot:
                continue
            self.pot[c0] = np.zeros(nw, dtype=np.int64)
            self.root_of[c0] = c0
            members = [c0]
            tree = set()
            queue = [c0]
            while queue:
                a = queue.pop(0)
                for i in adj[a]:
                    qa, qb, lab, k = self.qedges[i]
                    other, sign = (qb, 1) if qa == a else (qa, -1)
                    if other in self.pot:
                        continue
                    self.pot[other] = self.pot[a] + sign * lab
                    self.root_of[other] = c0
                    # oriented grid step from comp a into comp other
                    src, dst = (int(g.u[k]), int(g.v[k])) if sign == 1 else (int(g.v[k]), int(g.u[k]))
                    self.parent[other] = (i, src, dst)
                    tree.add(i)
                    members.append(other)
                    queue.append(other)
            member_set = set(members)
            gens = []
            refs = []
            for i, (qa, qb, lab, k) in enumerate(self.qedges):
                if qa in member_set and i not in tree:
                    gvec = self.pot[qa] + lab - self.pot[qb]
                    if np.any(gvec):
                        gens.append(tuple(int(x) for x in gvec))
                        refs.append(i)
            self.groups.append(
                {"root": c0, "members": members, "gens": gens, "refs": refs, "pivots": _reduce_lattice(gens, nw)}
            )
        self._bfs_cache: dict[int, tuple[int, np.ndarray]] = {}

    def find(self, target: Sequence[int]):
        for grp in self.groups:
            coeffs = _lattice_solve(grp["pivots"], len(grp["gens"]), target)
            if coeffs is not None:
                return grp, coeffs
        return None

    # -- witness construction ------------------------------------------------

    def _tree_in_comp(self, c: int):
        if c not in self._bfs_cache:
            g = self.grid
            nodes = np.flatnonzero((g.comp == c) & g.free)
            root = int(nodes[0])
            _, pred = breadth_first_order(g.cut_graph, root, directed=False, return_predecessors=True)
            self._bfs_cache[c] = (root, pred)
        return self._bfs_cache[c]

    def _to_root(self, node: int) -> list[int]:
        c = int(self.grid.comp[node])
        root, pred = self._tree_in_comp(c)
        path = [node]
        while path[-1] != root:
            path.append(int(pred[path[-1]]))
        return path

    def _path_in_comp(self, u: int, v: int) -> list[int]:
        pu = self._to_root(u)
        pv = self._to_root(v)
        while len(pu) > 1 and len(pv) > 1 and pu[-2] == pv[-2]:
            pu.pop()
            pv.pop()
        return pu + pv[::-1][1:]

    def _route_from_root(self, comp: int) -> list[tuple[int, int]]:
        """Oriented grid steps leading from the group root piece into ``comp``."""
        steps = []
        while comp in self.parent:
            _, src, dst = self.parent[comp]
            steps.append((src, dst))
            comp = int(self.grid.comp[src])
        return steps[::-1]

    def _walk(self, start: int, steps: list[tuple[int, int]], end: int) -> list[int]:
        walk = [start]
        for src, dst in steps:
            walk += self._path_in_comp(walk[-1], src)[1:]
            walk.append(dst)
        walk += self._path_in_comp(walk[-1], end)[1:]
        return walk

    def generator_walk(self, grp: dict, gi: int) -> list[int]:
        root_node, _ = self._tree_in_comp(grp["root"])
        qa, qb, lab, k = self.qedges[grp["refs"][gi]]
        g = self.grid
        src, dst = int(g.u[k]), int(g.v[k])
        into = self._route_from_root(qa)
        back = [(d, s) for s, d in self._route_from_root(qb)[::-1]]
        walk = self._walk(root_node, into, src)
        walk.append(dst)
        walk += self._walk(dst, back, root_node)[1:]
        return walk

    def witness(self, grp: dict, coeffs: list[int]) -> np.ndarray:
        walk: list[int] = []
        for gi, a in enumerate(coeffs):
            if a == 0:
                continue
            piece = self.generator_walk(grp, gi)
            if a < 0:
                piece = piece[::-1]
            for _ in range(abs(a)):
                walk = piece[:] if not walk else walk + piece[1:]
        return _reduce_walk(walk)


def _reduce_walk(walk: list[int]) -> list[int]:
    stack: list[int] = []
    for node in walk:
        if len(stack) >= 2 and stack[-2] == node:
            stack.pop()
        else:
            stack.append(node)
    # cyclic reduction of the closed walk
    while len(stack) >= 3 and stack[0] == stack[-1] and stack[1] == stack[-2]:
        stack = stack[1:-1]
    if stack and stack[0] == stack[-1]:
        stack = stack[:-1]
    return stack


def is_spanning(K, w: WireFrame, spec: SpanningSpec, resolution: float | None = None) -> SpanningCertificate:
    """Decide whether the network ``K`` meets every loop of the spanning class.

    ``K`` is a :class:`FilmComplex` or a sequence of polylines / point arrays.
    """
    if spec.n_disks != len(w):
        raise ValueError("winding vectors must have one entry per disk")
    h = default_resolution(w) if resolution is None else float(resolution)
    if not h > 0.0:
        raise ValueError("resolution must be positive")
    sep = min(w.min_gap() if len(w) > 1 else np.inf, float(w.radii.min()))
    if 2.0 * h >= sep:
        raise ValueError("resolution too coarse")
    a, b = _segments_of(K)
    grid = _Grid(a, b, w, h)
    cover = _Cover(grid)
    for target in spec.classes:
        found = cover.find(target)
        if found is None:
            continue
        grp, coeffs = found
        nodes = cover.witness(grp, coeffs)
        loop = Polyline(grid.coords(nodes), closed=True)
        return SpanningCertificate(False, loop, tuple(target), h)
    return SpanningCertificate(True, None, None, h)


# --------------------------------------------------------------------------
# Plateau baseline


def _weiszfeld(points: np.ndarray, iters: int = 20000, tol: float = 1e-15) -> np.ndarray:
    p = points.mean(axis=0)
    for _ in range(iters):
        d = np.linalg.norm(points - p, axis=1)
        if np.any(d < 1e-14):
            return p
        wts = 1.0 / d
        q = (points * wts[:, None]).sum(axis=0) / wts.sum()
        if np.linalg.norm(q - p) < tol:
            return q
        p = q
    return p


def _angles_at(p: np.ndarray, targets: np.ndarray) -> np.ndarray:
    ang = np.sort(np.arctan2(targets[:, 1] - p[1], targets[:, 0] - p[0]))
    gaps = np.diff(np.concatenate([ang, ang[:1] + 2 * np.pi]))
    return np.degrees(gaps)


@dataclass
class _Component:
    disks: tuple[int, ...]
    length: float
    steiner: list[np.ndarray]
    segments: list[tuple[object, object]]  # endpoints: ("disk", i) or ("steiner", j)


def _clear_of_disks(w: WireFrame, p: np.ndarray, q: np.ndarray, skip: set[int]) -> bool:
    d = point_segment_distance(w.centers, p[None, :], q[None, :])[:, 0]
    for k in range(len(w)):
        if k not in skip and d[k] <= w.radii[k]:
            return False
    return True


def _components(w: WireFrame) -> list[_Component]:
    c, r = w.centers, w.radii
    n = len(w)
    comps = []
    for i, j in itertools.combinations(range(n), 2):
        if _clear_of_disks(w, c[i], c[j], {i, j}):
            length = float(np.linalg.norm(c[i] - c[j]) - r[i] - r[j])
            comps.append(_Component((i, j), length, [], [(("disk", i), ("disk", j))]))
    for tri in itertools.combinations(range(n), 3):
        p = _weiszfeld(c[list(tri)])
        gaps = _angles_at(p, c[list(tri)])
        if np.any(np.abs(gaps - 120.0) > 0.5):
            continue
        if np.any(np.linalg.norm(c - p, axis=1) <= r):
            continue
        if not all(_clear_of_disks(w, p, c[k], {k}) for k in tri):
            continue
        length = float(sum(np.linalg.norm(c[k] - p) - r[k] for k in tri))
        comps.append(_Component(tri, length, [p], [(("steiner", 0), ("disk", k)) for k in tri]))
    for quad in itertools.combinations(range(n), 4):
        for (i, j), (k, l) in (((quad[0], quad[1]), (quad[2], quad[3])),
                               ((quad[0], quad[2]), (quad[1], quad[3])),
                               ((quad[0], quad[3]), (quad[1], quad[2]))):
            comp = _full_steiner4(w, (i, j), (k, l))
            if comp is not None:
                comps.append(comp)
    return comps


def _full_steiner4(w: WireFrame, left, right) -> _Component | None:
    c, r = w.centers, w.radii
    ci, cj = c[list(left)]
    ck, cl = c[list(right)]

    def total(z):
        s1, s2 = z[:2], z[2:]
        return (
            np.linalg.norm(s1 - ci) + np.linalg.norm(s1 - cj) + np.linalg.norm(s1 - s2)
            + np.linalg.norm(s2 - ck) + np.linalg.norm(s2 - cl)
        )

    z0 = np.concatenate([(ci + cj) / 2 * 0.7 + (ck + cl) / 2 * 0.3, (ck + cl) / 2 * 0.7 + (ci + cj) / 2 * 0.3])
    res = optimize.minimize(total, z0, method="Nelder-Mead", options={"xatol": 1e-13, "fatol": 1e-15, "maxiter": 40000})
    s1, s2 = res.x[:2], res.x[2:]
    if np.linalg.norm(s1 - s2) < 1e-6:
        return None
    for p, nbrs in ((s1, np.array([ci, cj, s2])), (s2, np.array([ck, cl, s1]))):
        if np.any(np.abs(_angles_at(p, nbrs) - 120.0) > 0.5):
            return None
        if np.any(np.linalg.norm(c - p, axis=1) <= r):
            return None
    for p, k in ((s1, left[0]), (s1, left[1]), (s2, right[0]), (s2, right[1])):
        if not _clear_of_disks(w, p, c[k], {k}):
            return None
    length = float(res.fun - sum(r[list(left)]) - sum(r[list(right)]))
    segs = [(("steiner", 0), ("disk", left[0])), (("steiner", 0), ("disk", left[1])),
            (("steiner", 0), ("steiner", 1)),
            (("steiner", 1), ("disk", right[0])), (("steiner", 1), ("disk", right[1]))]
    return _Component(tuple(left) + tuple(right), length, [s1, s2], segs)


def _forests(comps: list[_Component], n: int):
    """Every subset of components whose disk hypergraph is acyclic."""
    out = []

    def rec(start, chosen, parent):
        out.append(list(chosen))
        for k in range(start, len(comps)):
            par = list(parent)

            def find(x):
                while par[x] != x:
                    par[x] = par[par[x]]
                    x = par[x]
                return x

            roots = [find(d) for d in comps[k].disks]
            if len(set(roots)) < len(roots):
                continue
            for rt in roots[1:]:
                par[find(rt)] = find(roots[0])
            rec(k + 1, chosen + [k], par)

    rec(0, [], list(range(n)))
    return out


def _realize(w: WireFrame, comps: list[_Component], chosen: list[int]):
    c, r = w.centers, w.radii
    segments = []
    for k in chosen:
        comp = comps[k]

        def point(ref, comp=comp, other=None):
            kind, idx = ref
            if kind == "steiner":
                return comp.steiner[idx]
            return None

        for a, b in comp.segments:
            pa = comp.steiner[a[1]] if a[0] == "steiner" else None
            pb = comp.steiner[b[1]] if b[0] == "steiner" else None
            # anchors sit where the segment leaves the disk
            if pa is None and pb is None:
                u = (c[b[1]] - c[a[1]]) / np.linalg.norm(c[b[1]] - c[a[1]])
                pa = c[a[1]] + r[a[1]] * u
                pb = c[b[1]] - r[b[1]] * u
            elif pb is None:
                u = (c[b[1]] - pa) / np.linalg.norm(c[b[1]] - pa)
                pb = c[b[1]] - r[b[1]] * u
            segments.append((a, b, np.array(pa, dtype=float), np.array(pb, dtype=float), k))
    return segments


def steiner_baseline(
    w: WireFrame, spec: SpanningSpec, resolution: float | None = None
) -> tuple[float, FilmComplex]:
    """Shortest spanning network over pairings, Steiner stars and full 4-terminal trees.

    The returned film carries the network with multiplicity 2 and no liquid, so
    its relaxed energy is twice the returned length.
    """
    if len(w) > 5:
        raise ValueError("the Plateau baseline is limited to at most 5 disks")
    comps = _components(w)
    forests = _forests(comps, len(w))
    forests.sort(key=lambda ch: (round(sum(comps[k].length for k in ch), 12), len(ch), ch))
    for chosen in forests:
        segs = _realize(w, comps, chosen)
        polys = [np.array([pa, pb]) for _, _, pa, pb, _ in segs]
        if not is_spanning(polys, w, spec, resolution).spanning:
            continue
        length = float(sum(np.linalg.norm(pb - pa) for _, _, pa, pb, _ in segs))
        return length, _baseline_film(w, segs)
    raise ValueError("no spanning topology found")


def _baseline_film(w: WireFrame, segs) -> FilmComplex:
    verts: list[Vertex] = []
    index: dict = {}

    def vid(ref, comp_k, pos):
        key = ("disk", ref[1], tuple(np.round(pos, 12))) if ref[0] == "disk" else ("steiner", comp_k, ref[1])
        if key not in index:
            index[key] = len(verts)
            verts.append(Vertex(tuple(pos), ref[1] if ref[0] == "disk" else None))
        return index[key]

    edges = []
    for a, b, pa, pb, k in segs:
        ia = vid(a, k, pa)
        ib = vid(b, k, pb)
        edges.append(FilmEdge(ia, ib, np.array([verts[ia].position, verts[ib].position]), 2))
    return FilmComplex(w, tuple(verts), tuple(edges), ())
