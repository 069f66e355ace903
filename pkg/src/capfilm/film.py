"""The pair (K, E): a weighted curve network with liquid regions."""
from __future__ import annotations

import enum
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .geometry import (
    Polyline,
    as_points,
    crossing_pairs,
    point_segment_distance,
    points_in_polygon,
    polygon_area,
    polyline_length,
)

ANCHOR_TOL = 1e-9
CLASSIFY_TOL = 1e-9


class Classification(str, enum.Enum):
    NON_COLLAPSED = "non_collapsed"
    COLLAPSED = "collapsed"
    EXTERIORLY_COLLAPSED = "exteriorly_collapsed"


@dataclass(frozen=True)
class Disk:
    center: tuple[float, float]
    radius: float

    def __post_init__(self):
        object.__setattr__(self, "center", (float(self.center[0]), float(self.center[1])))
        object.__setattr__(self, "radius", float(self.radius))
        if not self.radius > 0.0:
            raise ValueError("disk radius must be positive")


@dataclass(frozen=True)
class WireFrame:
    """Finitely many closed disks; the film lives in their complement."""

    disks: tuple[Disk, ...]

    def __post_init__(self):
        disks = tuple(d if isinstance(d, Disk) else Disk(*d) for d in self.disks)
        object.__setattr__(self, "disks", disks)
        for i in range(len(disks)):
            for j in range(i + 1, len(disks)):
                gap = np.hypot(*np.subtract(disks[i].center, disks[j].center)) - disks[i].radius - disks[j].radius
                if gap <= 0.0:
                    raise ValueError(f"disks {i} and {j} overlap")

    @property
    def centers(self) -> np.ndarray:
        return np.array([d.center for d in self.disks]).reshape(-1, 2)

    @property
    def radii(self) -> np.ndarray:
        return np.array([d.radius for d in self.disks])

    def __len__(self) -> int:
        return len(self.disks)

    def distance(self, points) -> np.ndarray:
        """Signed distance to W (negative inside a disk)."""
        pts = as_points(points)
        if not self.disks:
            return np.full(len(pts), np.inf)
        d = np.linalg.norm(pts[:, None, :] - self.centers[None, :, :], axis=2) - self.radii[None, :]
        return d.min(axis=1)

    def min_gap(self) -> float:
        c, r = self.centers, self.radii
        best = np.inf
        for i in range(len(c)):
            for j in range(i + 1, len(c)):
                best = min(best, np.hypot(*(c[i] - c[j])) - r[i] - r[j])
        return float(best)

    def bbox(self) -> tuple[np.ndarray, np.ndarray]:
        if not self.disks:
            raise ValueError("an empty wire frame has no bounding box")
        c, r = self.centers, self.radii
        return (c - r[:, None]).min(axis=0), (c + r[:, None]).max(axis=0)

    def diameter(self) -> float:
        lo, hi = self.bbox()
        return float(np.hypot(*(hi - lo)))

    def project(self, disk: int, point) -> np.ndarray:
        d = self.disks[disk]
        c = np.asarray(d.center)
        v = np.asarray(point, dtype=float) - c
        return c + d.radius * v / np.linalg.norm(v)


@dataclass(frozen=True)
class Vertex:
    """A junction, or an anchor when ``anchor`` names the disk it sits on."""

    position: tuple[float, float]
    anchor: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "position", (float(self.position[0]), float(self.position[1])))


@dataclass(frozen=True, eq=False)
class FilmEdge:
    """Polyline between two vertex ids; ``points`` includes both endpoints."""

    start: int
    end: int
    points: np.ndarray
    multiplicity: int = 1

    def __post_init__(self):
        pts = as_points(self.points).copy()
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)
        if self.multiplicity not in (1, 2):
            raise ValueError("multiplicity must be 1 or 2")

    def __eq__(self, other) -> bool:
        if not isinstance(other, FilmEdge):
            return NotImplemented
        return (
            self.start == other.start
            and self.end == other.end
            and self.multiplicity == other.multiplicity
            and np.array_equal(self.points, other.points)
        )

    @property
    def polyline(self) -> Polyline:
        return Polyline(self.points)

    @property
    def length(self) -> float:
        return float(np.sum(np.linalg.norm(np.diff(self.points, axis=0), axis=1)))

    def oriented(self, forward: bool) -> np.ndarray:
        return self.points if forward else self.points[::-1]


@dataclass(frozen=True)
class LiquidRegion:
    """Boundary loop as ``(edge index, forward)`` pairs, counterclockwise."""

    loop: tuple[tuple[int, bool], ...]

    def __post_init__(self):
        object.__setattr__(self, "loop", tuple((int(e), bool(f)) for e, f in self.loop))


@dataclass(frozen=True)
class FilmComplex:
    wireframe: WireFrame
    vertices: tuple[Vertex, ...] = ()
    edges: tuple[FilmEdge, ...] = ()
    regions: tuple[LiquidRegion, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "vertices", tuple(self.vertices))
        object.__setattr__(self, "edges", tuple(self.edges))
        object.__setattr__(self, "regions", tuple(self.regions))

    def region_points(self, k: int) -> np.ndarray:
        """Closed boundary polygon of region ``k`` (first point not repeated)."""
        chunks = []
        for e, fwd in self.regions[k].loop:
            chunks.append(self.edges[e].oriented(fwd)[:-1])
        return np.vstack(chunks)

    def boundary_edges(self) -> set[int]:
        return {e for r in self.regions for e, _ in r.loop}

    def anchor_points(self) -> np.ndarray:
        pts = [v.position for v in self.vertices if v.anchor is not None]
        return np.array(pts).reshape(-1, 2)

    def edge_polylines(self) -> list[np.ndarray]:
        return [e.points for e in self.edges]

    def with_edges(self, edges: Sequence[FilmEdge]) -> "FilmComplex":
        return replace(self, edges=tuple(edges))

    def junctions(self) -> list[int]:
        """Non-anchor vertices where two or more edge ends meet."""
        deg = np.zeros(len(self.vertices), dtype=int)
        for e in self.edges:
            deg[e.start] += 1
            deg[e.end] += 1
        return [i for i, v in enumerate(self.vertices) if v.anchor is None and deg[i] >= 2]


@dataclass(frozen=True)
class SolveReport:
    energy: float
    volume: float
    lam: float
    classification: Classification
    junction_residual: float
    spanning_ok: bool
    iterations: int
    converged: bool = True
    lambda_spread: float = 0.0
    multiplier: float = float("nan")
    gradient_norm: float = float("nan")
    halvings: int = 0
    merges: int = 0
    notes: tuple[str, ...] = field(default_factory=tuple)

    def row(self) -> dict:
        return {
            "energy": self.energy,
            "volume": self.volume,
            "lambda": self.lam,
            "classification": self.classification.value,
            "junction_residual": self.junction_residual,
            "spanning_ok": self.spanning_ok,
            "iterations": self.iterations,
        }


# --------------------------------------------------------------------------
# measures


def relaxed_energy(f: FilmComplex) -> float:
    """Multiplicity-weighted length: boundary counted once, collapsed film twice."""
    return float(sum(e.multiplicity * e.length for e in f.edges))


def liquid_volume(f: FilmComplex) -> float:
    total = 0.0
    for k in range(len(f.regions)):
        pts = f.region_points(k)
        if len(pts) < 3:
            raise ValueError(f"region {k} has a degenerate boundary loop")
        a = polygon_area(pts)
        if a <= 0.0:
            raise ValueError(f"region {k} has non-positive area {a:.3e}")
        total += a
    return total


# --------------------------------------------------------------------------
# validity


def _loop_closes(f: FilmComplex, region: LiquidRegion) -> bool:
    ends = []
    for e, fwd in region.loop:
        edge = f.edges[e]
        ends.append((edge.start, edge.end) if fwd else (edge.end, edge.start))
    return all(ends[i][1] == ends[(i + 1) % len(ends)][0] for i in range(len(ends)))


def validate(f: FilmComplex, tol: float = ANCHOR_TOL) -> list[str]:
    """List every broken invariant; an empty list means the pair is admissible."""
    out: list[str] = []
    w = f.wireframe
    nv = len(f.vertices)
    for i, v in enumerate(f.vertices):
        if v.anchor is not None:
            if not 0 <= v.anchor < len(w):
                out.append(f"vertex {i}: anchor names unknown disk {v.anchor}")
                continue
            d = w.disks[v.anchor]
            r = np.hypot(v.position[0] - d.center[0], v.position[1] - d.center[1])
            if abs(r - d.radius) > tol * max(1.0, d.radius):
                out.append(f"vertex {i}: anchor off the disk boundary by {abs(r - d.radius):.3e}")
    for k, e in enumerate(f.edges):
        if not (0 <= e.start < nv and 0 <= e.end < nv):
            out.append(f"edge {k}: endpoint refers to a missing vertex")
            continue
        if len(e.points) < 2:
            out.append(f"edge {k}: fewer than two points")
            continue
        if not np.allclose(e.points[0], f.vertices[e.start].position, atol=tol) or not np.allclose(
            e.points[-1], f.vertices[e.end].position, atol=tol
        ):
            out.append(f"edge {k}: geometry does not start/end at its vertices")
        steps = np.linalg.norm(np.diff(e.points, axis=0), axis=1)
        if np.any(steps == 0.0):
            out.append(f"edge {k}: repeated consecutive points")
        # K must lie in the closure of Omega
        if not len(w):
            continue
        seg_d = point_segment_distance(w.centers, e.points[:-1], e.points[1:]) - w.radii[:, None]
        if np.any(seg_d < -tol * max(1.0, float(w.radii.max()))):
            out.append(f"edge {k}: K must lie in Omega (enters a wire disk)")

    # multiplicity rules
    uses: dict[int, int] = {}
    for r in f.regions:
        for e, _ in r.loop:
            uses[e] = uses.get(e, 0) + 1
    for ri, r in enumerate(f.regions):
        if not r.loop:
            out.append(f"region {ri}: empty boundary loop")
            continue
        if any(not 0 <= e < len(f.edges) for e, _ in r.loop):
            out.append(f"region {ri}: boundary references a missing edge")
            continue
        for e, _ in r.loop:
            if f.edges[e].multiplicity != 1:
                out.append(f"region {ri}: edge {e} has multiplicity 2; theta=1 required on the reduced boundary")
        if not _loop_closes(f, r):
            out.append(f"region {ri}: boundary loop does not close")
            continue
        pts = f.region_points(ri)
        if len(pts) < 3 or polygon_area(pts) <= 0.0:
            out.append(f"region {ri}: boundary must be counterclockwise with positive area")
    for k, e in enumerate(f.edges):
        n = uses.get(k, 0)
        if e.multiplicity == 1 and n == 0:
            out.append(f"edge {k}: multiplicity 1 off the liquid boundary; theta=2 required there")
        if n > 1:
            out.append(f"edge {k}: shared by {n} region boundaries")

    if out:
        return out
    out.extend(_crossing_violations(f, tol))
    out.extend(_overlap_violations(f))
    return out


def _crossing_violations(f: FilmComplex, tol: float) -> list[str]:
    a_list, b_list, ids, owner = [], [], [], []
    base = len(f.vertices)
    for k, e in enumerate(f.edges):
        n = len(e.points)
        node = np.arange(base, base + n)
        node[0], node[-1] = e.start, e.end
        base += n
        a_list.append(e.points[:-1])
        b_list.append(e.points[1:])
        ids.append(np.stack([node[:-1], node[1:]], axis=1))
        owner.extend([k] * (n - 1))
    a = np.vstack(a_list)
    b = np.vstack(b_list)
    ids = np.vstack(ids)
    owner = np.array(owner)
    pairs = crossing_pairs(a, b, ids, tol)
    out = []
    seen = set()
    for i, j in pairs:
        key = (owner[i], owner[j])
        if key not in seen:
            seen.add(key)
            if key[0] == key[1]:
                out.append(f"edge {key[0]}: self-intersection")
            else:
                out.append(f"edges {key[0]} and {key[1]} cross away from a shared vertex")
    return out


def _overlap_violations(f: FilmComplex) -> list[str]:
    out = []
    polys = [f.region_points(k) for k in range(len(f.regions))]
    for i in range(len(polys)):
        for j in range(len(polys)):
            if i == j:
                continue
            # test points strictly off the shared vertices
            mids = 0.5 * (polys[j] + np.roll(polys[j], -1, axis=0))
            if np.any(points_in_polygon(mids, polys[i])):
                out.append(f"regions {i} and {j} overlap")
    return out


def _distance_to_regions(f: FilmComplex, pts: np.ndarray) -> np.ndarray:
    if not f.regions:
        return np.full(len(pts), np.inf)
    best = np.full(len(pts), np.inf)
    for k in range(len(f.regions)):
        poly = f.region_points(k)
        d = point_segment_distance(pts, poly, np.roll(poly, -1, axis=0)).min(axis=1)
        d[points_in_polygon(pts, poly)] = 0.0
        best = np.minimum(best, d)
    return best


def classify(f: FilmComplex, tol: float = CLASSIFY_TOL) -> Classification:
    collapsed = [e for e in f.edges if e.multiplicity == 2]
    if not collapsed:
        return Classification.NON_COLLAPSED
    for e in collapsed:
        pts = np.vstack([e.points, 0.5 * (e.points[:-1] + e.points[1:])])
        if np.any(_distance_to_regions(f, pts) > tol):
            return Classification.EXTERIORLY_COLLAPSED
    return Classification.COLLAPSED


# --------------------------------------------------------------------------
# serialization


FORMAT_VERSION = 1


def film_to_dict(f: FilmComplex) -> dict:
    return {
        "version": FORMAT_VERSION,
        "wireframe": [{"center": list(d.center), "radius": d.radius} for d in f.wireframe.disks],
        "vertices": [
            {"position": list(v.position), **({"anchor": v.anchor} if v.anchor is not None else {})}
            for v in f.vertices
        ],
        "edges": [
            {"start": e.start, "end": e.end, "multiplicity": e.multiplicity, "points": e.points.tolist()}
            for e in f.edges
        ],
        "regions": [[[e, fwd] for e, fwd in r.loop] for r in f.regions],
    }


def _require_keys(obj: dict, allowed: set[str], required: set[str], where: str):
    if not isinstance(obj, dict):
        raise ValueError(f"{where}: expected a table")
    unknown = set(obj) - allowed
    if unknown:
        raise ValueError(f"{where}: unknown keys {sorted(unknown)}")
    missing = required - set(obj)
    if missing:
        raise ValueError(f"{where}: missing keys {sorted(missing)}")


def film_from_dict(data: dict) -> FilmComplex:
    _require_keys(data, {"version", "wireframe", "vertices", "edges", "regions"}, {"version", "wireframe"}, "film")
    if data["version"] != FORMAT_VERSION:
        raise ValueError(f"film: unsupported version {data['version']!r}")
    disks = []
    for i, d in enumerate(data["wireframe"]):
        _require_keys(d, {"center", "radius"}, {"center", "radius"}, f"wireframe[{i}]")
        disks.append(Disk(tuple(d["center"]), d["radius"]))
    verts = []
    for i, v in enumerate(data.get("vertices", [])):
        _require_keys(v, {"position", "anchor"}, {"position"}, f"vertices[{i}]")
        verts.append(Vertex(tuple(v["position"]), v.get("anchor")))
    edges = []
    for i, e in enumerate(data.get("edges", [])):
        _require_keys(e, {"start", "end", "multiplicity", "points"}, {"start", "end", "points"}, f"edges[{i}]")
        edges.append(FilmEdge(int(e["start"]), int(e["end"]), np.array(e["points"], dtype=float), int(e.get("multiplicity", 1))))
    regions = [LiquidRegion(tuple((int(a), bool(b)) for a, b in r)) for r in data.get("regions", [])]
    return FilmComplex(WireFrame(tuple(disks)), tuple(verts), tuple(edges), tuple(regions))
