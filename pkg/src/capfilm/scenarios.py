"""Initial topologies for the shipped frames, and the scenario file format."""
from __future__ import annotations

import re
import sys
from dataclasses import fields
from pathlib import Path

import numpy as np
from scipy.optimize import brentq

from .film import Disk, FilmComplex, FilmEdge, LiquidRegion, Vertex, WireFrame, film_from_dict
from .geometry import arc_points, polygon_area
from .solver import Scenario, SolveConfig
from .spanning import SpanningSpec, _weiszfeld

if sys.version_info >= (3, 11):
    import tomllib
else:  # pragma: no cover
    import tomli as tomllib

SCENARIO_VERSION = 1
N_INIT = 64


def segment_area(chord: float, curvature: float) -> float:
    """Area between a chord and its minor circular arc of the given curvature."""
    k = abs(curvature)
    if k * chord < 1e-12:
        return 0.0
    r = 1.0 / k
    theta = 2.0 * np.arcsin(min(1.0, chord * k / 2.0))
    if theta < 0.1:
        # theta - sin(theta) by its series; the direct difference cancels
        t2 = theta * theta
        excess = theta**3 / 6.0 * (1.0 - t2 / 20.0 * (1.0 - t2 / 42.0 * (1.0 - t2 / 72.0 * (1.0 - t2 / 110.0))))
    else:
        excess = theta - np.sin(theta)
    return 0.5 * r * r * excess


def curvature_for_area(chord: float, area: float) -> float:
    """Curvature of the minor arc over ``chord`` enclosing ``area`` with it."""
    kmax = 2.0 / chord
    if area >= segment_area(chord, kmax):
        raise ValueError("segment area exceeds a half disk; no minor arc fits")
    if area <= 0.0:
        return 0.0
    return brentq(lambda k: segment_area(chord, k) - area, 1e-15, kmax, xtol=1e-16, rtol=1e-15, maxiter=500)


# --------------------------------------------------------------------------
# builders


def two_disk_lens(w: WireFrame, epsilon: float, split: float = 0.6) -> FilmComplex:
    """Lens between the facing points of disks 0 and 1, arcs sharing both anchors."""
    c, r = w.centers, w.radii
    u = (c[1] - c[0]) / np.linalg.norm(c[1] - c[0])
    a0 = c[0] + r[0] * u
    a1 = c[1] - r[1] * u
    chord = float(np.linalg.norm(a1 - a0))
    half_disk = segment_area(chord, 2.0 / chord)
    if split * epsilon >= 0.98 * half_disk or (1 - split) * epsilon >= 0.98 * half_disk:
        split = 0.5
    k_low = curvature_for_area(chord, split * epsilon)
    k_high = curvature_for_area(chord, (1.0 - split) * epsilon)
    verts = (Vertex(tuple(a0), 0), Vertex(tuple(a1), 1))
    edges = (
        FilmEdge(0, 1, arc_points(a0, a1, k_low, N_INIT)),
        FilmEdge(1, 0, arc_points(a1, a0, k_high, N_INIT)),
    )
    return FilmComplex(w, verts, edges, (LiquidRegion(((0, True), (1, True))),))


def _ccw_order(center: np.ndarray, pts: np.ndarray) -> list[int]:
    ang = np.arctan2(pts[:, 1] - center[1], pts[:, 0] - center[0])
    return [int(i) for i in np.argsort(ang)]


def _curved_triangle(center, dirs, rho, bend):
    """Loop through ``center + rho*dirs`` with arcs bent inward by ``bend`` radians."""
    J = center + rho * dirs
    arcs = []
    for i in range(3):
        p, q = J[i], J[(i + 1) % 3]
        chord = np.linalg.norm(q - p)
        arcs.append(arc_points(p, q, -2.0 * np.sin(bend) / chord, N_INIT))
    return J, arcs


def three_disk_collapsed(w: WireFrame, epsilon: float, bend_deg: float = 20.0) -> FilmComplex:
    """Curved triangle of liquid around the Fermat point, wired to the disks by
    multiplicity-2 segments from its corners."""
    if len(w) != 3:
        raise ValueError("the collapsed builder needs exactly three disks")
    c, r = w.centers, w.radii
    O = _weiszfeld(c)
    order = _ccw_order(O, c)
    dirs = np.array([(c[i] - O) / np.linalg.norm(c[i] - O) for i in order])
    bend = np.radians(bend_deg)

    def area(rho):
        _, arcs = _curved_triangle(O, dirs, rho, bend)
        return polygon_area(np.vstack([a[:-1] for a in arcs])) - epsilon

    reach = min(np.linalg.norm(c[i] - O) - r[i] for i in order)
    rho = brentq(area, 1e-9, 0.9 * reach, xtol=1e-15)
    J, arcs = _curved_triangle(O, dirs, rho, bend)
    verts = [Vertex(tuple(J[k])) for k in range(3)]
    edges = [FilmEdge(k, (k + 1) % 3, arcs[k]) for k in range(3)]
    for k, i in enumerate(order):
        a = c[i] - r[i] * dirs[k]
        verts.append(Vertex(tuple(a), int(i)))
        edges.append(FilmEdge(3 + k, k, np.linspace(a, J[k], N_INIT // 4 + 1), 2))
    region = LiquidRegion(tuple((k, True) for k in range(3)))
    return FilmComplex(w, tuple(verts), tuple(edges), (region,))


def three_disk_tube(w: WireFrame, epsilon: float) -> FilmComplex:
    """Thin liquid tube along the Steiner tree, touching each disk at one point."""
    if len(w) != 3:
        raise ValueError("the tube builder needs exactly three disks")
    c, r = w.centers, w.radii
    O = _weiszfeld(c)
    order = _ccw_order(O, c)
    dirs = np.array([(c[i] - O) / np.linalg.norm(c[i] - O) for i in order])
    reach = np.array([np.linalg.norm(c[i] - O) - r[i] for i in order])
    anchors = np.array([c[i] - r[i] * dirs[k] for k, i in enumerate(order)])
    t = np.linspace(0.0, 1.0, N_INIT + 1)

    def loops(width):
        out = []
        for k in range(3):
            j = (k + 1) % 3
            nk = np.array([-dirs[k][1], dirs[k][0]])
            nj = np.array([-dirs[j][1], dirs[j][0]])
            corner = O + width / np.sin(np.pi / 3) * (dirs[k] + dirs[j]) / np.linalg.norm(dirs[k] + dirs[j])
            profile = width * np.sqrt(1.0 - t)
            s = width / np.tan(np.pi / 3)
            out_k = O + (s + (reach[k] - s) * t)[:, None] * dirs[k] + profile[:, None] * nk
            out_j = O + (s + (reach[j] - s) * t)[:, None] * dirs[j] - profile[:, None] * nj
            edge = np.vstack([out_k[::-1][:-1], corner, out_j[1:]])
            edge[0] = anchors[k]
            edge[-1] = anchors[j]
            out.append(edge)
        return out

    wmax = 0.25 * reach.min()
    width = brentq(lambda wd: polygon_area(np.vstack([e[:-1] for e in loops(wd)])) - epsilon, 1e-12, wmax, xtol=1e-16)
    verts = tuple(Vertex(tuple(anchors[k]), int(i)) for k, i in enumerate(order))
    edges = tuple(FilmEdge(k, (k + 1) % 3, e) for k, e in enumerate(loops(width)))
    return FilmComplex(w, verts, edges, (LiquidRegion(tuple((k, True) for k in range(3))),))


def circular_drop(radius: float, center=(0.0, 0.0), n: int = 256, w: WireFrame | None = None) -> FilmComplex:
    """A round drop as one closed boundary edge on a single vertex."""
    w = WireFrame(()) if w is None else w
    ang = 2.0 * np.pi * np.arange(n + 1) / n
    pts = np.column_stack([center[0] + radius * np.cos(ang), center[1] + radius * np.sin(ang)])
    pts[-1] = pts[0]
    return FilmComplex(w, (Vertex(tuple(pts[0])),), (FilmEdge(0, 0, pts),), (LiquidRegion(((0, True),)),))


def collapsed_segment(w: WireFrame, n: int = 64) -> FilmComplex:
    """A bare multiplicity-2 segment between the facing points of disks 0 and 1."""
    c, r = w.centers, w.radii
    u = (c[1] - c[0]) / np.linalg.norm(c[1] - c[0])
    a0 = c[0] + r[0] * u
    a1 = c[1] - r[1] * u
    verts = (Vertex(tuple(a0), 0), Vertex(tuple(a1), 1))
    return FilmComplex(w, verts, (FilmEdge(0, 1, np.linspace(a0, a1, n + 1), 2),), ())


BUILDERS = {
    "lens": lambda w, eps: two_disk_lens(w, eps),
    "collapsed": lambda w, eps: three_disk_collapsed(w, eps),
    "tube": lambda w, eps: three_disk_tube(w, eps),
    "segment": lambda w, eps: collapsed_segment(w),
}


# --------------------------------------------------------------------------
# shipped frames


def two_disk_frame() -> WireFrame:
    return WireFrame((Disk((0.0, 0.0), 0.1), Disk((1.0, 0.0), 0.1)))


def three_disk_frame() -> WireFrame:
    return WireFrame(
        (Disk((0.0, 0.0), 0.05), Disk((1.0, 0.0), 0.05), Disk((0.5, np.sqrt(3.0) / 2.0), 0.05))
    )


def unit_segment_frame() -> WireFrame:
    return WireFrame((Disk((-0.1, 0.0), 0.1), Disk((1.1, 0.0), 0.1)))


# --------------------------------------------------------------------------
# scenario files


class ScenarioError(ValueError):
    """Malformed scenario document."""


_TOP_KEYS = {"version", "epsilon", "seed", "wireframe", "spanning", "topology", "solver"}
_CONFIG_KEYS = {f.name for f in fields(SolveConfig)}


def _check_keys(obj, allowed, required, where):
    if not isinstance(obj, dict):
        raise ScenarioError(f"{where}: expected a table")
    unknown = set(obj) - set(allowed)
    if unknown:
        raise ScenarioError(f"{where}: unknown keys {sorted(unknown)}")
    missing = set(required) - set(obj)
    if missing:
        raise ScenarioError(f"{where}: missing keys {sorted(missing)}")


class ScenarioFile:
    """Parsed scenario document; ``topology`` names a builder or lists the film."""

    def __init__(self, data: dict, source: str = "<scenario>"):
        self.source = source
        _check_keys(data, _TOP_KEYS, {"version", "epsilon", "wireframe", "topology"}, "scenario")
        if data["version"] != SCENARIO_VERSION:
            raise ScenarioError(f"scenario: unsupported version {data['version']!r}")
        self.data = data
        self.epsilon = float(data["epsilon"])
        if not self.epsilon > 0.0:
            raise ScenarioError("scenario: epsilon must be positive")
        self.seed = int(data.get("seed", 0))
        wf = data["wireframe"]
        _check_keys(wf, {"disks"}, {"disks"}, "wireframe")
        disks = []
        for i, d in enumerate(wf["disks"]):
            _check_keys(d, {"center", "radius"}, {"center", "radius"}, f"wireframe.disks[{i}]")
            disks.append(Disk(tuple(d["center"]), d["radius"]))
        try:
            self.wireframe = WireFrame(tuple(disks))
        except ValueError as exc:
            raise ScenarioError(f"wireframe: {exc}") from exc
        span = data.get("spanning", {})
        _check_keys(span, {"classes"}, set(), "spanning")
        classes = span.get("classes")
        try:
            self.spec = (
                SpanningSpec(tuple(tuple(c) for c in classes))
                if classes is not None
                else SpanningSpec.single_disks(len(self.wireframe))
            )
        except ValueError as exc:
            raise ScenarioError(f"spanning: {exc}") from exc
        topo = data["topology"]
        _check_keys(topo, {"builder", "vertices", "edges", "regions"}, set(), "topology")
        if "builder" in topo:
            if set(topo) != {"builder"}:
                raise ScenarioError("topology: a builder excludes explicit vertices/edges/regions")
            if topo["builder"] not in BUILDERS:
                raise ScenarioError(f"topology: unknown builder {topo['builder']!r}; choose from {sorted(BUILDERS)}")
            self.builder = topo["builder"]
            self.explicit = None
        else:
            self.builder = None
            film = {
                "version": 1,
                "wireframe": [{"center": list(d.center), "radius": d.radius} for d in self.wireframe.disks],
                **{k: topo[k] for k in ("vertices", "edges", "regions") if k in topo},
            }
            try:
                self.explicit = film_from_dict(film)
            except (ValueError, TypeError, KeyError) as exc:
                raise ScenarioError(f"topology: {exc}") from exc
        solver = data.get("solver", {})
        _check_keys(solver, _CONFIG_KEYS, set(), "solver")
        try:
            self.config = SolveConfig(**solver)
        except (TypeError, ValueError) as exc:
            raise ScenarioError(f"solver: {exc}") from exc

    def initial(self, epsilon: float | None = None) -> FilmComplex:
        eps = self.epsilon if epsilon is None else epsilon
        if self.builder is not None:
            return BUILDERS[self.builder](self.wireframe, eps)
        return self.explicit

    def scenario(self, epsilon: float | None = None, config: SolveConfig | None = None) -> Scenario:
        eps = self.epsilon if epsilon is None else float(epsilon)
        return Scenario(self.wireframe, self.spec, eps, self.initial(eps), config or self.config)


def parse_scenario(text: str, source: str = "<scenario>") -> ScenarioFile:
    try:
        data = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        msg = str(exc)
        m = re.search(r"\(at line (\d+), column (\d+)\)", msg)
        if m:
            line, col = int(m.group(1)), int(m.group(2))
        else:
            lines = text.split("\n")
            line, col = len(lines), len(lines[-1]) + 1
        reason = re.sub(r"\s*\(at [^)]*\)\s*$", "", msg)
        raise ScenarioError(f"{source}: line {line}, column {col}: {reason}") from exc
    return ScenarioFile(data, source)


def load_scenario(path) -> ScenarioFile:
    path = Path(path)
    return parse_scenario(path.read_text(encoding="utf-8"), str(path))
