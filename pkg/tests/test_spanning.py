import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from capfilm.film import Disk, WireFrame
from capfilm.geometry import Polyline, min_distance, regular_polygon
from capfilm.scenarios import load_scenario, three_disk_frame
from capfilm.spanning import SpanningSpec, is_spanning, steiner_baseline, winding_vector
from oracles import STEINER_LENGTH

TWO = WireFrame((Disk((0, 0), 0.1), Disk((1, 0), 0.1)))
SEGMENT = [np.array([[0.1, 0.0], [0.9, 0.0]])]


def assert_witness_ok(cert, K, w):
    assert cert.witness is not None and cert.witness.closed
    assert winding_vector(cert.witness, w) == cert.winding
    if K:
        assert min_distance(cert.witness, K) > 0.0


# --------------------------------------------------------------------------
# winding vectors


def test_circle_around_one_disk():
    w = WireFrame((Disk((0, 0), 1.0),))
    assert winding_vector(Polyline(regular_polygon(64, 3.0), True), w) == (1,)


def test_clockwise_circle_counts_negative():
    w = WireFrame((Disk((0, 0), 1.0),))
    assert winding_vector(Polyline(regular_polygon(64, 3.0)[::-1], True), w) == (-1,)


def test_figure_eight():
    # counterclockwise around A, then clockwise around B
    t = np.linspace(0, 2 * np.pi, 200, endpoint=False)
    lobe_a = np.column_stack([0.5 - 0.5 * np.cos(t), -0.4 * np.sin(t)])
    lobe_b = np.column_stack([-0.5 + 0.5 * np.cos(t), -0.4 * np.sin(t)])
    loop = np.vstack([lobe_a, lobe_b[1:]])
    w = WireFrame((Disk((0.5, 0), 0.1), Disk((-0.5, 0), 0.1)))
    # oracle: angle sum per lobe is +2pi around A and -2pi around B
    assert winding_vector(Polyline(loop, True), w) == (1, -1)


def test_contractible_loop():
    w = TWO
    loop = Polyline(regular_polygon(32, 0.5, (5.0, 5.0)), True)
    assert winding_vector(loop, w) == (0, 0)


def test_loop_touching_disk_rejected():
    w = WireFrame((Disk((0, 0), 1.0),))
    with pytest.raises(ValueError, match="touches a disk"):
        winding_vector(Polyline(regular_polygon(64, 1.0), True), w)


@settings(max_examples=30, deadline=None)
@given(st.integers(-3, 3).filter(bool), st.floats(1.5, 4.0), st.floats(-np.pi, np.pi))
def test_multiple_turns(turns, radius, phase):
    t = phase + np.linspace(0, 2 * np.pi * abs(turns), 64 * abs(turns), endpoint=False)
    r = radius + 0.01 * t  # slight spiral keeps the vertices distinct
    pts = np.column_stack([r * np.cos(t), np.sign(turns) * r * np.sin(t)])
    w = WireFrame((Disk((0, 0), 1.0), Disk((10, 0), 1.0)))
    assert winding_vector(pts, w) == (turns, 0)


# --------------------------------------------------------------------------
# spanning decision


def test_empty_network_spans_nothing():
    w = WireFrame((Disk((0, 0), 0.2),))
    cert = is_spanning([], w, SpanningSpec(((1,),)))
    assert not cert.spanning
    assert_witness_ok(cert, [], w)
    # the witness stays near the disk
    assert np.abs(cert.witness.vertices).max() < 1.0


def test_segment_blocks_single_disk_classes():
    cert = is_spanning(SEGMENT, TWO, SpanningSpec(((1, 0), (0, 1))), resolution=0.01)
    assert cert.spanning and cert.witness is None


def test_segment_misses_the_pair_class():
    cert = is_spanning(SEGMENT, TWO, SpanningSpec(((1, 1),)), resolution=0.01)
    assert not cert.spanning
    assert cert.winding == (1, 1)
    assert_witness_ok(cert, SEGMENT, TWO)
    # explicit oracle: a circle of radius 2 about (0.5, 0) has this class and avoids K
    big = Polyline(regular_polygon(256, 2.0, (0.5, 0.0)), True)
    assert winding_vector(big, TWO) == (1, 1)
    assert min_distance(big, SEGMENT) > 0


def test_figure_eight_class_is_blocked():
    # disks plus segment form one connected obstacle; only multiples of (1,1) survive
    cert = is_spanning(SEGMENT, TWO, SpanningSpec(((1, -1), (2, 0))), resolution=0.01)
    assert cert.spanning
    cert = is_spanning(SEGMENT, TWO, SpanningSpec(((1, -1), (2, 2))), resolution=0.01)
    assert not cert.spanning and cert.winding == (2, 2)
    assert_witness_ok(cert, SEGMENT, TWO)


def test_coarse_resolution_is_loud():
    with pytest.raises(ValueError, match="resolution too coarse"):
        is_spanning(SEGMENT, TWO, SpanningSpec(((1, 0),)), resolution=0.06)


def test_spec_length_must_match():
    with pytest.raises(ValueError):
        is_spanning(SEGMENT, TWO, SpanningSpec(((1, 0, 0),)))


@pytest.mark.parametrize("classes", [(), ((0, 0),), ((1, 0), (1, 0))])
def test_bad_specs(classes):
    with pytest.raises(ValueError):
        SpanningSpec(classes)


@pytest.mark.parametrize("name", ["two_disk_lens", "three_disk_collapsed", "three_disk_tube", "two_disk_large"])
def test_shipped_initial_films_span_at_two_resolutions(scenario_dir, name):
    sf = load_scenario(scenario_dir / f"{name}.scenario")
    f = sf.initial()
    h = min(sf.wireframe.min_gap(), sf.wireframe.radii.min()) / 20
    assert is_spanning(f, sf.wireframe, sf.spec, h).spanning
    assert is_spanning(f, sf.wireframe, sf.spec, h / 2).spanning


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**31 - 1))
def test_adding_edges_never_breaks_spanning(seed):
    rng = np.random.default_rng(seed)
    w = three_disk_frame()
    spec = SpanningSpec(((1, 0, 0), (0, 1, 0), (0, 0, 1), (1, 1, 1)))
    pool = []
    while len(pool) < 5:
        p = rng.uniform([-0.3, -0.3], [1.3, 1.2], size=(2, 2))
        seg = np.linspace(p[0], p[1], 8)
        if np.all(w.distance(seg) > 0.01):
            pool.append(seg)
    h = 0.0025
    k = rng.integers(0, 5)
    small = is_spanning(pool[:k], w, spec, h)
    large = is_spanning(pool, w, spec, h)
    if small.spanning:
        assert large.spanning
    if not large.spanning:
        assert_witness_ok(large, pool, w)


# --------------------------------------------------------------------------
# Plateau baseline


@pytest.mark.parametrize("gap", [0.2, 0.8, 2.0])
def test_two_disks_connect_by_the_gap(gap):
    w = WireFrame((Disk((0, 0), 0.1), Disk((0.2 + gap, 0), 0.1)))
    length, film = steiner_baseline(w, SpanningSpec.single_disks(2))
    assert length == pytest.approx(gap, abs=1e-9)
    assert len(film.edges) == 1 and film.edges[0].multiplicity == 2


def _junction_angles(film):
    out = []
    for i in film.junctions():
        dirs = []
        for e in film.edges:
            if e.start == i:
                dirs.append(e.points[1] - e.points[0])
            elif e.end == i:
                dirs.append(e.points[-2] - e.points[-1])
        ang = np.sort([np.degrees(np.arctan2(d[1], d[0])) % 360 for d in dirs])
        out.extend(np.diff(np.append(ang, ang[0] + 360)))
    return np.array(out)


def test_three_disk_steiner_tree():
    length, film = steiner_baseline(three_disk_frame(), SpanningSpec.single_disks(3))
    assert abs(length - STEINER_LENGTH) < 1e-6
    angles = _junction_angles(film)
    assert len(angles) == 3
    assert np.all(np.abs(angles - 120.0) < 0.5)
    assert is_spanning(film, three_disk_frame(), SpanningSpec.single_disks(3)).spanning


def test_four_disk_tree_has_120_degree_junctions():
    w = WireFrame(tuple(Disk(c, 0.05) for c in [(0, 0), (1.6, 0), (1.6, 1), (0, 1)]))
    # every proper subset of disks must be separated, which forces a connected tree
    subsets = [tuple(int(b) for b in np.binary_repr(m, 4)) for m in range(1, 15)]
    length, film = steiner_baseline(w, SpanningSpec(subsets))
    angles = _junction_angles(film)
    assert len(angles) == 6
    assert np.all(np.abs(angles - 120.0) < 0.5)
    # rectangle Steiner tree through the centers, trimmed by each radius
    assert length == pytest.approx(1.6 + np.sqrt(3.0) - 4 * 0.05, abs=1e-6)


def test_single_disk_has_no_spanning_network():
    w = WireFrame((Disk((0, 0), 0.1),))
    with pytest.raises(ValueError, match="no spanning topology found"):
        steiner_baseline(w, SpanningSpec(((1,),)))
