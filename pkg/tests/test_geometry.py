import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from capfilm.geometry import (
    Polyline,
    arc_points,
    convex_hull,
    fit_curvature,
    length_inside_ball,
    min_distance,
    normal_offset,
    polygon_area,
    polyline_length,
    regular_polygon,
    resample_polyline,
    rotation,
    segments_intersect,
    crossing_pairs,
    signed_area,
)

SQUARE = np.array([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]])


def circle(n, r=1.0, center=(0.0, 0.0)):
    return regular_polygon(n, r, center)


# --------------------------------------------------------------------------
# lengths and areas


@pytest.mark.parametrize(
    "points,closed,expected",
    [
        ([[0, 0], [1, 0]], False, 1.0),
        (SQUARE, True, 4.0),
        (circle(256), True, 2 * 256 * np.sin(np.pi / 256)),
    ],
)
def test_polyline_length(points, closed, expected):
    assert polyline_length(Polyline(points, closed)) == pytest.approx(expected, abs=1e-12)


def test_256_gon_perimeter_near_two_pi():
    assert abs(polyline_length(Polyline(circle(256), True)) - 2 * np.pi) < 1e-3


@pytest.mark.parametrize("flip,expected", [(False, 1.0), (True, -1.0)])
def test_square_area_sign(flip, expected):
    pts = SQUARE[::-1] if flip else SQUARE
    assert signed_area(Polyline(pts, True)) == pytest.approx(expected)


def test_256_gon_area():
    a = signed_area(Polyline(circle(256), True))
    assert a == pytest.approx(128 * np.sin(2 * np.pi / 256), abs=1e-12)
    assert abs(a - np.pi) < 1e-3


def test_open_chain_has_no_area():
    with pytest.raises(ValueError, match="open chain has no area"):
        signed_area(Polyline([[0, 0], [1, 0], [1, 1]]))


def test_area_of_small_far_polygon_keeps_precision():
    pts = circle(1024, 1e-3, (1e3, -2e3))
    exact = 0.5 * 1024 * 1e-6 * np.sin(2 * np.pi / 1024)
    assert polygon_area(pts) == pytest.approx(exact, rel=1e-9)


def test_polyline_rejects_repeated_points():
    with pytest.raises(ValueError):
        Polyline([[0, 0], [0, 0], [1, 0]])


@settings(max_examples=50, deadline=None)
@given(
    st.floats(-np.pi, np.pi),
    st.floats(-10, 10),
    st.floats(-10, 10),
    st.integers(0, 2**31 - 1),
)
def test_length_rigid_invariance(theta, dx, dy, seed):
    rng = np.random.default_rng(seed)
    pts = rng.normal(size=(12, 2))
    moved = pts @ rotation(theta).T + np.array([dx, dy])
    a = polyline_length(Polyline(pts))
    b = polyline_length(Polyline(moved))
    assert abs(a - b) <= 1e-12 * max(1.0, a) * 10


@settings(max_examples=50, deadline=None)
@given(st.floats(-5, 5), st.floats(-5, 5), st.integers(3, 40))
def test_area_reversal_and_translation(dx, dy, n):
    pts = circle(n, 0.7)
    a = signed_area(Polyline(pts, True))
    assert signed_area(Polyline(pts[::-1], True)) == pytest.approx(-a, abs=1e-12)
    assert signed_area(Polyline(pts + [dx, dy], True)) == pytest.approx(a, abs=1e-11)


# --------------------------------------------------------------------------
# hulls


def test_hull_drops_interior_point():
    h = convex_hull([[0, 0], [1, 0], [0, 1], [0.2, 0.2]])
    assert not h.degenerate
    assert {tuple(v) for v in h.vertices} == {(0, 0), (1, 0), (0, 1)}
    assert polygon_area(h.vertices) > 0


def test_hull_of_identical_points_is_degenerate():
    h = convex_hull([[0.3, 0.4]] * 5)
    assert h.degenerate and len(h.vertices) == 1


def test_hull_of_collinear_points_is_a_segment():
    h = convex_hull([[0, 0], [1, 1], [2, 2], [0.5, 0.5]])
    assert h.degenerate and h.area == 0.0
    assert h.contains([[1.5, 1.5]]).all()
    assert not h.contains([[1.5, 1.0]]).any()


def test_empty_hull_rejected():
    with pytest.raises(ValueError):
        convex_hull(np.zeros((0, 2)))


def test_hull_of_random_disk_points():
    rng = np.random.default_rng(3)
    r = np.sqrt(rng.uniform(size=1000))
    a = rng.uniform(0, 2 * np.pi, size=1000)
    pts = np.column_stack([r * np.cos(a), r * np.sin(a)])
    h = convex_hull(pts)
    # every hull vertex is an input point
    assert all(np.any(np.all(pts == v, axis=1)) for v in h.vertices)
    # half-plane oracle: each input is left of every hull edge
    v, w = h.vertices, np.roll(h.vertices, -1, axis=0)
    side = (w - v)[None, :, 0] * (pts[:, None, 1] - v[None, :, 1]) - (w - v)[None, :, 1] * (pts[:, None, 0] - v[None, :, 0])
    assert side.min() >= -1e-12


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**31 - 1), st.integers(1, 60))
def test_hull_idempotent(seed, n):
    pts = np.random.default_rng(seed).normal(size=(n, 2))
    h = convex_hull(pts)
    assert convex_hull(h.vertices) == h


# --------------------------------------------------------------------------
# curvature


def test_straight_curvature_zero():
    k = fit_curvature(Polyline(np.linspace([0, 0], [1, 2], 11)))
    assert np.allclose(k, 0.0)


@pytest.mark.parametrize("flip,sign", [(False, 1.0), (True, -1.0)])
def test_circle_curvature_sign(flip, sign):
    pts = circle(128, 2.0)
    if flip:
        pts = pts[::-1]
    k = fit_curvature(Polyline(pts, True))
    assert np.allclose(k, sign * 0.5, atol=1e-3)


@pytest.mark.parametrize("r", [0.01, 0.3, 5.0])
@pytest.mark.parametrize("window", [1, 3])
def test_circle_curvature_is_constant(r, window):
    k = fit_curvature(Polyline(circle(200, r, (1.0, -2.0)), True), window)
    assert (k.max() - k.min()) / abs(k.mean()) < 1e-6


def test_curvature_window_validation():
    with pytest.raises(ValueError):
        fit_curvature(Polyline([[0, 0], [1, 0], [2, 1]]), window=2)


def test_arc_points_turns_left_for_positive_curvature():
    pts = arc_points([0, 0], [1, 0], 1.0, 32)
    assert pts[16, 1] < 0  # the chord lies left of travel, so the arc bulges right
    k = fit_curvature(Polyline(pts))
    assert np.allclose(k, 1.0, atol=1e-9)


# --------------------------------------------------------------------------
# offsets


def test_zero_offset_is_identity():
    p = Polyline(circle(32), True)
    assert normal_offset(p, np.zeros(32)) == p


def test_parabolic_offset_of_segment():
    pts = np.linspace([0, 0], [1, 0], 101)
    s = pts[:, 0]
    u = 0.4 * s * (1 - s)
    q = normal_offset(Polyline(pts), u, +1).vertices
    assert np.allclose(q[0], pts[0]) and np.allclose(q[-1], pts[-1])
    assert q[:, 1].max() == pytest.approx(0.1)


def test_circle_offset_length():
    # a counterclockwise loop grows with side -1
    q = normal_offset(Polyline(circle(256), True), 0.1, -1)
    assert polyline_length(q) == pytest.approx(2 * np.pi * 1.1, rel=1e-2)


@pytest.mark.parametrize("shape", ["circle", "square"])
@pytest.mark.parametrize("c", [0.01, 0.05])
def test_parallel_body_area(shape, c):
    if shape == "circle":
        pts = circle(512)
    else:
        side = np.linspace(0, 1, 129)[:-1]
        pts = np.vstack([
            np.column_stack([side, 0 * side]),
            np.column_stack([1 + 0 * side, side]),
            np.column_stack([1 - side, 1 + 0 * side]),
            np.column_stack([0 * side, 1 - side]),
        ])
    p = Polyline(pts, True)
    grown = signed_area(normal_offset(p, c, -1)) - signed_area(p)
    expected = c * polyline_length(p) + np.pi * c**2
    assert grown == pytest.approx(expected, rel=1e-2)


def test_offset_rejects_fold():
    pts = circle(64, 0.1)
    u = np.where(pts[:, 0] > 0, 0.3, 0.0)
    with pytest.raises(ValueError, match="offset not embedded"):
        normal_offset(Polyline(pts, True), u, +1)


def test_offset_rejects_negative_amplitude():
    with pytest.raises(ValueError):
        normal_offset(Polyline([[0, 0], [1, 0]]), [-0.1, 0.0])


# --------------------------------------------------------------------------
# distances and intersections


@pytest.mark.parametrize(
    "p,q,expected",
    [
        ([[0, 0], [1, 0]], [np.array([[0.5, 2.0]])], 2.0),
        ([[0, 0], [1, 0]], [np.array([[1, 0], [2, 1]])], 0.0),
    ],
)
def test_min_distance(p, q, expected):
    assert min_distance(Polyline(p), q) == pytest.approx(expected)


def test_distance_to_sampled_circle():
    ring = Polyline(circle(4096, 0.25, (0.5, 1.0)), True)
    assert min_distance(Polyline([[0, 0], [1, 0]]), [ring]) == pytest.approx(0.75, abs=1e-3)


def test_segments_intersect_cases():
    p0, p1 = np.array([0.0, 0.0]), np.array([1.0, 1.0])
    assert segments_intersect(p0, p1, np.array([0.0, 1.0]), np.array([1.0, 0.0]))
    assert not segments_intersect(p0, p1, np.array([2.0, 0.0]), np.array([3.0, 0.0]))
    # touching end to end counts
    assert segments_intersect(p0, p1, p1, np.array([2.0, 0.0]))


def test_crossing_pairs_matches_brute_force():
    rng = np.random.default_rng(11)
    a = rng.uniform(size=(60, 2))
    b = a + rng.normal(scale=0.15, size=(60, 2))
    got = set(map(tuple, crossing_pairs(a, b)))
    want = {
        (i, j)
        for i in range(60)
        for j in range(i + 1, 60)
        if segments_intersect(a[i], b[i], a[j], b[j])
    }
    assert got == want


def test_length_inside_ball():
    pts = np.array([[-2.0, 0.0], [2.0, 0.0]])
    assert length_inside_ball(pts, (0, 0), 1.0) == pytest.approx(2.0)
    assert length_inside_ball(pts, (0, 0.5), 1.0) == pytest.approx(2 * np.sqrt(0.75))
    assert length_inside_ball(pts, (0, 3), 1.0) == 0.0


def test_resample_keeps_endpoints_and_count():
    pts = arc_points([0, 0], [1, 0], 1.5, 10)
    out = resample_polyline(pts, 37)
    assert len(out) == 38
    assert np.allclose(out[0], pts[0]) and np.allclose(out[-1], pts[-1])
