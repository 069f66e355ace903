import numpy as np
import pytest

from capfilm import Scenario, SolveConfig, SolverError, SpanningSpec, minimize
from capfilm.film import Classification, FilmComplex, FilmEdge, LiquidRegion, Vertex, WireFrame, validate
from capfilm.scenarios import (
    circular_drop,
    collapsed_segment,
    load_scenario,
    three_disk_collapsed,
    three_disk_frame,
    two_disk_frame,
    two_disk_lens,
)
from capfilm.solver import collapse_merge, junction_residual, lambda_estimate, straightness
from oracles import collapsed_energy, collapsed_lambda, lens_curvature, shallow_lens_curvature

EMPTY = WireFrame(())


def collapsed_scenario(eps, **cfg):
    w = three_disk_frame()
    cfg.setdefault("resample_target_edge_length", 0.005)
    return Scenario(w, SpanningSpec.single_disks(3), eps, three_disk_collapsed(w, eps), SolveConfig(**cfg))


def lens_scenario(eps, **cfg):
    w = two_disk_frame()
    return Scenario(w, SpanningSpec.single_disks(2), eps, two_disk_lens(w, eps), SolveConfig(**cfg))


# --------------------------------------------------------------------------
# lambda estimate


def test_round_drop_curvature():
    lam, spread = lambda_estimate(circular_drop(0.5))
    assert lam == pytest.approx(2.0, abs=1e-3)
    assert spread < 1e-6


def test_lambda_needs_liquid():
    with pytest.raises(ValueError, match="λ undefined"):
        lambda_estimate(collapsed_segment(two_disk_frame()))


# --------------------------------------------------------------------------
# converged films


def test_lens_curvature_matches_oracles(lens_solution):
    f, rep = lens_solution
    assert rep.converged
    assert rep.classification is Classification.NON_COLLAPSED
    exact = lens_curvature(1e-3)
    assert rep.lam == pytest.approx(exact, rel=1e-3)
    assert rep.lam == pytest.approx(shallow_lens_curvature(1e-3), rel=0.05)
    assert rep.lambda_spread < 0.05 * abs(rep.lam)


def test_lens_volume_is_held(lens_solution):
    _, rep = lens_solution
    assert abs(rep.volume - 1e-3) < SolveConfig().volume_tolerance


def test_collapsed_film_matches_curved_triangle(collapsed_solution):
    f, rep = collapsed_solution
    assert rep.converged and rep.spanning_ok
    assert rep.classification is Classification.EXTERIORLY_COLLAPSED
    assert rep.lam < 0
    assert rep.lam == pytest.approx(collapsed_lambda(1e-3), rel=0.02)
    assert rep.energy == pytest.approx(collapsed_energy(1e-3), rel=1e-4)
    assert rep.lambda_spread < 0.05 * abs(rep.lam)


def test_collapsed_lambda_scales_like_inverse_root(collapsed_solution):
    _, rep = collapsed_solution
    _, quarter = minimize(collapsed_scenario(2.5e-4))
    # |λ|·√ε at ε/4 equals the value at ε within 10%
    a = abs(rep.lam) * np.sqrt(1e-3)
    b = abs(quarter.lam) * np.sqrt(2.5e-4)
    assert abs(a - b) < 0.1 * a


def test_collapsed_junctions_balance(collapsed_solution):
    f, rep = collapsed_solution
    assert rep.junction_residual < 1e-2
    assert junction_residual(f) == rep.junction_residual


def test_collapsed_segments_are_straight(collapsed_solution):
    f, _ = collapsed_solution
    assert straightness(f) < 1e-3


def test_large_lens_stays_non_collapsed(large_lens_solution):
    f, rep = large_lens_solution
    assert rep.converged
    assert rep.classification is Classification.NON_COLLAPSED
    assert rep.lam > 0


@pytest.mark.parametrize("factory,h", [(lens_scenario, 0.01), (collapsed_scenario, 0.005)])
def test_mesh_refinement_changes_energy_little(factory, h):
    eps = 1e-3
    _, coarse = minimize(factory(eps, resample_target_edge_length=h))
    _, fine = minimize(factory(eps, resample_target_edge_length=h / 2))
    assert abs(fine.energy - coarse.energy) < 1e-2 * coarse.energy


def test_energy_never_increases_across_iteration_caps():
    energies = [minimize(collapsed_scenario(1e-3, max_iterations=k))[1].energy for k in (1, 2, 4, 8, 16, 32)]
    assert np.all(np.diff(energies) <= 1e-12)


def test_solve_is_deterministic():
    a_film, a = minimize(lens_scenario(1e-3))
    b_film, b = minimize(lens_scenario(1e-3))
    assert a_film == b_film
    assert a.row() == b.row()


def test_tube_zips_into_collapsed_film(scenario_dir):
    sf = load_scenario(scenario_dir / "three_disk_tube.scenario")
    assert sf.initial().edges and all(e.multiplicity == 1 for e in sf.initial().edges)
    f, rep = minimize(sf.scenario())
    assert rep.merges >= 1
    assert rep.classification is Classification.EXTERIORLY_COLLAPSED
    assert rep.lam < 0


# --------------------------------------------------------------------------
# input checks


def test_solve_needs_liquid():
    w = two_disk_frame()
    s = Scenario(w, SpanningSpec.single_disks(2), 1e-3, collapsed_segment(w))
    with pytest.raises(ValueError, match="no liquid region"):
        minimize(s)


@pytest.mark.parametrize("eps", [0.0, -1e-3])
def test_epsilon_must_be_positive(eps):
    with pytest.raises(ValueError, match="epsilon must be positive"):
        lens_scenario(eps)


def test_initial_film_must_span():
    w = two_disk_frame()
    drop = circular_drop(0.05, (0.5, 0.5), n=64, w=w)
    with pytest.raises(ValueError, match="not spanning"):
        minimize(Scenario(w, SpanningSpec.single_disks(2), 1e-3, drop))


def test_solver_error_is_a_runtime_error():
    assert issubclass(SolverError, RuntimeError)


@pytest.mark.parametrize(
    "kwargs",
    [{"step": 0.0}, {"max_iterations": 0}, {"volume_tolerance": 0.0}, {"collapse_merge_distance": -1.0}],
)
def test_config_validation(kwargs):
    with pytest.raises(ValueError):
        SolveConfig(**kwargs)


# --------------------------------------------------------------------------
# junction residual


def test_steiner_star_has_zero_residual():
    dirs = [np.array([np.cos(a), np.sin(a)]) for a in (0.0, 2 * np.pi / 3, 4 * np.pi / 3)]
    verts = [Vertex((0.0, 0.0))] + [Vertex(tuple(d)) for d in dirs]
    edges = [FilmEdge(0, k + 1, np.array([[0.0, 0.0], d]), 2) for k, d in enumerate(dirs)]
    assert junction_residual(FilmComplex(EMPTY, tuple(verts), tuple(edges))) < 1e-12


def test_attachment_junction_with_tangent_sheets():
    # two single sheets leave tangentially to the left, the doubled edge goes right
    j = (0.0, 0.0)
    up = np.array([[0.0, 0.0], [-0.5, 0.0], [-1.0, 0.2]])
    down = np.array([[-1.0, -0.2], [-0.5, 0.0], [0.0, 0.0]])
    tail = np.array([[0.0, 0.0], [1.0, 0.0]])
    f = FilmComplex(
        EMPTY,
        (Vertex(j), Vertex((-1.0, 0.2)), Vertex((-1.0, -0.2)), Vertex((1.0, 0.0))),
        (FilmEdge(0, 1, up), FilmEdge(2, 0, down), FilmEdge(0, 3, tail, 2)),
    )
    assert junction_residual(f) < 1e-12


# --------------------------------------------------------------------------
# collapse merge


def tailed_square(half_width):
    """Unit square with a thin tail running from x=1 to a tip at (2, 0)."""
    xs = np.linspace(1.0, 2.0, 41)[1:-1]
    U, T = (0.0, 0.0), (2.0, 0.0)
    lower = np.vstack([[U, (0, -0.5), (1, -0.5), (1, -half_width)],
                       np.column_stack([xs, np.full_like(xs, -half_width)]), [T]])
    upper = np.vstack([[T], np.column_stack([xs[::-1], np.full_like(xs, half_width)]),
                       [(1, half_width), (1, 0.5), (0, 0.5), U]])
    return FilmComplex(EMPTY, (Vertex(U), Vertex(T)), (FilmEdge(0, 1, lower), FilmEdge(1, 0, upper)),
                       (LiquidRegion(((0, True), (1, True))),))


def test_sliver_zips_onto_its_midline():
    d = 0.02
    f = tailed_square(d / 4)
    g = collapse_merge(f, d)
    assert validate(g) == []
    doubled = [e for e in g.edges if e.multiplicity == 2]
    assert len(doubled) == 1
    pts = doubled[0].points
    assert np.abs(pts[:, 1]).max() < 1e-12
    assert pts[:, 0].max() == pytest.approx(2.0) and pts[:, 0].min() < 1.1


def test_merge_distance_zero_is_identity():
    f = tailed_square(0.005)
    assert collapse_merge(f, 0.0) is f


def test_well_separated_lens_untouched():
    f = two_disk_lens(two_disk_frame(), 1e-3)
    assert collapse_merge(f, 1e-4) is f


def test_merge_that_swallows_the_region_refused():
    f = two_disk_lens(two_disk_frame(), 1e-3)
    with pytest.raises(ValueError, match="invalid topology"):
        collapse_merge(f, 1e-2)
    # without strict mode the candidate is skipped and nothing changes
    assert collapse_merge(f, 1e-2, strict=False) == f
