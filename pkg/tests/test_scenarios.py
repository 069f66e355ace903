import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from capfilm.film import Classification, classify, liquid_volume, validate
from capfilm.scenarios import (
    ScenarioError,
    curvature_for_area,
    load_scenario,
    parse_scenario,
    segment_area,
)
from oracles import circular_segment_area

MINIMAL = """\
version = 1
epsilon = 1e-3

[wireframe]
disks = [{ center = [0.0, 0.0], radius = 0.1 }, { center = [1.0, 0.0], radius = 0.1 }]

[topology]
builder = "lens"
"""

EXPLICIT = """\
version = 1
epsilon = 0.01

[wireframe]
disks = [{ center = [0.0, 0.0], radius = 0.1 }, { center = [1.0, 0.0], radius = 0.1 }]

[topology]
vertices = [{ position = [0.1, 0.0], anchor = 0 }, { position = [0.9, 0.0], anchor = 1 }]
edges = [
  { start = 0, end = 1, points = [[0.1, 0.0], [0.5, -0.02], [0.9, 0.0]] },
  { start = 1, end = 0, points = [[0.9, 0.0], [0.5, 0.02], [0.1, 0.0]] },
]
regions = [[[0, true], [1, true]]]
"""

SHIPPED = ["two_disk_lens", "two_disk_large", "three_disk_collapsed", "three_disk_tube", "unit_segment"]


@pytest.mark.parametrize("name", SHIPPED)
def test_shipped_scenarios_load(scenario_dir, name):
    sf = load_scenario(scenario_dir / f"{name}.scenario")
    f = sf.initial()
    assert validate(f) == []
    if f.regions:
        # builders draw arcs as polygons; the solver restores the exact area
        assert liquid_volume(f) == pytest.approx(sf.epsilon, rel=1e-3)


def test_defaults():
    sf = parse_scenario(MINIMAL)
    assert sf.seed == 0
    assert sf.spec.classes == ((1, 0), (0, 1))
    assert classify(sf.initial()) is Classification.NON_COLLAPSED


def test_explicit_topology():
    sf = parse_scenario(EXPLICIT)
    f = sf.initial()
    assert validate(f) == []
    assert liquid_volume(f) == pytest.approx(0.5 * 0.8 * 0.04)
    # an explicit film ignores the requested ε
    assert sf.initial(0.5) is f


@pytest.mark.parametrize(
    "edit,message",
    [
        (lambda t: t.replace("version = 1", "version = 2"), "unsupported version"),
        (lambda t: t + "colour = 'red'\n", "unknown keys"),
        (lambda t: t.replace('builder = "lens"', 'builder = "spiral"'), "unknown builder"),
        (lambda t: t.replace("epsilon = 1e-3", "epsilon = 0.0"), "epsilon must be positive"),
        (lambda t: t.replace("[1.0, 0.0], radius = 0.1", "[0.15, 0.0], radius = 0.1"), "overlap"),
        (lambda t: t + "\n[solver]\nstep = -1.0\n", "step must be positive"),
        (lambda t: t + "\n[solver]\nwarp = 1\n", "unknown keys"),
        (lambda t: t + "\n[spanning]\nclasses = [[0, 0]]\n", "zero winding vector"),
        (lambda t: t.replace("epsilon = 1e-3\n", ""), "missing keys"),
    ],
)
def test_strict_parsing(edit, message):
    with pytest.raises(ScenarioError, match=message):
        parse_scenario(edit(MINIMAL))


@pytest.mark.parametrize(
    "text,line",
    [
        ("version = 1\nepsilon = \n", 2),
        ("version = 1\n[wireframe\n", 2),
        ("version = 1\nepsilon = [1, 2\n", 3),
    ],
)
def test_syntax_errors_carry_line_and_column(text, line):
    with pytest.raises(ScenarioError, match=rf"line {line}, column \d+"):
        parse_scenario(text, "bad.scenario")


# --------------------------------------------------------------------------
# circular segment helpers against the independent formula


@settings(max_examples=60, deadline=None)
@given(st.floats(0.05, 2.0), st.floats(0.01, 0.99))
def test_segment_area_matches_oracle(chord, frac):
    k = frac * 2.0 / chord
    assert segment_area(chord, k) == pytest.approx(circular_segment_area(chord, 1.0 / k), rel=1e-7)


@settings(max_examples=60, deadline=None)
@given(st.floats(0.05, 2.0), st.floats(1e-6, 0.9))
def test_curvature_for_area_inverts(chord, frac):
    area = frac * np.pi * chord**2 / 8.0
    k = curvature_for_area(chord, area)
    assert segment_area(chord, k) == pytest.approx(area, rel=1e-9)


def test_no_minor_arc_beyond_half_disk():
    with pytest.raises(ValueError):
        curvature_for_area(1.0, np.pi / 8.0 * 1.01)
