import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from capfilm import Scenario, SolveConfig, SpanningSpec, minimize  # noqa: E402
from capfilm.scenarios import (  # noqa: E402
    three_disk_collapsed,
    three_disk_frame,
    two_disk_frame,
    two_disk_lens,
)

SCENARIO_DIR = Path(__file__).parent.parent / "scenarios"

# one line per acceptance criterion, shown at the end of the run
ACCEPTANCE_LINES: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[k])


@pytest.fixture(scope="session")
def scenario_dir():
    return SCENARIO_DIR


@pytest.fixture(scope="session")
def lens_solution():
    w = two_disk_frame()
    s = Scenario(w, SpanningSpec.single_disks(2), 1e-3, two_disk_lens(w, 1e-3), SolveConfig())
    return minimize(s)


@pytest.fixture(scope="session")
def large_lens_solution():
    w = two_disk_frame()
    s = Scenario(w, SpanningSpec.single_disks(2), 0.5, two_disk_lens(w, 0.5), SolveConfig())
    return minimize(s)


@pytest.fixture(scope="session")
def collapsed_solution():
    w = three_disk_frame()
    cfg = SolveConfig(resample_target_edge_length=0.005)
    s = Scenario(w, SpanningSpec.single_disks(3), 1e-3, three_disk_collapsed(w, 1e-3), cfg)
    return minimize(s)
