import time

import pytest

from refgames.geometry import affine_transform, resolve_domain
from refgames.solution import PROBE_SCALE, PROBE_SHIFT, evolve_tracked, ref_solution
from refgames.measure import GridMeasure
from refgames.tree import AssignmentModel, GameSpec, simulate

ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def triangle():
    return resolve_domain("triangle")


@pytest.fixture(scope="session")
def segment():
    return resolve_domain("segment")


@pytest.fixture(scope="session")
def ref_triangle(triangle):
    return ref_solution(triangle)


@pytest.fixture(scope="session")
def ref_triangle_image(triangle):
    return ref_solution(affine_transform(triangle, PROBE_SCALE, PROBE_SHIFT))


@pytest.fixture(scope="session")
def random_triangle_run(triangle):
    """Random schedule on the triangle at 512 cells: (track, measure) after 200 levels."""
    return evolve_tracked(GridMeasure.from_domain(triangle, 512), AssignmentModel.random(), 200)


@pytest.fixture(scope="session")
def alternating_d20(segment):
    spec = GameSpec(segment, AssignmentModel.alternating(), 20)
    t0 = time.perf_counter()
    samples = simulate(spec, 100_000, seed=1, threads=1)
    return samples, time.perf_counter() - t0


@pytest.fixture(scope="session")
def random_d15(segment):
    return simulate(GameSpec(segment, AssignmentModel.random(), 15), 100_000, seed=7)
