import numpy as np
import pytest
from hypothesis import settings

from emloc.materials import MaterialField
from emloc.mesh import RegionSpec, build_box_mesh, whole_boundary
from emloc.solver import MaxwellProblem

settings.register_profile("emloc", max_examples=25, deadline=None)
settings.load_profile("emloc")

UNIT = ((0.0, 0.0, 0.0), (1.0, 1.0, 1.0))
FACE_Z0 = RegionSpec((0, 0, 0), (1, 1, 0), kind="boundary")
M_BOX = RegionSpec((0.25, 0.25, 0.0), (0.75, 0.75, 0.25))
D_BOX = RegionSpec((0.55, 0.55, 0.55), (0.95, 0.95, 0.95))
O_BOX = RegionSpec((0.25, 0.25, 0.25), (0.75, 0.75, 0.75))


def vacuum():
    return MaterialField.uniform(), MaterialField.uniform()


def unit_mesh(n):
    return build_box_mesh(UNIT, (n, n, n))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def face_problem3():
    """Vacuum cube, k = 1, control on z = 0, divisions 3."""
    mesh = unit_mesh(3)
    return MaxwellProblem(mesh, *vacuum(), 1.0, gamma=FACE_Z0)


@pytest.fixture(scope="session")
def full_problem3():
    """Vacuum cube, k = 1, control on the whole boundary, divisions 3."""
    mesh = unit_mesh(3)
    return MaxwellProblem(mesh, *vacuum(), 1.0, gamma=whole_boundary(mesh))


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import ACCEPTANCE_LINES
    except ImportError:
        return
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for n in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[n])
