import numpy as np
import pytest

from corrolab.experiments import default_setup
from corrolab.geometry import BoundaryProfile, build_domain
from corrolab.mesh import generate_mesh
from corrolab.solver import TimeGrid, solve_forward

R0 = 0.1
LEVELS = (4, 8, 16)

_criteria = []


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for number, ok, text in sorted(_criteria, key=lambda c: c[0]):
        terminalreporter.write_line(f"criterion {number}: {'PASS' if ok else 'FAIL'}  {text}")


@pytest.fixture
def criterion():
    """Record one pass/fail line for the acceptance summary, then assert."""

    def record(number, ok, text):
        ok = bool(ok)
        _criteria.append((number, ok, text))
        print(f"criterion {number}: {'PASS' if ok else 'FAIL'}  {text}")
        assert ok, f"criterion {number}: {text}"

    return record


@pytest.fixture(scope="session")
def flat_domain():
    return build_domain(BoundaryProfile.flat(1.0, R0, 1.0), 1.0, 1.0, (R0, 1.0, 120.0))


@pytest.fixture(scope="session")
def setup():
    return default_setup()


class Ladder:
    """Flux-pair solves of the default problem on meshes h = r0/k, dt = h, computed on demand."""

    def __init__(self, setup):
        self.setup = setup
        self._cache = {}

    def __getitem__(self, k):
        if k not in self._cache:
            h = R0 / k
            mesh = generate_mesh(self.setup.domain, h)
            grid = TimeGrid(self.setup.T, int(round(self.setup.T / h)))
            u = solve_forward(mesh, self.setup.gamma, self.setup.g, grid)
            ut = solve_forward(mesh, self.setup.gamma, self.setup.gt, grid)
            self._cache[k] = (mesh, u, ut)
        return self._cache[k]


@pytest.fixture(scope="session")
def ladder(setup):
    return Ladder(setup)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)
