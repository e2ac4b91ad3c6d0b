import numpy as np
import pytest

from helfrich_disc import mesh, surfaces

ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture
def report():
    """Record one pass/fail line per acceptance criterion and assert it."""

    def _report(label, passed, detail=""):
        line = f"{'PASS' if passed else 'FAIL'}  {label}  {detail}"
        ACCEPTANCE_LINES.append(line)
        print(line)
        assert passed, line

    return _report


@pytest.fixture
def unit_square_pair():
    """Unit square split along its rising diagonal."""
    v = np.array([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]])
    return mesh.build_triangulation(v, [[0, 1, 2], [0, 2, 3]], mesh.rectangle())


@pytest.fixture
def paraboloid():
    return surfaces.get("paraboloid")
