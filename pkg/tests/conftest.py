import pytest

from cahnlayer.geodesic import GeodesicTable
from cahnlayer.geometry import BoundaryGeometry, circle
from cahnlayer.potential import quartic

# lines recorded by the acceptance suite, echoed at the end of the run
ACCEPTANCE_LINES: list[str] = []


@pytest.fixture(scope="session")
def spec():
    return quartic()


@pytest.fixture(scope="session")
def table(spec):
    return GeodesicTable(spec)


@pytest.fixture(scope="session")
def disk():
    return BoundaryGeometry(circle(1.0))


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
