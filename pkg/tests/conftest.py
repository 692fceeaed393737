import sys
from pathlib import Path

import numpy as np
import pytest
from hypothesis import settings

sys.path.insert(0, str(Path(__file__).parent))

from fucik_lab.assembly import assemble  # noqa: E402
from fucik_lab.domain_kernel import Domain, Kernel, Mesh  # noqa: E402
from fucik_lab.fucik_continuation import trace_curve  # noqa: E402
from fucik_lab.spectrum import lowest_eigenpairs  # noqa: E402

settings.register_profile("default", deadline=None, max_examples=30)
settings.load_profile("default")


@pytest.fixture(scope="session")
def unit():
    return Domain.interval(-1.0, 1.0)


@pytest.fixture(scope="session")
def gp128(unit):
    return assemble(Mesh.uniform(unit, 128), Kernel.fractional(0.25))


@pytest.fixture(scope="session")
def gp32(unit):
    return assemble(Mesh.uniform(unit, 32), Kernel.fractional(0.25))


@pytest.fixture(scope="session")
def lumped128(gp128):
    return lowest_eigenpairs(gp128, 2, mass="lumped")


@pytest.fixture(scope="session")
def curve128(gp128):
    return trace_curve(gp128, 5.0, dp=0.1)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split("#")[1].split()[0])):
            terminalreporter.write_line(line)
