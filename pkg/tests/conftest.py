import numpy as np
import pytest

from piranns.features import FeatureSet
from piranns.mesh import Domain, Partition
from piranns.sampling import SampleDomain


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def unit2():
    return Domain.unit_cube(2)


@pytest.fixture
def grid22(unit2):
    return Partition.uniform(unit2, (2, 2))


def shared_features(dim=2, n=30, m=2.0, seed=0):
    return FeatureSet("shared", domain=SampleDomain(m, dim), n=n, seed=seed)


# one line per acceptance criterion, repeated in the terminal summary
ACCEPTANCE = []


def record_acceptance(number, title, ok, detail):
    line = f"CRITERION {number:2d} {'PASS' if ok else 'FAIL'}  {title}: {detail}"
    ACCEPTANCE.append((number, line))
    return line


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(ACCEPTANCE):
            terminalreporter.write_line(line)
