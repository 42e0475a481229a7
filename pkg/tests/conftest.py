import numpy as np
import pytest

from plastopt.fixtures import regression_design, regression_problem
from plastopt.material import MaterialLaw


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def unit_law():
    # mu = h = d = 1 everywhere, lambda = 1
    return MaterialLaw(1, 1, 1, 1, 1, 1, 1, 1, 1, 1)


@pytest.fixture
def ersatz():
    return MaterialLaw.ersatz()


@pytest.fixture(scope="module")
def small_problem():
    pb = regression_problem(nx=4, ny=4, k=3)
    return pb, regression_design(pb.mesh)


_CRITERIA = {}


def pytest_runtest_logreport(report):
    if report.when != "call" and not (report.when == "setup" and report.failed):
        return
    props = dict(report.user_properties)
    if "criterion" in props:
        _CRITERIA[props["criterion"]] = (report.passed, props.get("detail", ""))


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_CRITERIA):
        ok, detail = _CRITERIA[n]
        terminalreporter.write_line(f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
