import numpy as np
import pytest

from c0ipm.material import MaterialParameters, build_material_tensors
from c0ipm.problems import CONVERGENCE_MATERIAL


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def coupled_2d():
    return build_material_tensors(CONVERGENCE_MATERIAL, 2)


@pytest.fixture
def elastic_unit():
    return build_material_tensors(MaterialParameters(E=1.0, nu=0.0), 2)


_CRITERIA = {}


@pytest.fixture
def criterion():
    """Record ``(number, ok, detail)``; a summary line per criterion is printed at the end."""

    def record(number, ok, detail):
        prev = _CRITERIA.get(number)
        ok = bool(ok) and (prev is None or prev[0])
        details = (prev[1] + "; " if prev else "") + detail
        _CRITERIA[number] = (ok, details)
        print(f"{'PASS' if ok else 'FAIL'} criterion {number}: {detail}")
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_CRITERIA):
        ok, details = _CRITERIA[number]
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'} criterion {number}: {details}")
