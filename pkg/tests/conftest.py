import pytest

from geostat.core import GeodesicState, TangentVector
from geostat.models import ModelId, point

# (criterion id, title, passed, detail) rows filled by test_acceptance.py
ACCEPTANCE_RESULTS: list[tuple[int, str, bool, str]] = []

ALL_MODELS = list(ModelId)


def make_state(model, coords, velocity, time=0.0):
    model = ModelId.parse(model)
    return GeodesicState(point(model, *coords), TangentVector(model.value, velocity), time)


def relerr(a, b):
    return abs(a - b) / max(abs(b), 1e-300)


@pytest.fixture
def criterion():
    """Record one acceptance line; the test still asserts on its own."""

    def record(number: int, title: str, passed: bool, detail: str = "") -> bool:
        ACCEPTANCE_RESULTS.append((number, title, bool(passed), detail))
        status = "PASS" if passed else "FAIL"
        print(f"[AC-{number:02d}] {status} {title}: {detail}")
        return bool(passed)

    return record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for number, title, passed, detail in sorted(ACCEPTANCE_RESULTS, key=lambda r: r[0]):
        tr.write_line(f"AC-{number:02d} {'PASS' if passed else 'FAIL'}  {title}  [{detail}]")
    passed = sum(1 for r in ACCEPTANCE_RESULTS if r[2])
    tr.write_line(f"{passed}/{len(ACCEPTANCE_RESULTS)} acceptance checks passed")

