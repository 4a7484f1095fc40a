import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile("voidfill", deadline=None, max_examples=40, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("voidfill")

_ACCEPTANCE: dict[str, str] = {}


@pytest.fixture
def record_acceptance():
    """Record one human-readable pass/fail line per acceptance criterion."""

    def record(criterion: str, passed: bool, detail: str) -> None:
        line = f"{criterion} {'PASS' if passed else 'FAIL'}  {detail}"
        _ACCEPTANCE[criterion] = line
        print(line)

    return record


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(_ACCEPTANCE, key=lambda k: int(k[1:])):
        terminalreporter.write_line(_ACCEPTANCE[key])


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)
