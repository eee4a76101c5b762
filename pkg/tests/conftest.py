import os

import pytest
from hypothesis import HealthCheck, settings

settings.register_profile(
    "default", max_examples=40, deadline=None,
    suppress_health_check=[HealthCheck.too_slow])
settings.register_profile(
    "thorough", max_examples=400, deadline=None,
    suppress_health_check=[HealthCheck.too_slow])
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))

ACCEPTANCE_LINES: dict[int, str] = {}


@pytest.fixture
def record_criterion():
    """Store one summary line per acceptance criterion for the terminal report."""
    def record(number: int, passed: bool, detail: str, seconds: float) -> None:
        tag = "PASS" if passed else "FAIL"
        ACCEPTANCE_LINES[number] = f"criterion {number:2d}: {tag}  {detail}  [{seconds:.1f} s]"
    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for number in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[number])
