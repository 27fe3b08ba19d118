import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from hjvisc import DomainGeometry

settings.register_profile(
    "default",
    deadline=None,
    max_examples=40,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("default")


@pytest.fixture
def unit():
    return DomainGeometry(0.0, 1.0)


@pytest.fixture
def rng():
    return np.random.default_rng(7)


def pytest_terminal_summary(terminalreporter):
    from test_acceptance import RESULTS

    if not RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(RESULTS):
        title, outcome = RESULTS[number]
        tag = "PASS" if outcome.passed else "FAIL"
        terminalreporter.write_line(f"{tag} {number:2d}. {title}: {outcome.detail}")
