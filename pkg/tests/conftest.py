import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from cellfree_otfs.channel_model import generate_drop
from cellfree_otfs.config import SystemConfig

settings.register_profile("default", max_examples=50, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture(scope="session")
def desk_cfg():
    return SystemConfig()


@pytest.fixture(scope="session")
def small_desk_cfg():
    return SystemConfig(M_a=10, K_u=4)


def drops(cfg, n, seed=0):
    """Large-scale states for ``n`` independent drops."""
    return [generate_drop(cfg, np.random.SeedSequence([seed, d]))[1] for d in range(n)]


ACCEPTANCE_LINES: list[str] = []


@pytest.fixture(scope="session")
def acceptance_report():
    """Collects one PASS/FAIL line per acceptance criterion for the terminal summary."""
    def record(number: int, passed: bool, detail: str) -> None:
        line = f"criterion {number}: {'PASS' if passed else 'FAIL'} - {detail}"
        ACCEPTANCE_LINES.append(line)
        print(line)
    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
