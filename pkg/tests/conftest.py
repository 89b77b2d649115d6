import numpy as np
import pytest

from csi_supcon.channel_sim import default_scenario, generate_dataset, sample_positions


@pytest.fixture(scope="session")
def small_db():
    """300 samples from a 3x3-element, 16-subcarrier scenario."""
    sc = default_scenario(rng_seed=11, rows=3, cols=3, num_subcarriers=16)
    return generate_dataset(sc, sample_positions(300, seed=11))


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


_ACCEPTANCE = []


def pytest_runtest_logreport(report):
    if report.when == "call":
        for key, line in report.user_properties:
            if key == "acceptance":
                _ACCEPTANCE.append(("PASS" if report.passed else "FAIL", line))


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for status, line in _ACCEPTANCE:
            terminalreporter.write_line(f"[{status}] {line}")
