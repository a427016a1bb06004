import numpy as np
import pytest

from mlbp.datagen import InstanceSpec, generate_instance


@pytest.fixture
def rng():
    return np.random.default_rng(20181105)


@pytest.fixture(scope="session")
def seeded_instance():
    """The 50 x 70 x 60 two-layer instance with 42/30 nonzeros and SNR 10."""
    return generate_instance(InstanceSpec(seed=7))


@pytest.fixture(scope="session")
def small_instance():
    return generate_instance(InstanceSpec(n=12, m1=16, m2=14, s1=10, s2=8, seed=3))


_ACCEPTANCE_KEY = pytest.StashKey[list]()


@pytest.fixture(scope="session")
def acceptance_log(request):
    """Collects one PASS/FAIL line per acceptance criterion for the terminal summary."""
    return request.config.stash.setdefault(_ACCEPTANCE_KEY, [])


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(_ACCEPTANCE_KEY, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines):
            terminalreporter.write_line(line)
