import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from bundle_extra import least_squares_instance, make_pair, metropolis_weights, random_connected_graph

settings.register_profile("default", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture(scope="session")
def small_instance():
    """Ten agents in five dimensions on a random connected graph."""
    g = random_connected_graph(10, 15, 3)
    pair = make_pair(metropolis_weights(g), g)
    prob = least_squares_instance(10, 5, 3, 3)
    return g, pair, prob


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


_ACCEPTANCE = pytest.StashKey[dict]()


@pytest.fixture(scope="session")
def acceptance(request):
    """Record one pass/fail line per acceptance criterion for the terminal summary."""
    lines = request.config.stash.setdefault(_ACCEPTANCE, {})

    def record(number, title, ok, detail=""):
        status = "PASS" if ok else "FAIL"
        lines[number] = f"criterion {number:>2} {status}  {title}" + (f"  [{detail}]" if detail else "")
        print(lines[number])
        return ok

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(_ACCEPTANCE, {})
    if lines:
        terminalreporter.section("acceptance criteria")
        for number in sorted(lines):
            terminalreporter.write_line(lines[number])
