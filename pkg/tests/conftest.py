import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from nutaxis.grid import Field, Grid2D
from nutaxis.model import State

settings.register_profile("default", deadline=None, max_examples=40,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


def random_state(rng, nx=12, ny=9, lx=1.0, ly=1.3, vacuum=True, vmin=0.05):
    g = Grid2D(nx, ny, lx, ly)
    u = rng.uniform(0.0, 2.0, g.shape)
    if vacuum:
        u[rng.uniform(size=g.shape) < 0.3] = 0.0
    v = rng.uniform(vmin, 1.5, g.shape)
    return State(Field(g, u), Field(g, v), 0.0)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE = pytest.StashKey[dict]()


@pytest.fixture
def verdict(request):
    """Record one pass/fail line per acceptance criterion."""
    lines = request.config.stash.setdefault(ACCEPTANCE, {})

    def note(name, ok, detail=""):
        lines[name] = f"{name} {'pass' if ok else 'fail'} {detail}".rstrip()
        print(lines[name])
        return ok
    return note


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(ACCEPTANCE, {})
    if lines:
        terminalreporter.section("acceptance criteria")
        for name in sorted(lines):
            terminalreporter.write_line(lines[name])
