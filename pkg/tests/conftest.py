import time

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from strongweak.evolution import PropagatorConfig, propagate
from strongweak.state import CoherentStateSpec, Grid1D, PhysicalParams, Potential, prepare_coherent_state

settings.register_profile("default", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

# scattering setup shared by the time-of-flight and trajectory tests
PACKET = dict(gamma=0.25, center=-30.0, momentum=5.0)
WIDE_GRID = (-200.0, 200.0, 4096)
BARRIER = dict(height=10.0, width=1.0, center=0.0)
# wall-clock seconds spent building each shared record
BUILD_SECONDS = {}


def _timed(name, fn):
    start = time.perf_counter()
    out = fn()
    BUILD_SECONDS[name] = time.perf_counter() - start
    return out


def pytest_configure(config):
    config.acceptance_lines = []


def pytest_terminal_summary(terminalreporter, config):
    if config.acceptance_lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(config.acceptance_lines):
            terminalreporter.write_line(line)


@pytest.fixture
def verdict(request):
    """Record one ``PASS``/``FAIL`` line for an acceptance criterion."""
    def record(number, title, passed, detail):
        line = f"criterion {number} {'PASS' if passed else 'FAIL'}  {title}: {detail}"
        request.config.acceptance_lines.append(line)
        print(line)
        return passed
    return record


@pytest.fixture(scope="session")
def params():
    return PhysicalParams()


@pytest.fixture(scope="session")
def small_grid():
    return Grid1D(-20.0, 20.0, 256)


@pytest.fixture(scope="session")
def wide_grid():
    return Grid1D(*WIDE_GRID)


def _packet(grid):
    return prepare_coherent_state(CoherentStateSpec(**PACKET), grid, PhysicalParams())


@pytest.fixture(scope="session")
def free_record(wide_grid):
    """Free flight past detectors at 30 and 40 (recorded every 0.02)."""
    cfg = PropagatorConfig(dt=1e-3, t_max=30.0, record_stride=20)
    return _timed("free", lambda: propagate(_packet(wide_grid), Potential.free(wide_grid), cfg))


@pytest.fixture(scope="session")
def barrier_record(wide_grid):
    """Scattering off a barrier of twice the mean kinetic energy, long enough to close tails."""
    pot = Potential.gaussian_barrier(wide_grid, **BARRIER)
    cfg = PropagatorConfig(dt=2.5e-4, t_max=30.0, record_stride=80)
    return _timed("barrier", lambda: propagate(_packet(wide_grid), pot, cfg))


@pytest.fixture(scope="session")
def bohmian_record(wide_grid):
    """Barrier collision recorded densely (every 5e-3) for time derivatives and trajectories."""
    pot = Potential.gaussian_barrier(wide_grid, **BARRIER)
    cfg = PropagatorConfig(dt=2.5e-4, t_max=10.0, record_stride=20)
    return _timed("bohmian", lambda: propagate(_packet(wide_grid), pot, cfg))


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)
