import numpy as np
import pytest

from strongweak.errors import BoundaryLeak, GridMismatch
from strongweak.evolution import PropagatorConfig, kinetic_propagate, propagate, step
from strongweak.state import (CoherentStateSpec, Grid1D, PhysicalParams, Potential,
                              expect_position, inner_product, prepare_coherent_state)

from oracles import free_gaussian


def packet(grid, gamma=1.0, center=0.0, momentum=0.0, params=PhysicalParams()):
    return prepare_coherent_state(CoherentStateSpec(gamma, center, momentum), grid, params)


@pytest.fixture(scope="module")
def grid():
    return Grid1D(-40.0, 40.0, 1024)


class TestConfig:
    def test_validation(self):
        with pytest.raises(ValueError):
            PropagatorConfig(dt=0.0, t_max=1.0)
        with pytest.raises(ValueError):
            PropagatorConfig(dt=0.1, t_max=0.05)
        with pytest.raises(ValueError):
            PropagatorConfig(dt=0.1, t_max=1.0, boundary_density_threshold=1.0)
        with pytest.raises(ValueError):
            PropagatorConfig(dt=0.1, t_max=1.0, record_stride=0)


class TestFreeFlight:
    def test_matches_analytic_spreading_gaussian(self, grid):
        psi0 = packet(grid, gamma=0.5, center=-10.0, momentum=3.0)
        rec = propagate(psi0, Potential.free(grid), PropagatorConfig(1e-2, 4.0, record_stride=100))
        for state in rec:
            exact = free_gaussian(grid.x, state.time, 0.5, -10.0, 3.0)
            assert np.max(np.abs(state.amplitudes - exact)) < 1e-10
            assert expect_position(state) == pytest.approx(-10.0 + 3.0 * state.time, abs=1e-8)

    def test_hbar_and_mass_enter_the_dispersion(self, grid):
        params = PhysicalParams(hbar=0.5, mass=2.0)
        psi0 = packet(grid, gamma=1.0, center=-5.0, momentum=2.0, params=params)
        rec = propagate(psi0, Potential.free(grid), PropagatorConfig(1e-2, 2.0, record_stride=200),
                        params)
        exact = free_gaussian(grid.x, 2.0, 1.0, -5.0, 2.0, hbar=0.5, mass=2.0)
        assert np.max(np.abs(rec.snapshots[-1] - exact)) < 1e-10

    def test_splitting_is_exact_without_potential(self, grid):
        psi = packet(grid, momentum=2.0)
        stepped = psi
        for _ in range(50):
            stepped = step(stepped, Potential.free(grid), PhysicalParams(), 0.02)
        direct = kinetic_propagate(psi, PhysicalParams(), 1.0)
        assert np.max(np.abs(stepped.amplitudes - direct.amplitudes)) < 1e-12
        assert stepped.time == pytest.approx(1.0)

    def test_zero_duration_returns_input(self, grid):
        psi = packet(grid)
        rec = propagate(psi, Potential.free(grid), PropagatorConfig(0.1, 0.0))
        assert len(rec) == 1
        np.testing.assert_array_equal(rec.snapshots[0], psi.amplitudes)


class TestHarmonicRecurrence:
    def test_coherent_state_returns_after_one_period(self):
        g = Grid1D(-20.0, 20.0, 256)
        osc = Potential.from_function(g, lambda x: 0.5 * x ** 2, lambda x: x)
        psi0 = packet(g, gamma=1.0, center=2.0)
        n = 6283
        rec = propagate(psi0, osc, PropagatorConfig(2 * np.pi / n, 2 * np.pi, record_stride=n))
        assert abs(abs(inner_product(psi0, rec.state(-1))) - 1.0) < 1e-6
        assert rec.norm_drift < 1e-10


class TestConservation:
    @pytest.mark.parametrize("kind", ["free", "gaussian_barrier", "eckart"])
    def test_norm_and_energy_over_ten_thousand_steps(self, grid, kind):
        if kind == "free":
            pot = Potential.free(grid)
        else:
            pot = getattr(Potential, kind)(grid, 4.0, 1.0)
        # 10^4 steps carry the packet into the barrier
        psi0 = packet(grid, gamma=0.5, center=-6.0, momentum=2.0)
        rec = propagate(psi0, pot, PropagatorConfig(2.5e-4, 2.5, record_stride=500))
        assert len(rec) == 21
        assert rec.norm_drift < 1e-10
        assert rec.relative_energy_drift < 1e-8

    def test_second_order_convergence(self, grid):
        pot = Potential.gaussian_barrier(grid, 4.0, 1.0)
        psi0 = packet(grid, gamma=0.5, center=-6.0, momentum=2.0)
        t = 2.0

        def final(dt):
            return propagate(psi0, pot, PropagatorConfig(dt, t, record_stride=int(round(t / dt))),
                             monitor_energy=False).snapshots[-1]

        ref = final(0.01 / 8)
        errors = [np.sqrt(np.sum(np.abs(final(dt) - ref) ** 2) * grid.dx) for dt in (0.02, 0.01)]
        assert errors[0] / errors[1] == pytest.approx(4.0, rel=0.1)


class TestBarrier:
    def test_high_barrier_reflects(self, grid):
        # kinetic energy ~2, barrier 20
        pot = Potential.gaussian_barrier(grid, 20.0, 1.0)
        psi0 = packet(grid, gamma=0.5, center=-12.0, momentum=2.0)
        rec = propagate(psi0, pot, PropagatorConfig(1e-3, 10.0, record_stride=10000))
        right = grid.x > 3.0
        assert np.sum(rec.densities[-1][right]) * grid.dx < 1e-3


class TestErrors:
    def test_boundary_leak(self):
        g = Grid1D(-20.0, 20.0, 256)
        psi0 = packet(g, center=5.0, momentum=4.0)
        with pytest.raises(BoundaryLeak) as info:
            propagate(psi0, Potential.free(g), PropagatorConfig(1e-2, 10.0))
        assert 0.0 < info.value.time < 10.0

    def test_grid_mismatch(self, grid):
        with pytest.raises(GridMismatch):
            propagate(packet(grid), Potential.free(Grid1D(-40.0, 40.0, 512)),
                      PropagatorConfig(0.1, 1.0))
