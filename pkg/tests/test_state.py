import numpy as np
import pytest
from hypothesis import given, strategies as st

from strongweak.errors import ContainmentError, GridError, GridMismatch
from strongweak.state import (CoherentStateSpec, Grid1D, PhysicalParams, Potential, Wavefunction,
                              apply_momentum, expect_momentum, fourier_interpolate, inner_product,
                              is_hermitian, prepare_coherent_state, spectral_derivative)

QUARTER_ROOT_INV_PI = 0.751125544464942482858703004776


@pytest.fixture(scope="module")
def grid():
    return Grid1D(-20.0, 20.0, 1024)


def coherent(grid, gamma=1.0, center=0.0, momentum=0.0, params=PhysicalParams()):
    return prepare_coherent_state(CoherentStateSpec(gamma, center, momentum), grid, params)


class TestGrid:
    def test_spacing_and_nodes(self):
        g = Grid1D(-1.0, 1.0, 16)
        assert g.dx == pytest.approx(0.125)
        assert g.x[0] == -1.0 and g.x[-1] == pytest.approx(0.875)

    @pytest.mark.parametrize("n", [8, 100, 1000])
    def test_rejects_bad_point_counts(self, n):
        with pytest.raises(GridError):
            Grid1D(0.0, 1.0, n)

    def test_rejects_empty_interval(self):
        with pytest.raises(GridError):
            Grid1D(1.0, 1.0, 32)

    def test_index_of_rounds_to_nearest(self):
        g = Grid1D(0.0, 16.0, 16)
        assert g.index_of(3.4) == 3
        assert g.index_of(3.6) == 4
        with pytest.raises(GridError):
            g.index_of(16.0)

    def test_physical_params_positive(self):
        with pytest.raises(ValueError):
            PhysicalParams(hbar=0.0)
        with pytest.raises(ValueError):
            PhysicalParams(mass=-1.0)


class TestCoherentState:
    def test_peak_amplitude(self, grid):
        psi = coherent(grid)
        i = grid.index_of(0.0)
        assert psi.amplitudes[i] == pytest.approx(QUARTER_ROOT_INV_PI, abs=1e-15)

    def test_momentum_only_changes_phase(self, grid):
        a = coherent(grid, momentum=0.0)
        b = coherent(grid, momentum=5.0)
        np.testing.assert_allclose(np.abs(b.amplitudes), np.abs(a.amplitudes), rtol=0, atol=1e-15)

    def test_norm_on_grid(self, grid):
        psi = coherent(grid, gamma=2.0, center=-5.0, momentum=3.0)
        assert abs(psi.norm2() - 1.0) < 1e-10

    def test_containment(self, grid):
        # width 1/sqrt(2*0.01) ~ 7, six widths do not fit before x = -20
        with pytest.raises(ContainmentError):
            coherent(grid, gamma=0.01, center=-5.0)

    def test_unresolved_momentum(self):
        g = Grid1D(-20.0, 20.0, 64)  # Nyquist momentum ~5
        with pytest.raises(ContainmentError):
            coherent(g, momentum=4.0)

    @given(gamma=st.floats(0.3, 4.0), center=st.floats(-8.0, 8.0), momentum=st.floats(-10.0, 10.0))
    def test_normalised_for_random_specs(self, grid, gamma, center, momentum):
        psi = coherent(grid, gamma, center, momentum)
        assert abs(inner_product(psi, psi) - 1.0) < 1e-10


class TestInnerProduct:
    def test_distant_states_are_orthogonal(self, grid):
        a = coherent(grid, center=-10.0)
        b = coherent(grid, center=10.0)
        # exact overlap exp(-100)
        assert abs(inner_product(a, b)) < 1e-20

    def test_antilinear_in_bra(self, grid):
        psi = coherent(grid, gamma=1.5, center=1.0, momentum=2.0)
        bra = psi.replace(1j * psi.amplitudes)
        assert inner_product(bra, psi) == pytest.approx(-1j * psi.norm2(), abs=1e-14)

    def test_conjugate_symmetry(self, grid):
        a = coherent(grid, center=-1.0, momentum=1.0)
        b = coherent(grid, gamma=2.0, center=0.5, momentum=-2.0)
        assert inner_product(a, b) == pytest.approx(np.conj(inner_product(b, a)), abs=1e-15)

    def test_grid_mismatch(self, grid):
        a = coherent(grid)
        b = coherent(Grid1D(-20.0, 20.0, 512))
        with pytest.raises(GridMismatch):
            inner_product(a, b)

    def test_wrong_length_amplitudes(self, grid):
        with pytest.raises(GridError):
            Wavefunction(grid, np.zeros(10))


class TestMomentum:
    def test_windowed_plane_wave_is_eigenfunction(self, grid):
        k0 = 2 * np.pi * 20 / grid.length  # a grid harmonic
        window = np.exp(-(grid.x / 12.0) ** 20)
        psi = Wavefunction(grid, window * np.exp(1j * k0 * grid.x))
        p = apply_momentum(psi).amplitudes
        inside = np.abs(grid.x) < 4.0
        rel = np.abs(p[inside] - k0 * psi.amplitudes[inside]) / np.abs(psi.amplitudes[inside])
        assert np.max(rel) < 1e-8

    def test_coherent_state_ratio(self, grid):
        psi = coherent(grid)
        p = apply_momentum(psi).amplitudes
        inside = np.abs(grid.x) < 5.0
        np.testing.assert_allclose(p[inside] / psi.amplitudes[inside], 1j * grid.x[inside],
                                   rtol=0, atol=1e-9)

    def test_real_symmetric_state_has_zero_mean_momentum(self, grid):
        psi = coherent(grid, gamma=0.7)
        assert abs(expect_momentum(psi)) < 1e-12

    def test_hbar_scales_momentum(self, grid):
        psi = coherent(grid, momentum=2.0, params=PhysicalParams(hbar=0.5))
        assert expect_momentum(psi, PhysicalParams(hbar=0.5)) == pytest.approx(2.0, abs=1e-10)

    @given(y1=st.floats(-5, 5), y2=st.floats(-5, 5), p1=st.floats(-4, 4), p2=st.floats(-4, 4))
    def test_hermitian_on_contained_states(self, grid, y1, y2, p1, p2):
        a = coherent(grid, 1.0, y1, p1)
        b = coherent(grid, 1.5, y2, p2)
        lhs = inner_product(a, apply_momentum(b))
        rhs = np.conj(inner_product(b, apply_momentum(a)))
        assert abs(lhs - rhs) < 1e-10

    @given(seed=st.integers(0, 2 ** 31))
    def test_parseval(self, grid, seed):
        rng = np.random.default_rng(seed)
        psi = rng.normal(size=grid.n_points) + 1j * rng.normal(size=grid.n_points)
        direct = np.sum(np.abs(psi) ** 2) * grid.dx
        spectral = np.sum(np.abs(np.fft.fft(psi)) ** 2) * grid.dx / grid.n_points
        assert abs(direct - spectral) < 1e-12 * direct


class TestSpectralTools:
    def test_derivative_of_real_field_is_real(self, grid):
        f = np.exp(-grid.x ** 2)
        d = spectral_derivative(f, grid)
        assert np.isrealobj(d)
        np.testing.assert_allclose(d, -2 * grid.x * f, atol=1e-12)

    def test_second_derivative(self, grid):
        f = np.exp(-grid.x ** 2)
        np.testing.assert_allclose(spectral_derivative(f, grid, 2), (4 * grid.x ** 2 - 2) * f,
                                   atol=1e-11)

    def test_interpolation_reproduces_nodes_and_band_limited_values(self, grid):
        f = np.exp(-0.5 * (grid.x - 0.3) ** 2)
        np.testing.assert_allclose(fourier_interpolate(f, grid, grid.x[::97]), f[::97], atol=1e-13)
        x = np.array([0.01234, 1.5 + grid.dx / 3])
        np.testing.assert_allclose(fourier_interpolate(f, grid, x), np.exp(-0.5 * (x - 0.3) ** 2),
                                   atol=1e-13)


class TestPotential:
    def test_barrier_is_asymptotically_constant(self, grid):
        assert Potential.gaussian_barrier(grid, 10.0, 1.0).is_asymptotically_constant()
        assert Potential.eckart(grid, 3.0, 1.0).is_asymptotically_constant()

    def test_linear_ramp_is_not(self, grid):
        assert not Potential.from_function(grid, lambda x: 0.1 * x).is_asymptotically_constant()

    def test_analytic_derivative_matches_spectral(self, grid):
        pot = Potential.gaussian_barrier(grid, 10.0, 1.0, center=2.0)
        np.testing.assert_allclose(pot.derivative_values, spectral_derivative(pot.values, grid),
                                   atol=1e-9)

    def test_rejects_non_finite(self, grid):
        v = np.zeros(grid.n_points)
        v[3] = np.inf
        with pytest.raises(ValueError):
            Potential.custom_table(grid, v)

    def test_hermiticity_flag(self):
        a = np.array([[1.0, 2 - 1j], [2 + 1j, 0.0]])
        assert is_hermitian(a)
        assert not is_hermitian(a + 1e-9 * np.eye(2) * 1j)
