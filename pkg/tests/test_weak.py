import numpy as np
import pytest
from hypothesis import given, strategies as st

from strongweak.errors import DimensionMismatch, NodeError, NodeInInterval, OrthogonalSelection
from strongweak.state import (CoherentStateSpec, Grid1D, PhysicalParams, Wavefunction,
                              expect_momentum, inner_product, is_hermitian, prepare_coherent_state)
from strongweak.weak import (FiniteState, PositionPoint, build_triple, momentum_matrix,
                             momentum_weak_field, momentum_weak_value_grid, node_free_interval,
                             node_mask, reconstruct_wavefunction, weak_value_exact,
                             weak_value_from_strong)

from oracles import two_level_ratio, weak_value_mp

SIGMA_Z = np.diag([1.0, -1.0])
# (cos(pi/6) - sin(pi/6)) / (cos(pi/6) + sin(pi/6)) = 2 - sqrt(3)
SIGMA_Z_THETA_PI_3 = 0.267949192431122706472553658494163
# tan(pi/4 - 0.1)
SIGMA_Z_PHI_0_1 = 0.817628809432520206471074505202


def random_unit(rng, dim):
    v = rng.normal(size=dim) + 1j * rng.normal(size=dim)
    return v / np.linalg.norm(v)


def random_instance(seed, dim, hermitian):
    rng = np.random.default_rng(seed)
    a = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    if hermitian:
        a = a + a.conj().T
    psi = random_unit(rng, dim)
    phi = random_unit(rng, dim)
    while abs(np.vdot(phi, psi)) <= 1e-3:
        phi = random_unit(rng, dim)
    return a, psi, phi


instances = st.builds(random_instance, st.integers(0, 2 ** 32 - 1), st.integers(2, 8), st.booleans())


class TestTriple:
    @given(instances)
    def test_all_three_hermitian_and_projector(self, inst):
        a, _, phi = inst
        t = build_triple(a, FiniteState(phi))
        for m in (t.density, t.flux, t.commutator):
            assert is_hermitian(m, 1e-12)
        assert np.max(np.abs(t.density @ t.density - t.density)) < 1e-12

    def test_sigma_x_against_up(self):
        sx = np.array([[0, 1], [1, 0]], dtype=complex)
        t = build_triple(sx, FiniteState([1, 0]))
        np.testing.assert_allclose(t.density, [[1, 0], [0, 0]])
        np.testing.assert_allclose(t.flux, [[0, 0.5], [0.5, 0]])
        np.testing.assert_allclose(t.commutator, [[0, -0.5j], [0.5j, 0]])

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionMismatch):
            build_triple(np.eye(3), FiniteState([1, 0]))

    def test_unnormalised_post_selection_rejected(self):
        with pytest.raises(ValueError):
            FiniteState([1.0, 1.0])


class TestWeakValueExact:
    def test_expectation_when_post_equals_pre(self, rng):
        a = rng.normal(size=(4, 4))
        psi = random_unit(rng, 4)
        expected = np.vdot(psi, a @ psi)
        assert weak_value_exact(a, psi, FiniteState(psi)).value == pytest.approx(expected, abs=1e-14)

    def test_identity(self, rng):
        psi, phi = random_unit(rng, 5), random_unit(rng, 5)
        assert weak_value_exact(np.eye(5), psi, FiniteState(phi)).value == 1.0

    def test_sigma_z_two_level(self):
        theta = np.pi / 3
        psi = [np.cos(theta / 2), np.sin(theta / 2)]
        w = weak_value_exact(SIGMA_Z, psi, FiniteState.normalized([1, 1])).value
        assert w == pytest.approx(SIGMA_Z_THETA_PI_3, abs=1e-15)
        assert SIGMA_Z_THETA_PI_3 == pytest.approx(two_level_ratio(*psi), abs=1e-15)

    def test_orthogonal_selection(self):
        with pytest.raises(OrthogonalSelection):
            weak_value_exact(SIGMA_Z, [1, 0], FiniteState([0, 1]))

    def test_overlap_threshold_is_adjustable(self):
        psi = np.array([1.0, 1e-6])
        psi /= np.linalg.norm(psi)
        weak_value_exact(SIGMA_Z, psi, FiniteState([0, 1]))
        with pytest.raises(OrthogonalSelection):
            weak_value_exact(SIGMA_Z, psi, FiniteState([0, 1]), eps_overlap=1e-5)

    def test_anomalous_value_outside_spectrum(self):
        eps = 0.01
        psi = np.array([np.cos(np.pi / 4 + eps), np.sin(np.pi / 4 + eps)])
        w = weak_value_exact(SIGMA_Z, psi, FiniteState.normalized([1, -1])).value
        assert abs(w.real) > 1.0


class TestWeakValueFromStrong:
    def test_hermitian_expectation_is_real(self, rng):
        a = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
        a = a + a.conj().T
        psi = random_unit(rng, 4)
        assert abs(weak_value_from_strong(a, psi, FiniteState(psi)).im_channel) < 1e-12

    def test_real_vectors_give_real_value(self):
        phi = 0.1
        w = weak_value_from_strong(SIGMA_Z, FiniteState.normalized([1, 1]).vector,
                                   FiniteState([np.cos(phi), np.sin(phi)]))
        assert w.re_channel == pytest.approx(SIGMA_Z_PHI_0_1, abs=1e-14)
        assert w.im_channel == 0.0

    def test_random_five_by_five_against_mpmath(self):
        a, psi, phi = random_instance(5, 5, hermitian=False)
        w = weak_value_from_strong(a, psi, FiniteState(phi))
        ref = weak_value_mp(a, psi, phi)
        assert abs(w.re_channel - ref.real) < 1e-12
        assert abs(w.im_channel - ref.imag) < 1e-12

    @given(instances)
    def test_ratio_identity(self, inst):
        a, psi, phi = inst
        direct = weak_value_exact(a, psi, FiniteState(phi)).value
        strong = weak_value_from_strong(a, psi, FiniteState(phi))
        assert abs(strong.re_channel - direct.real) < 1e-12
        assert abs(strong.im_channel - direct.imag) < 1e-12

    @given(instances)
    def test_denominator_is_post_selection_probability(self, inst):
        a, psi, phi = inst
        w = weak_value_from_strong(a, psi, FiniteState(phi))
        assert w.denominator == pytest.approx(abs(np.vdot(phi, psi)) ** 2, abs=1e-14)


@pytest.fixture(scope="module")
def grid():
    return Grid1D(-20.0, 20.0, 512)


def coherent(grid, gamma=1.0, center=0.0, momentum=0.0):
    return prepare_coherent_state(CoherentStateSpec(gamma, center, momentum), grid)


class TestMomentumOnGrid:
    def test_coherent_state_channels(self, grid):
        psi = coherent(grid, 1.3, 1.0, 2.5)
        for x in (-2.0, 0.0, 1.0, 3.5):
            w = momentum_weak_value_grid(psi, x)
            xn = PositionPoint(x, grid).x_node
            assert w.re_channel == pytest.approx(2.5, abs=1e-10)
            assert w.im_channel == pytest.approx(1.3 * (xn - 1.0), abs=1e-10)
            assert w.consistency < 1e-10

    def test_real_state_has_zero_real_part(self, grid):
        _, re, _, mask = momentum_weak_field(coherent(grid, 0.8))
        assert np.max(np.abs(re[~mask])) < 1e-10

    def test_zero_imaginary_part_at_density_peak(self, grid):
        assert abs(momentum_weak_value_grid(coherent(grid, center=1.25), 1.25).im_channel) < 1e-12

    def test_node_raises(self, grid):
        psi = Wavefunction(grid, coherent(grid).amplitudes * grid.x)
        with pytest.raises(NodeError):
            momentum_weak_value_grid(psi, 0.0)

    def test_far_tail_is_masked(self, grid):
        psi = coherent(grid, gamma=2.0, center=-5.0)
        with pytest.raises(NodeError):
            momentum_weak_value_grid(psi, 15.0)

    def test_sum_rule(self, grid):
        psi = coherent(grid, 0.7, -1.0, 1.7)
        _, re, _, mask = momentum_weak_field(psi)
        weighted = np.sum((psi.density * re)[~mask]) * grid.dx
        assert abs(weighted - expect_momentum(psi)) < 1e-10

    @pytest.mark.parametrize("n", [32, 64])
    def test_embedding_as_matrix_problem(self, n):
        g = Grid1D(-6.0, 6.0, n)
        psi = prepare_coherent_state(CoherentStateSpec(1.0, -0.5, 0.8), g)
        _, re, im, _ = momentum_weak_field(psi)
        p = momentum_matrix(g)
        unit = psi.amplitudes / np.sqrt(np.sum(psi.density))
        # deep in the tails both routes divide roundoff by a vanishing amplitude
        bulk = psi.density > 1e-6 * psi.density.max()
        for i in np.flatnonzero(bulk):
            w = weak_value_from_strong(p, unit, PositionPoint(g.x[i], g))
            assert abs(w.re_channel - re[i]) < 1e-10
            assert abs(w.im_channel - im[i]) < 1e-10

    def test_momentum_matrix_is_hermitian(self):
        assert is_hermitian(momentum_matrix(Grid1D(-4.0, 4.0, 32)), 1e-12)


class TestReconstruction:
    def test_coherent_round_trip(self, grid):
        psi = coherent(grid, 1.2, 0.5, -1.5)
        _, re, im, mask = momentum_weak_field(psi)
        anchor = grid.index_of(0.5)
        rec = reconstruct_wavefunction(re, im, anchor, grid, interval=node_free_interval(mask, anchor))
        assert abs(inner_product(rec, psi)) > 1 - 1e-8

    def test_zero_fields_give_uniform_state(self, grid):
        z = np.zeros(grid.n_points)
        rec = reconstruct_wavefunction(z, z, 10, grid)
        np.testing.assert_allclose(rec.amplitudes, 1 / np.sqrt(grid.length), rtol=1e-13)

    def test_non_unit_hbar(self, grid):
        params = PhysicalParams(hbar=0.3)
        psi = prepare_coherent_state(CoherentStateSpec(1.0, 0.0, 0.6), grid, params)
        _, re, im, mask = momentum_weak_field(psi, params)
        anchor = grid.index_of(0.0)
        rec = reconstruct_wavefunction(re, im, anchor, grid, params, node_free_interval(mask, anchor))
        assert abs(inner_product(rec, psi)) > 1 - 1e-8

    def test_transmitted_region_of_scattered_state(self, barrier_record):
        state = barrier_record.state(-1)
        g = state.grid
        _, re, im, mask = momentum_weak_field(state)
        right = g.x > 20.0
        peak = np.flatnonzero(right)[np.argmax(state.density[right])]
        interval = node_free_interval(mask | ~right, peak)
        rec = reconstruct_wavefunction(re, im, peak, g, interval=interval)
        window = np.zeros(g.n_points)
        window[interval[0]:interval[1] + 1] = 1.0
        target = state.replace(state.amplitudes * window).normalized()
        assert abs(inner_product(rec, target)) > 1 - 1e-6

    def test_node_inside_interval(self, grid):
        re = np.zeros(grid.n_points)
        im = np.zeros(grid.n_points)
        im[100] = np.nan
        with pytest.raises(NodeInInterval):
            reconstruct_wavefunction(re, im, 50, grid)

    def test_node_free_interval_and_mask(self):
        rho = np.array([0.0, 1.0, 1.0, 0.0, 1.0, 1.0, 1.0, 0.0])
        mask = node_mask(rho, 1e-3)
        assert node_free_interval(mask, 5) == (4, 6)
        with pytest.raises(NodeInInterval):
            node_free_interval(mask, 3)
