"""Bohmian reading of the momentum weak value.

Writing ``psi = sqrt(r) exp(iS/hbar)``, the phase gradient ``p_B = S'`` is
the real part of the momentum weak value and the osmotic momentum
``p_O = -(hbar/2) r'/r`` its imaginary part.  This module builds those
fields, the quantum potential, Bohmian trajectories through a propagated
record, and the balance laws they obey.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import kernels
from .errors import NodeApproach, NodeError
from .evolution import EvolutionRecord
from .state import (Grid1D, PhysicalParams, Potential, Wavefunction, derivatives,
                    kinetic_energy, spectral_derivative, total_energy)
from .weak import EPS_NODE, node_mask

__all__ = [
    "PolarField", "QuantumPotentialField", "BohmianTrajectory", "EnergyPartition",
    "RateComparison", "polar_decompose", "polar_series", "bohmian_momentum_field",
    "osmotic_momentum_field", "quantum_potential", "velocity_fields",
    "integrate_trajectory", "integrate_ensemble", "fixed_point_momentum_rate",
    "material_momentum_rate", "ehrenfest_check", "energy_partition",
    "hamilton_jacobi_residual", "continuity_residual",
]


@dataclass(frozen=True, eq=False)
class PolarField:
    grid: Grid1D
    r: np.ndarray
    S: np.ndarray
    node_mask: np.ndarray
    amplitudes: np.ndarray
    time: float = 0.0

    def reassemble(self, hbar: float = 1.0) -> np.ndarray:
        """``sqrt(r) exp(iS/hbar)``; NaN on masked nodes."""
        return np.sqrt(self.r) * np.exp(1j * self.S / hbar)


@dataclass(frozen=True, eq=False)
class QuantumPotentialField:
    grid: Grid1D
    Q: np.ndarray
    V_eff: np.ndarray
    node_mask: np.ndarray


@dataclass(frozen=True, eq=False)
class BohmianTrajectory:
    times: np.ndarray
    xs: np.ndarray
    ps: np.ndarray
    kinetic: np.ndarray
    internal: np.ndarray
    potential: np.ndarray
    quantum: np.ndarray

    def rows(self):
        """``(t, x, p_B, T_B, I_O, V, Q)`` tuples, one per recorded time."""
        return zip(self.times, self.xs, self.ps, self.kinetic, self.internal,
                   self.potential, self.quantum)


@dataclass(frozen=True, eq=False)
class EnergyPartition:
    times: np.ndarray
    kinetic: np.ndarray
    internal: np.ndarray
    potential: np.ndarray

    @property
    def total(self) -> np.ndarray:
        return self.kinetic + self.internal + self.potential

    @property
    def relative_drift(self) -> float:
        tot = self.total
        return float(np.max(np.abs(tot - tot[0])) / abs(tot[0]))


@dataclass(frozen=True, eq=False)
class RateComparison:
    times: np.ndarray
    lhs: np.ndarray
    rhs: np.ndarray

    @property
    def residual(self) -> float:
        return float(np.max(np.abs(self.lhs - self.rhs)))

    @property
    def scale(self) -> float:
        return float(np.max(np.abs(self.lhs)))


# -- fields ------------------------------------------------------------------

def polar_decompose(state: Wavefunction, params: PhysicalParams = PhysicalParams(),
                    eps_node: float = EPS_NODE,
                    reference: Optional[PolarField] = None) -> PolarField:
    """Density and unwrapped phase of ``state``.

    The phase is unwrapped along ``x`` over the unmasked nodes.  When a
    ``reference`` field (e.g. the previous snapshot) is given, the whole
    phase is shifted by a multiple of ``2 pi hbar`` to agree with it at the
    densest node shared by both.
    """
    psi = state.amplitudes
    r = np.abs(psi) ** 2
    mask = node_mask(r, eps_node)
    S = np.full(r.shape, np.nan)
    ok = ~mask
    S[ok] = params.hbar * np.unwrap(np.angle(psi[ok]))
    if reference is not None:
        both = ok & ~reference.node_mask
        if np.any(both):
            i = np.flatnonzero(both)[np.argmax(r[both])]
            turns = np.round((reference.S[i] - S[i]) / (2 * np.pi * params.hbar))
            S += 2 * np.pi * params.hbar * turns
    return PolarField(state.grid, r, S, mask, psi, state.time)


def polar_series(record: EvolutionRecord, eps_node: float = EPS_NODE) -> list:
    """Polar fields for every snapshot with the phase kept continuous in time."""
    out = []
    prev = None
    for state in record:
        prev = polar_decompose(state, record.params, eps_node, prev)
        out.append(prev)
    return out


def _masked(values, mask):
    values = np.array(values, dtype=float)
    values[mask] = np.nan
    return values


def bohmian_momentum_field(field: PolarField, params: PhysicalParams = PhysicalParams()
                           ) -> np.ndarray:
    """Phase gradient ``dS/dx``.

    Differentiates ``S = hbar atan2(Im psi, Re psi)`` by the chain rule, with
    the derivatives of the real and imaginary parts taken spectrally, so no
    periodicity of ``S`` itself is needed.
    """
    psi = field.amplitudes
    dpsi = spectral_derivative(psi, field.grid)
    a, b = psi.real, psi.imag
    da, db = dpsi.real, dpsi.imag
    with np.errstate(all="ignore"):
        p = params.hbar * (a * db - b * da) / (a * a + b * b)
    return _masked(p, field.node_mask)


def osmotic_momentum_field(field: PolarField, params: PhysicalParams = PhysicalParams()
                           ) -> np.ndarray:
    psi = field.amplitudes
    dr = 2.0 * np.real(np.conj(psi) * spectral_derivative(psi, field.grid))
    with np.errstate(all="ignore"):
        p = -0.5 * params.hbar * dr / field.r
    return _masked(p, field.node_mask)


def _density_derivatives(psi: np.ndarray, grid: Grid1D, order: int):
    """``r, r', r'', ...`` of ``r = |psi|^2`` via Leibniz on spectral derivatives of psi."""
    d = derivatives(psi, grid, order)
    c = [np.conj(v) for v in d]
    r = [np.abs(psi) ** 2]
    if order >= 1:
        r.append(2.0 * np.real(c[0] * d[1]))
    if order >= 2:
        r.append(2.0 * np.real(c[0] * d[2]) + 2.0 * np.abs(d[1]) ** 2)
    if order >= 3:
        r.append(2.0 * np.real(c[0] * d[3]) + 6.0 * np.real(c[1] * d[2]))
    return r, d


def _quantum_potential_and_slope(psi, grid, params):
    """``Q`` and ``dQ/dx`` from ``Q = -(hbar^2/2M) (sqrt r)''/sqrt r``."""
    (r, r1, r2, r3), _ = _density_derivatives(psi, grid, 3)
    c = -params.hbar ** 2 / (2 * params.mass)
    with np.errstate(all="ignore"):
        u1, u2 = r1 / r, r2 / r
        # (sqrt r)''/sqrt r = r''/(2r) - r'^2/(4r^2)
        q = c * (0.5 * u2 - 0.25 * u1 ** 2)
        u3 = r3 / r
        dq = c * (0.5 * (u3 - u1 * u2) - 0.5 * u1 * (u2 - u1 ** 2))
    return q, dq


def quantum_potential(field: PolarField, potential: Potential,
                      params: PhysicalParams = PhysicalParams()) -> QuantumPotentialField:
    q, _ = _quantum_potential_and_slope(field.amplitudes, field.grid, params)
    q = _masked(q, field.node_mask)
    return QuantumPotentialField(field.grid, q, potential.values + q, field.node_mask)


def _bohm_slope(psi, grid, params):
    """``p_B`` and ``dp_B/dx`` from ``p_B = hbar Im(psi'/psi)``."""
    _, d = _density_derivatives(psi, grid, 2)
    with np.errstate(all="ignore"):
        u = d[1] / psi
        p = params.hbar * u.imag
        dp = params.hbar * (d[2] / psi - u * u).imag
    return p, dp


# -- trajectories --------------------------------------------------------------

def velocity_fields(record: EvolutionRecord, eps_node: float = EPS_NODE) -> np.ndarray:
    """``p_B/M`` on every snapshot, NaN on masked nodes."""
    params = record.params
    out = np.empty((len(record), record.grid.n_points))
    for k, state in enumerate(record):
        field = polar_decompose(state, params, eps_node)
        out[k] = bohmian_momentum_field(field, params) / params.mass
    return out


def _check_snapshot_spacing(record: EvolutionRecord):
    e_kin = kinetic_energy(record.state(0), record.params)
    if e_kin <= 0 or len(record) < 2:
        return
    limit = 0.1 * 2 * np.pi * record.params.hbar / e_kin
    if record.dt > limit:
        raise ValueError(f"snapshot spacing {record.dt:.4g} exceeds a tenth of the phase "
                         f"period ({limit:.4g}); lower record_stride")


def integrate_ensemble(record: EvolutionRecord, x0, substeps: int = 4,
                       eps_node: float = EPS_NODE, velocity: Optional[np.ndarray] = None):
    """Integrate many trajectories at once.

    Returns ``(xs, status)`` with ``xs`` of shape ``(n_times, n_traj)`` and
    per-trajectory status codes from :mod:`strongweak.kernels`.
    """
    _check_snapshot_spacing(record)
    if velocity is None:
        velocity = velocity_fields(record, eps_node)
    grid = record.grid
    return kernels.integrate_trajectories(np.atleast_1d(np.asarray(x0, dtype=float)),
                                          record.times, velocity, grid.x_min, grid.dx,
                                          int(substeps))


def _cubic_at(values: np.ndarray, grid: Grid1D, x: float) -> float:
    u = (x - grid.x_min) / grid.dx
    i = int(np.floor(u))
    s = u - i
    w = (-s * (s - 1) * (s - 2) / 6, (s + 1) * (s - 1) * (s - 2) / 2,
         -(s + 1) * s * (s - 2) / 2, (s + 1) * s * (s - 1) / 6)
    return float(sum(wj * values[i - 1 + j] for j, wj in enumerate(w)))


def integrate_trajectory(record: EvolutionRecord, x0: float,
                         params: Optional[PhysicalParams] = None,
                         substeps: int = 4, eps_node: float = EPS_NODE) -> BohmianTrajectory:
    """One Bohmian trajectory with its momentum and energy bookkeeping.

    Raises
    ------
    NodeApproach
        If the path enters a masked node region or leaves the grid.
    """
    params = record.params if params is None else params
    xs, status = integrate_ensemble(record, [x0], substeps, eps_node)
    if status[0] != kernels.OK:
        bad = int(np.argmax(~np.isfinite(xs[:, 0])))
        why = "a node region" if status[0] == kernels.NODE else "the grid edge"
        raise NodeApproach(f"trajectory from x0={x0} reached {why} near t={record.times[bad]:.6g}")
    xs = xs[:, 0]
    grid = record.grid
    n = len(record)
    ps, kin, internal, pot, quantum = (np.empty(n) for _ in range(5))
    v = record.potential.values
    for k, state in enumerate(record):
        field = polar_decompose(state, params, eps_node)
        pb = bohmian_momentum_field(field, params)
        po = osmotic_momentum_field(field, params)
        q, _ = _quantum_potential_and_slope(state.amplitudes, grid, params)
        ps[k] = _cubic_at(pb, grid, xs[k])
        po_k = _cubic_at(po, grid, xs[k])
        kin[k] = ps[k] ** 2 / (2 * params.mass)
        internal[k] = po_k ** 2 / (2 * params.mass)
        pot[k] = _cubic_at(v, grid, xs[k])
        quantum[k] = _cubic_at(q, grid, xs[k])
    return BohmianTrajectory(record.times.copy(), xs, ps, kin, internal, pot, quantum)


# -- balance laws ----------------------------------------------------------------

def _d_dt(series: np.ndarray, dt: float) -> np.ndarray:
    """Fourth-order centred time derivative along axis 0 (drops two points each end)."""
    return (series[:-4] - 8 * series[1:-3] + 8 * series[3:-1] - series[4:]) / (12 * dt)


def _rate_window(record, i, eps_node, window):
    """Times (as a boolean over the trimmed series) where node ``i`` is off-mask."""
    dens = record.densities
    ok = (dens[:, i] >= eps_node * dens.max(axis=1))[2:-2]
    times = record.times[2:-2]
    if window is not None:
        inside = (times >= window[0]) & (times <= window[1])
        if np.any(inside & ~ok):
            raise NodeError(f"x={record.grid.x[i]:.6g} is masked inside the window {window}")
        ok = inside
    if not np.any(ok):
        raise NodeError(f"x={record.grid.x[i]:.6g} is masked at every recorded time")
    return ok


def fixed_point_momentum_rate(record: EvolutionRecord, x: float,
                              params: Optional[PhysicalParams] = None,
                              eps_node: float = 1e-8, window=None) -> RateComparison:
    """Rate of change of ``Re <p>_w`` at the fixed node nearest ``x``.

    ``lhs`` is the time derivative of the recorded series; ``rhs`` is
    ``-d/dx (V_eff + p_B^2/2M)`` from spatial derivatives of each snapshot.
    Only times where the node is off-mask (density at least ``eps_node``
    times the peak) are returned; with an explicit ``window=(t0, t1)`` the
    node must be off-mask throughout.

    Raises
    ------
    NodeError
        If the node is masked inside ``window`` or at every time.
    """
    params = record.params if params is None else params
    i = record.grid.index_of(x)
    ok = _rate_window(record, i, eps_node, window)
    pb, rhs = _local_series(record, i, params)
    lhs = _d_dt(pb, record.dt)
    return RateComparison(record.times[2:-2][ok], lhs[ok], rhs[2:-2][ok])


def _local_series(record, i, params, advective=False):
    grid = record.grid
    dv = record.potential.derivative_values[i]
    n = len(record)
    pb = np.empty(n)
    rhs = np.empty(n)
    adv = np.empty(n)
    for k in range(n):
        psi = record.snapshots[k]
        p, dp = _bohm_slope(psi, grid, params)
        _, dq = _quantum_potential_and_slope(psi, grid, params)
        pb[k] = p[i]
        adv[k] = p[i] * dp[i] / params.mass
        rhs[k] = -(dv + dq[i]) if advective else -(dv + dq[i] + adv[k])
    if advective:
        return pb, rhs, adv
    return pb, rhs


def material_momentum_rate(record: EvolutionRecord, x: float,
                           params: Optional[PhysicalParams] = None,
                           eps_node: float = 1e-8, window=None) -> RateComparison:
    """Rate of change of ``p_B`` moving with the flow, at the node nearest ``x``.

    ``lhs = d_t p_B + (p_B/M) d_x p_B``; ``rhs = -d_x (V + Q)``.  Masking as
    in :func:`fixed_point_momentum_rate`.
    """
    params = record.params if params is None else params
    i = record.grid.index_of(x)
    ok = _rate_window(record, i, eps_node, window)
    pb, rhs, adv = _local_series(record, i, params, advective=True)
    lhs = _d_dt(pb, record.dt) + adv[2:-2]
    return RateComparison(record.times[2:-2][ok], lhs[ok], rhs[2:-2][ok])


def ehrenfest_check(record: EvolutionRecord, potential: Optional[Potential] = None,
                    params: Optional[PhysicalParams] = None) -> RateComparison:
    """``d<p>/dt`` (time difference of snapshots) against ``-<dV/dx>``."""
    params = record.params if params is None else params
    potential = record.potential if potential is None else potential
    grid = record.grid
    psik = np.fft.fft(record.snapshots, axis=1)
    p_mean = (np.sum(params.hbar * grid.k_derivative * np.abs(psik) ** 2, axis=1)
              * grid.dx / grid.n_points)
    force = -np.sum(record.densities * potential.derivative_values, axis=1) * grid.dx
    return RateComparison(record.times[2:-2], _d_dt(p_mean, record.dt), force[2:-2])


def energy_partition(record: EvolutionRecord, potential: Optional[Potential] = None,
                     params: Optional[PhysicalParams] = None,
                     eps_node: float = EPS_NODE) -> EnergyPartition:
    """Density-weighted ``<T_B>``, ``<I_O>`` and ``<V>`` per snapshot."""
    params = record.params if params is None else params
    potential = record.potential if potential is None else potential
    grid = record.grid
    n = len(record)
    kin, internal, pot = np.empty(n), np.empty(n), np.empty(n)
    for k, state in enumerate(record):
        field = polar_decompose(state, params, eps_node)
        ok = ~field.node_mask
        pb = bohmian_momentum_field(field, params)[ok]
        po = osmotic_momentum_field(field, params)[ok]
        r = field.r[ok]
        kin[k] = np.sum(r * pb ** 2) / (2 * params.mass) * grid.dx
        internal[k] = np.sum(r * po ** 2) / (2 * params.mass) * grid.dx
        pot[k] = np.sum(field.r * potential.values) * grid.dx
    return EnergyPartition(record.times.copy(), kin, internal, pot)


def hamilton_jacobi_residual(record: EvolutionRecord, eps_node: float = 1e-8,
                             interior: int = 16):
    """Residual of ``d_t S + p_B^2/2M + V + Q = 0`` over unmasked nodes.

    ``d_t S`` is the rate of the phase continued in time, ``hbar Im(d_t psi/psi)``.
    The snapshots are first demodulated by the mean energy so the fourth-order
    time difference only sees the slow envelope; this keeps the estimate
    accurate next to near-nodes where the raw phase turns quickly.

    Returns ``(max |residual|, |<H>|)``; the second value sets the scale.
    """
    params = record.params
    grid = record.grid
    e0 = total_energy(record.state(0), record.potential, params)
    carrier = np.exp(1j * e0 * record.times / params.hbar)[:, None]
    slow = record.snapshots * carrier
    d_slow = _d_dt(slow, record.dt)
    v = record.potential.values
    worst = 0.0
    for j, k in enumerate(range(2, len(record) - 2)):
        psi = record.snapshots[k]
        with np.errstate(all="ignore"):
            ds_dt = params.hbar * (d_slow[j] / slow[k]).imag - e0
        p, _ = _bohm_slope(psi, grid, params)
        q, _ = _quantum_potential_and_slope(psi, grid, params)
        res = ds_dt + p ** 2 / (2 * params.mass) + v + q
        mask = node_mask(np.abs(psi) ** 2, eps_node)
        mask[:interior] = True
        mask[-interior:] = True
        if np.any(~mask):
            worst = max(worst, float(np.max(np.abs(res[~mask]))))
    return worst, abs(e0)


def continuity_residual(record: EvolutionRecord, interior: int = 16):
    """Residual of ``d_t r + d_x (r p_B / M) = 0``; ``(max |residual|, max |flux slope|)``."""
    params = record.params
    grid = record.grid
    r = record.densities
    dr = _d_dt(r, record.dt)
    worst = scale = 0.0
    for j, k in enumerate(range(2, len(record) - 2)):
        psi = record.snapshots[k]
        p, _ = _bohm_slope(psi, grid, params)
        flux = np.where(np.isfinite(p), r[k] * p, 0.0) / params.mass
        dflux = spectral_derivative(flux, grid)
        res = (dr[j] + dflux)[interior:-interior]
        worst = max(worst, float(np.max(np.abs(res))))
        scale = max(scale, float(np.max(np.abs(dflux))))
    return worst, scale
