"""Second-order (Strang) split-operator propagation with conservation monitors."""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .errors import BoundaryLeak, GridMismatch
from .state import Grid1D, PhysicalParams, Potential, Wavefunction, total_energy

__all__ = ["PropagatorConfig", "EvolutionRecord", "SplitOperator", "step", "propagate",
           "kinetic_propagate"]

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class PropagatorConfig:
    dt: float
    t_max: float
    boundary_density_threshold: float = 1e-8
    record_stride: int = 1
    edge_points: int = 5

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError(f"dt must be positive, got {self.dt}")
        # t_max == 0 is allowed and yields the initial snapshot only
        if self.t_max != 0 and self.t_max < self.dt:
            raise ValueError(f"t_max ({self.t_max}) must be 0 or at least dt ({self.dt})")
        if not 0 < self.boundary_density_threshold < 1:
            raise ValueError("boundary_density_threshold must lie in (0, 1)")
        if int(self.record_stride) < 1:
            raise ValueError("record_stride must be >= 1")

    @property
    def n_steps(self) -> int:
        return int(round(self.t_max / self.dt))


@dataclass(frozen=True, eq=False)
class EvolutionRecord:
    """Snapshots of a propagation on a uniform time mesh.

    ``snapshots`` is a read-only ``(n_times, n_points)`` array; use
    :meth:`state` for a :class:`Wavefunction` view of one row.
    """

    grid: Grid1D
    times: np.ndarray
    snapshots: np.ndarray
    potential: Potential
    params: PhysicalParams
    norm_drift: float
    energy_drift: float
    energies: np.ndarray

    def __len__(self):
        return len(self.times)

    @property
    def dt(self) -> float:
        """Spacing of the recorded time mesh."""
        if len(self.times) < 2:
            return 0.0
        return float(self.times[1] - self.times[0])

    @property
    def relative_energy_drift(self) -> float:
        return self.energy_drift / max(abs(self.energies[0]), np.finfo(float).tiny)

    @property
    def densities(self) -> np.ndarray:
        return np.abs(self.snapshots) ** 2

    def state(self, k: int) -> Wavefunction:
        return Wavefunction(self.grid, self.snapshots[k], float(self.times[k]))

    def __iter__(self):
        return (self.state(k) for k in range(len(self)))


class SplitOperator:
    """Cached phase factors for ``exp(-iV dt/2h) exp(-ip^2 dt/2Mh) exp(-iV dt/2h)``."""

    def __init__(self, potential: Potential, params: PhysicalParams, dt: float):
        grid = potential.grid
        self.grid = grid
        self.dt = dt
        self.half_kick = np.exp(-0.5j * dt / params.hbar * potential.values)
        self.drift = np.exp(-0.5j * dt * params.hbar / params.mass * grid.k ** 2)

    def __call__(self, psi: np.ndarray) -> np.ndarray:
        psi = self.half_kick * psi
        psi = np.fft.ifft(self.drift * np.fft.fft(psi))
        return self.half_kick * psi


def step(state: Wavefunction, potential: Potential, params: PhysicalParams,
         dt: float) -> Wavefunction:
    if state.grid != potential.grid:
        raise GridMismatch("state and potential live on different grids")
    return state.replace(SplitOperator(potential, params, dt)(state.amplitudes), state.time + dt)


def kinetic_propagate(state: Wavefunction, params: PhysicalParams, t: float) -> Wavefunction:
    """Exact free evolution over time ``t`` in one spectral step."""
    k = state.grid.k
    phase = np.exp(-0.5j * t * params.hbar / params.mass * k ** 2)
    return state.replace(np.fft.ifft(phase * np.fft.fft(state.amplitudes)), state.time + t)


def propagate(state: Wavefunction, potential: Potential, cfg: PropagatorConfig,
              params: PhysicalParams = PhysicalParams(),
              monitor_energy: bool = True) -> EvolutionRecord:
    """Propagate ``state`` to ``cfg.t_max`` recording every ``record_stride`` steps.

    The run covers ``(n_steps // record_stride) * record_stride`` steps so the
    recorded mesh is uniform.

    Raises
    ------
    BoundaryLeak
        As soon as the probability within ``cfg.edge_points`` nodes of either
        grid edge exceeds ``cfg.boundary_density_threshold``.
    """
    if state.grid != potential.grid:
        raise GridMismatch("state and potential live on different grids")
    grid = state.grid
    stride = int(cfg.record_stride)
    n_rec = cfg.n_steps // stride
    prop = SplitOperator(potential, params, cfg.dt)
    ne = cfg.edge_points
    dx = grid.dx

    def edge_probability(rho):
        return max(rho[:ne].sum(), rho[-ne:].sum()) * dx

    psi = np.array(state.amplitudes)
    snaps = np.empty((n_rec + 1, grid.n_points), dtype=np.complex128)
    snaps[0] = psi
    rho = np.abs(psi) ** 2
    norm0 = rho.sum() * dx
    leak = edge_probability(rho)
    if leak > cfg.boundary_density_threshold:
        raise BoundaryLeak(f"initial state has edge probability {leak:.3g}", state.time, leak)
    energies = np.empty(n_rec + 1)
    if monitor_energy:
        energies[0] = total_energy(state, potential, params)
    norm_drift = 0.0
    for r in range(1, n_rec + 1):
        for j in range(stride):
            psi = prop(psi)
            rho = psi.real ** 2 + psi.imag ** 2
            norm_drift = max(norm_drift, abs(rho.sum() * dx - norm0))
            leak = edge_probability(rho)
            if leak > cfg.boundary_density_threshold:
                t = state.time + ((r - 1) * stride + j + 1) * cfg.dt
                raise BoundaryLeak(
                    f"edge probability {leak:.3g} exceeds {cfg.boundary_density_threshold:.3g} "
                    f"at t={t:.6g}; enlarge the grid or shorten t_max", t, leak)
        snaps[r] = psi
        if monitor_energy:
            energies[r] = total_energy(Wavefunction(grid, psi), potential, params)
    times = state.time + cfg.dt * stride * np.arange(n_rec + 1)
    snaps.flags.writeable = False
    if not monitor_energy:
        energies[:] = np.nan
        energy_drift = np.nan
    else:
        energy_drift = float(np.max(np.abs(energies - energies[0])))
    log.debug("propagated %d steps: norm drift %.3g, energy drift %.3g",
              n_rec * stride, norm_drift, energy_drift)
    return EvolutionRecord(grid, times, snaps, potential, params, float(norm_drift),
                           energy_drift, energies)
