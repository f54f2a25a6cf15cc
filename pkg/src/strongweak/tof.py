"""Time-of-flight protocol: weak momentum values from arrival-time statistics.

A detector at ``x`` records the transition path time distribution
``rho(t|x) = |psi(x,t)|^2 / N(x)`` and the normalised flux distribution
``f(t|x) = J(x,t) / N_f``.  Their ratio gives the real part of the momentum
weak value; the spatial log-derivative of ``rho(t|x)`` (from two detectors
``dx`` apart) gives the imaginary part.  Detector positions need not be grid
nodes: the snapshots are evaluated by band-limited Fourier interpolation.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Optional, Sequence, Union

import numpy as np

from . import kernels
from .errors import EmptyBin, NodeError, OpenTail
from .evolution import EvolutionRecord
from .state import Grid1D, PhysicalParams, spectral_derivative

__all__ = [
    "TAIL_TOL", "TimeDistribution", "FluxProtocolConfig", "ClickSample", "ClickEstimate",
    "MeanTimeRelation", "detector_signal", "density_in_time", "flux_in_time",
    "exact_weak_momentum_at", "infer_im_weak_momentum_fd", "infer_re_weak_momentum",
    "log_norm_slope", "mean_arrival_time", "verify_mean_time_relation",
    "sample_clicks", "estimate_im_from_clicks", "transmission", "continuity_residual",
]

log = logging.getLogger(__name__)

TAIL_TOL = 1e-10


@dataclass(frozen=True, eq=False)
class TimeDistribution:
    """A normalised distribution of arrival times at ``detector_x``.

    ``values`` integrate to one with the rectangle rule on ``times``;
    ``normalization`` is the divisor that was applied (``N(x)`` for
    ``kind='density'``, ``N_f`` for ``kind='flux'``).
    """

    detector_x: float
    times: np.ndarray
    values: np.ndarray
    normalization: float
    kind: str = "density"
    backflow: bool = False

    @property
    def dt(self) -> float:
        return float(self.times[1] - self.times[0])

    def total(self) -> float:
        return float(np.sum(self.values) * self.dt)

    def cell_edges(self) -> np.ndarray:
        """Edges of the cells centred on the mesh times."""
        return np.append(self.times - 0.5 * self.dt, self.times[-1] + 0.5 * self.dt)

    def cdf(self, t) -> np.ndarray:
        """CDF of the piecewise-constant law the click sampler draws from."""
        edges = self.cell_edges()
        cum = np.concatenate(([0.0], np.cumsum(np.clip(self.values, 0, None)) * self.dt))
        cum /= cum[-1]
        return np.interp(t, edges, cum)


@dataclass(frozen=True)
class FluxProtocolConfig:
    shutter_time: float
    source_x: float
    detector_xs: Sequence[float] = ()
    fd_step: Optional[float] = None
    emission_time: Optional[float] = None

    def __post_init__(self):
        if not self.shutter_time > 0:
            raise ValueError("shutter_time must be positive")
        object.__setattr__(self, "detector_xs", tuple(float(x) for x in self.detector_xs))

    def step(self, grid: Grid1D) -> float:
        return grid.dx if self.fd_step is None else float(self.fd_step)

    def validate(self, record: EvolutionRecord):
        """Check the protocol assumptions against a propagation record."""
        pot = record.potential
        v_right = pot.values[-1]
        grid = record.grid
        for x in self.detector_xs:
            v = np.interp(x, grid.x, pot.values)
            if abs(v - v_right) >= 1e-9 * pot.scale:
                raise ValueError(f"detector at x={x} is not in the asymptotic region "
                                 f"(|V(x) - V(x_max)| = {abs(v - v_right):.3g})")
            t_mean = mean_arrival_time(density_in_time(record, x))
            if not self.shutter_time < 0.1 * t_mean:
                raise ValueError(f"shutter time {self.shutter_time} is not short compared "
                                 f"with the mean arrival time {t_mean:.4g} at x={x}")


@dataclass(frozen=True, eq=False)
class ClickSample:
    detector_x: float
    seed: Optional[int]
    n_events: int
    event_times: np.ndarray


@dataclass(frozen=True, eq=False)
class ClickEstimate:
    """Per-bin estimate of the imaginary momentum weak value from click histograms.

    Only bins where both detectors registered events are kept.
    """

    bin_centers: np.ndarray
    estimate: np.ndarray
    stderr: np.ndarray
    counts_left: np.ndarray
    counts_right: np.ndarray
    n_empty: int = 0


@dataclass(frozen=True)
class MeanTimeRelation:
    lhs: float
    rhs: float

    @property
    def residual(self) -> float:
        return abs(self.lhs - self.rhs)

    @property
    def relative(self) -> float:
        return self.residual / abs(self.lhs)


# -- detector signals ------------------------------------------------------------

def detector_signal(record: EvolutionRecord, x: float):
    """``(psi(x, t_k), d_x psi(x, t_k))`` for every recorded time."""
    grid = record.grid
    if not grid.x_min <= x < grid.x_max:
        raise ValueError(f"detector position {x} is outside the grid")
    n = grid.n_points
    coeff = np.fft.fft(record.snapshots, axis=1) / n
    k = grid.k_derivative
    phase = np.exp(1j * grid.k * (x - grid.x_min))
    # the Nyquist term is split symmetrically so the interpolant is the real-safe one
    phase[n // 2] = np.cos(grid.k[n // 2] * (x - grid.x_min))
    psi = coeff @ phase
    dpsi = coeff @ (1j * k * phase)
    return psi, dpsi


def _check_tail(rho: np.ndarray, x: float, tail_tol: float):
    peak = np.max(rho)
    if peak <= 0 or rho[-1] >= tail_tol * peak:
        raise OpenTail(f"density at x={x} has not decayed by t_max "
                       f"(last/peak = {rho[-1] / peak if peak > 0 else np.inf:.3g}); "
                       "extend the propagation")


def density_in_time(record: EvolutionRecord, x: float, tail_tol: float = TAIL_TOL
                    ) -> TimeDistribution:
    """Transition path time distribution ``rho(t|x)``."""
    psi, _ = detector_signal(record, x)
    rho = np.abs(psi) ** 2
    _check_tail(rho, x, tail_tol)
    norm = float(np.sum(rho) * record.dt)
    return TimeDistribution(float(x), record.times, rho / norm, norm, "density")


def flux_in_time(record: EvolutionRecord, x: float, params: Optional[PhysicalParams] = None,
                 tail_tol: float = TAIL_TOL) -> TimeDistribution:
    """Normalised flux time distribution ``f(t|x)``; negative lobes set ``backflow``."""
    params = record.params if params is None else params
    psi, dpsi = detector_signal(record, x)
    _check_tail(np.abs(psi) ** 2, x, tail_tol)
    current = params.hbar * np.imag(np.conj(psi) * dpsi) / params.mass
    n_f = float(np.sum(current) * record.dt)
    values = current / n_f
    backflow = bool(np.any(values < -1e-10 * np.max(np.abs(values))))
    if backflow:
        log.info("flux distribution at x=%g has negative lobes (backflow)", x)
    return TimeDistribution(float(x), record.times, values, n_f, "flux", backflow)


def exact_weak_momentum_at(record: EvolutionRecord, x: float,
                           params: Optional[PhysicalParams] = None) -> np.ndarray:
    """Direct ``<x|p|psi_t>/<x|psi_t>`` time series at ``x`` (complex)."""
    params = record.params if params is None else params
    psi, dpsi = detector_signal(record, x)
    with np.errstate(divide="ignore", invalid="ignore"):
        return -1j * params.hbar * dpsi / psi


def infer_re_weak_momentum(density: TimeDistribution, flux: TimeDistribution,
                           params: PhysicalParams = PhysicalParams()) -> np.ndarray:
    """Real momentum weak value as ``M N_f f(t|x) / (N(x) rho(t|x))``."""
    if density.kind != "density" or flux.kind != "flux":
        raise ValueError("expected a density and a flux distribution")
    with np.errstate(divide="ignore", invalid="ignore"):
        return (params.mass * flux.normalization * flux.values
                / (density.normalization * density.values))


def log_norm_slope(record: EvolutionRecord, x: float, fd_step: float,
                   tail_tol: float = TAIL_TOL) -> float:
    """Centred difference of ``ln N(x)``: the time-independent baseline of the estimator."""
    n_plus = density_in_time(record, x + 0.5 * fd_step, tail_tol).normalization
    n_minus = density_in_time(record, x - 0.5 * fd_step, tail_tol).normalization
    return float((np.log(n_plus) - np.log(n_minus)) / fd_step)


def infer_im_weak_momentum_fd(record: EvolutionRecord, x: float, fd_step: float,
                              baseline: bool = True, eps_node: float = 1e-14,
                              tail_tol: float = TAIL_TOL) -> np.ndarray:
    """Imaginary momentum weak value from two detectors at ``x -/+ fd_step/2``.

    Returns ``-(hbar/2) d/dx ln rho(t|x)`` by a centred difference.  With
    ``baseline=True`` the ``-(hbar/2) d/dx ln N(x)`` offset is removed so the
    result converges to the weak value even where ``N`` depends on ``x``.
    Times at which either density is below ``eps_node`` of its peak are NaN.

    Raises
    ------
    NodeError
        If every recorded time is masked.
    """
    hbar = record.params.hbar
    left = density_in_time(record, x - 0.5 * fd_step, tail_tol)
    right = density_in_time(record, x + 0.5 * fd_step, tail_tol)
    lo, hi = left.values, right.values
    if baseline:
        lo, hi = lo * left.normalization, hi * right.normalization
    mask = (lo < eps_node * lo.max()) | (hi < eps_node * hi.max())
    if np.all(mask):
        raise NodeError(f"no usable times at x={x}: densities below the node threshold")
    out = np.full(lo.shape, np.nan)
    ok = ~mask
    out[ok] = -0.5 * hbar * (np.log(hi[ok]) - np.log(lo[ok])) / fd_step
    return out


def mean_arrival_time(dist: TimeDistribution) -> float:
    if dist.kind != "density":
        raise ValueError("mean arrival time needs a density distribution")
    return float(np.sum(dist.times * dist.values) * dist.dt)


def verify_mean_time_relation(record: EvolutionRecord, x: float, fd_step: float,
                              tail_tol: float = TAIL_TOL) -> MeanTimeRelation:
    """Both sides of the mean-arrival-time / imaginary-weak-value relation.

    ``lhs`` is the centred difference of the mean arrival time; ``rhs`` is
    ``(2/hbar)[<Im> <t> - int t rho Im dt]`` built from the direct weak value
    at ``x``.
    """
    hbar = record.params.hbar
    t_plus = mean_arrival_time(density_in_time(record, x + 0.5 * fd_step, tail_tol))
    t_minus = mean_arrival_time(density_in_time(record, x - 0.5 * fd_step, tail_tol))
    lhs = (t_plus - t_minus) / fd_step

    psi, dpsi = detector_signal(record, x)
    rho = np.abs(psi) ** 2
    _check_tail(rho, x, tail_tol)
    dt = record.dt
    norm = np.sum(rho) * dt
    # rho(t|x) * Im<p>_w without dividing by |psi|^2
    rho_im = -0.5 * hbar * 2.0 * np.real(np.conj(psi) * dpsi) / norm
    t = record.times
    mean_t = np.sum(t * rho) * dt / norm
    mean_im = np.sum(rho_im) * dt
    rhs = 2.0 / hbar * (mean_im * mean_t - np.sum(t * rho_im) * dt)
    return MeanTimeRelation(float(lhs), float(rhs))


# -- simulated clicks ---------------------------------------------------------

def sample_clicks(dist: TimeDistribution, n_events: int, seed=None) -> ClickSample:
    """Draw arrival times from ``dist`` by inverse CDF with uniform jitter inside cells."""
    if dist.kind != "density":
        raise ValueError("clicks are sampled from a density distribution")
    rng = np.random.default_rng(seed)
    u = rng.random((2, int(n_events)))
    mass = np.clip(dist.values, 0.0, None) * dist.dt
    cdf = np.concatenate(([0.0], np.cumsum(mass)))
    left = dist.times - 0.5 * dist.dt
    times = kernels.sample_piecewise(cdf, left, dist.dt, u[0], u[1])
    return ClickSample(dist.detector_x, seed, int(n_events), times)


def estimate_im_from_clicks(samples_left: ClickSample, samples_right: ClickSample,
                            fd_step: float, bins: Union[int, np.ndarray],
                            hbar: float = 1.0, norm_slope: float = 0.0,
                            time_range: Optional[tuple] = None) -> ClickEstimate:
    """Histogram version of the log-derivative estimator.

    ``samples_left`` is taken at ``x - fd_step/2`` and ``samples_right`` at
    ``x + fd_step/2``.  Standard errors propagate binomial counting noise
    through the log ratio: ``var ln p = 1/c - 1/n`` per detector.  A known
    ``norm_slope = d ln N/dx`` is subtracted as a baseline.  Bins empty in
    either histogram are dropped.
    """
    if np.ndim(bins) == 0:
        lo, hi = time_range if time_range is not None else (
            min(samples_left.event_times.min(), samples_right.event_times.min()),
            max(samples_left.event_times.max(), samples_right.event_times.max()))
        edges = np.linspace(lo, hi, int(bins) + 1)
    else:
        edges = np.asarray(bins, dtype=float)
    c_left = kernels.histogram(samples_left.event_times, edges)
    c_right = kernels.histogram(samples_right.event_times, edges)
    n_left, n_right = samples_left.n_events, samples_right.n_events
    ok = (c_left > 0) & (c_right > 0)
    if not np.any(ok):
        raise EmptyBin("no bin has events at both detectors")
    width = np.diff(edges)[ok]
    cl, cr = c_left[ok].astype(float), c_right[ok].astype(float)
    rho_l = cl / (n_left * width)
    rho_r = cr / (n_right * width)
    est = -0.5 * hbar * (np.log(rho_r) - np.log(rho_l)) / fd_step - 0.5 * hbar * norm_slope
    var = (1.0 / cl - 1.0 / n_left) + (1.0 / cr - 1.0 / n_right)
    err = 0.5 * hbar / abs(fd_step) * np.sqrt(var)
    centers = 0.5 * (edges[:-1] + edges[1:])[ok]
    return ClickEstimate(centers, est, err, c_left[ok], c_right[ok], int(np.sum(~ok)))


# -- flux bookkeeping -----------------------------------------------------------

def transmission(record: EvolutionRecord, source_x: float, detector_x: float,
                 cfg: FluxProtocolConfig, tail_tol: float = TAIL_TOL) -> float:
    """Ratio of the flux through the detector to the flux emitted during the shutter.

    The shutter window of width ``cfg.shutter_time`` is centred on
    ``cfg.emission_time``, or on the peak of the source flux when that is
    not given.
    """
    params = record.params
    dt = record.dt
    psi_d, dpsi_d = detector_signal(record, detector_x)
    _check_tail(np.abs(psi_d) ** 2, detector_x, tail_tol)
    j_det = params.hbar * np.imag(np.conj(psi_d) * dpsi_d) / params.mass
    psi_s, dpsi_s = detector_signal(record, source_x)
    j_src = params.hbar * np.imag(np.conj(psi_s) * dpsi_s) / params.mass
    t = record.times
    t_e = t[np.argmax(j_src)] if cfg.emission_time is None else cfg.emission_time
    window = np.abs(t - t_e) <= 0.5 * cfg.shutter_time + 1e-12 * max(1.0, abs(t_e))
    n_i = np.sum(j_src[window]) * dt
    n_f = np.sum(j_det) * dt
    return float(n_f / n_i)


def continuity_residual(record: EvolutionRecord, interior: int = 16):
    """Residual of ``d_t |psi|^2 + d_x J = 0`` at recorded times.

    The time derivative is a fourth-order centred difference on the
    snapshots, the flux derivative is spectral.  Returns
    ``(max |residual|, max |d_x J|)`` over the interior times and nodes.
    """
    params = record.params
    grid = record.grid
    if len(record) < 5:
        raise ValueError("need at least five snapshots")
    rho = record.densities
    dt = record.dt
    drho = (rho[:-4] - 8 * rho[1:-3] + 8 * rho[3:-1] - rho[4:]) / (12 * dt)
    snaps = record.snapshots[2:-2]
    worst = 0.0
    scale = 0.0
    for psi, dr in zip(snaps, drho):
        dpsi = spectral_derivative(psi, grid)
        j = params.hbar * np.imag(np.conj(psi) * dpsi) / params.mass
        dj = spectral_derivative(j, grid)
        res = (dr + dj)[interior:-interior]
        worst = max(worst, float(np.max(np.abs(res))))
        scale = max(scale, float(np.max(np.abs(dj))))
    return worst, scale
