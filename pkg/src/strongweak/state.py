"""Grids, wavefunctions, potentials and the spectral primitives built on them.

All quantities are kept in simulation units with explicit ``hbar`` and
``mass`` so that non-unit runs remain possible.  The grid is periodic (it is
the domain of a discrete Fourier transform); states are required to stay
well inside it, which is what makes the periodic images irrelevant.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import ContainmentError, GridError, GridMismatch

__all__ = [
    "PhysicalParams", "Grid1D", "Wavefunction", "CoherentStateSpec", "Potential",
    "prepare_coherent_state", "inner_product", "apply_momentum",
    "spectral_derivative", "derivatives", "fourier_interpolate",
    "as_operator", "is_hermitian",
    "expect_position", "expect_momentum", "kinetic_energy", "potential_energy",
    "total_energy",
]


@dataclass(frozen=True)
class PhysicalParams:
    hbar: float = 1.0
    mass: float = 1.0

    def __post_init__(self):
        if not (self.hbar > 0 and self.mass > 0):
            raise ValueError(f"hbar and mass must be positive, got {self.hbar}, {self.mass}")


@dataclass(frozen=True)
class Grid1D:
    """Uniform periodic grid ``x_i = x_min + i*dx``, ``i < n_points``.

    ``x_max`` is the periodic image of ``x_min`` and is not itself a node.
    """

    x_min: float
    x_max: float
    n_points: int

    def __post_init__(self):
        n = int(self.n_points)
        if not self.x_max > self.x_min:
            raise GridError(f"x_max ({self.x_max}) must exceed x_min ({self.x_min})")
        if n < 16 or n & (n - 1):
            raise GridError(f"n_points must be a power of two >= 16, got {self.n_points}")
        object.__setattr__(self, "n_points", n)

    @property
    def dx(self) -> float:
        return (self.x_max - self.x_min) / self.n_points

    @property
    def length(self) -> float:
        return self.x_max - self.x_min

    @property
    def x(self) -> np.ndarray:
        return self.x_min + self.dx * np.arange(self.n_points)

    @property
    def k(self) -> np.ndarray:
        """Angular wavenumbers in FFT order."""
        return 2.0 * np.pi * np.fft.fftfreq(self.n_points, d=self.dx)

    @property
    def k_derivative(self) -> np.ndarray:
        """Wavenumbers for odd-order derivatives; the Nyquist mode is dropped so
        derivatives of real fields stay real."""
        k = self.k
        k[self.n_points // 2] = 0.0
        return k

    @property
    def k_max(self) -> float:
        return np.pi / self.dx

    def index_of(self, x: float) -> int:
        """Nearest grid index to ``x``; raises if ``x`` is outside the grid."""
        if not (self.x_min <= x <= self.x_max - self.dx):
            raise GridError(f"x={x} outside grid [{self.x_min}, {self.x_max - self.dx}]")
        return int(np.rint((x - self.x_min) / self.dx))


@dataclass(frozen=True, eq=False)
class Wavefunction:
    grid: Grid1D
    amplitudes: np.ndarray
    time: float = 0.0

    def __post_init__(self):
        psi = np.array(self.amplitudes, dtype=np.complex128)
        if psi.shape != (self.grid.n_points,):
            raise GridError(
                f"amplitudes have shape {psi.shape}, grid needs ({self.grid.n_points},)")
        if not np.all(np.isfinite(psi)):
            raise ValueError("wavefunction amplitudes must be finite")
        psi.flags.writeable = False
        object.__setattr__(self, "amplitudes", psi)

    @property
    def density(self) -> np.ndarray:
        return np.abs(self.amplitudes) ** 2

    def norm2(self) -> float:
        return float(np.sum(self.density) * self.grid.dx)

    def normalized(self) -> "Wavefunction":
        return self.replace(self.amplitudes / np.sqrt(self.norm2()))

    def replace(self, amplitudes, time=None) -> "Wavefunction":
        return Wavefunction(self.grid, amplitudes, self.time if time is None else time)

    def __call__(self, x) -> np.ndarray:
        """Band-limited (Fourier) interpolation of the amplitude at ``x``."""
        return fourier_interpolate(self.amplitudes, self.grid, x)


@dataclass(frozen=True)
class CoherentStateSpec:
    gamma: float
    center: float
    momentum: float

    def __post_init__(self):
        if not self.gamma > 0:
            raise ValueError(f"gamma must be positive, got {self.gamma}")

    @property
    def width(self) -> float:
        """Standard deviation of the position density."""
        return 1.0 / np.sqrt(2.0 * self.gamma)

    def amplitude(self, x, params: PhysicalParams = PhysicalParams()) -> np.ndarray:
        """Closed-form ``<x|psi_0>``."""
        x = np.asarray(x, dtype=float)
        g, y, p = self.gamma, self.center, self.momentum
        return (g / np.pi) ** 0.25 * np.exp(-0.5 * g * (x - y) ** 2 + 1j * p * (x - y) / params.hbar)


def prepare_coherent_state(spec: CoherentStateSpec, grid: Grid1D,
                           params: PhysicalParams = PhysicalParams(),
                           n_sigma: float = 6.0) -> Wavefunction:
    """Sample the Gaussian coherent state on ``grid``.

    Raises
    ------
    ContainmentError
        If fewer than ``n_sigma`` density widths separate the centre from an
        edge, or if the momentum content is not resolved by the grid.
    """
    margin = n_sigma * spec.width
    if spec.center - grid.x_min < margin or grid.x_max - spec.center < margin:
        raise ContainmentError(
            f"coherent state at y={spec.center} with width {spec.width:.4g} is not "
            f"contained in [{grid.x_min}, {grid.x_max}] to {n_sigma} widths")
    # momentum density sd is hbar*sqrt(gamma/2); require 8 of them below the Nyquist momentum
    p_edge = abs(spec.momentum) + 8.0 * params.hbar * np.sqrt(spec.gamma / 2.0)
    if p_edge > params.hbar * grid.k_max:
        raise ContainmentError(
            f"momentum content up to {p_edge:.4g} exceeds grid resolution {params.hbar * grid.k_max:.4g}")
    return Wavefunction(grid, spec.amplitude(grid.x, params), 0.0)


def _check_same_grid(a: Wavefunction, b: Wavefunction):
    if a.grid != b.grid:
        raise GridMismatch(f"states live on different grids: {a.grid} vs {b.grid}")


def inner_product(bra: Wavefunction, ket: Wavefunction) -> complex:
    _check_same_grid(bra, ket)
    return complex(np.vdot(bra.amplitudes, ket.amplitudes) * bra.grid.dx)


def _real_spectrum_derivative(fk, grid: Grid1D, order: int) -> np.ndarray:
    k = 2.0 * np.pi * np.fft.rfftfreq(grid.n_points, d=grid.dx)
    if order % 2:
        k[-1] = 0.0  # Nyquist mode has no odd derivative on a real field
    return np.fft.irfft((1j * k) ** order * fk, grid.n_points)


def spectral_derivative(values, grid: Grid1D, order: int = 1) -> np.ndarray:
    """d^n/dx^n of a periodic sampled field via the FFT.

    Real and imaginary parts are differentiated separately, so a real field
    (or a purely real part) has an exactly real derivative.
    """
    return derivatives(values, grid, order)[order]


def derivatives(values, grid: Grid1D, max_order: int) -> list:
    """``[f, f', ..., f^(max_order)]`` sharing the forward transforms."""
    values = np.asarray(values)
    parts = [np.fft.rfft(values.real)]
    if np.iscomplexobj(values):
        parts.append(np.fft.rfft(values.imag))
    out = [values]
    for n in range(1, max_order + 1):
        d = [_real_spectrum_derivative(fk, grid, n) for fk in parts]
        out.append(d[0] + 1j * d[1] if len(d) == 2 else d[0])
    return out


def fourier_interpolate(values, grid: Grid1D, x) -> np.ndarray:
    """Evaluate the trigonometric interpolant of ``values`` at arbitrary ``x``.

    ``values`` may be 2-D with the grid along the last axis (e.g. a stack of
    snapshots); the result then has shape ``values.shape[:-1] + shape(x)``.
    """
    values = np.asarray(values)
    x = np.asarray(x, dtype=float)
    n = grid.n_points
    coeff = np.fft.fft(values, axis=-1) / n
    m = np.fft.fftfreq(n, d=1.0 / n)
    # split the Nyquist term symmetrically so real data interpolates to real values
    nyq = n // 2
    phase = np.exp(2j * np.pi * np.multiply.outer(m, (x - grid.x_min) / grid.length))
    phase[nyq] = np.cos(2 * np.pi * nyq * (x - grid.x_min) / grid.length)
    out = np.tensordot(coeff, phase, axes=([-1], [0]))
    if np.isrealobj(values):
        return out.real
    return out


def apply_momentum(state: Wavefunction, params: PhysicalParams = PhysicalParams()) -> Wavefunction:
    """``-i hbar d/dx`` applied spectrally."""
    grid = state.grid
    p_psi = np.fft.ifft(params.hbar * grid.k_derivative * np.fft.fft(state.amplitudes))
    return state.replace(p_psi)


# -- potentials -------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class Potential:
    """Potential energy sampled on a grid.

    Use the classmethod constructors; ``kind`` and ``parameters`` only record
    provenance.  ``derivative_values`` is analytic for built-in kinds and a
    second-order finite difference for tables unless supplied.
    """

    grid: Grid1D
    values: np.ndarray
    kind: str = "custom_table"
    parameters: dict = field(default_factory=dict)
    derivative_values: Optional[np.ndarray] = None

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if v.shape != (self.grid.n_points,):
            raise GridError(f"potential has shape {v.shape}, grid needs ({self.grid.n_points},)")
        if not np.all(np.isfinite(v)):
            raise ValueError("potential values must be finite")
        v.flags.writeable = False
        object.__setattr__(self, "values", v)
        if self.derivative_values is None:
            dv = np.gradient(v, self.grid.dx)
        else:
            dv = np.array(self.derivative_values, dtype=float)
        dv.flags.writeable = False
        object.__setattr__(self, "derivative_values", dv)

    @classmethod
    def free(cls, grid: Grid1D) -> "Potential":
        zero = np.zeros(grid.n_points)
        return cls(grid, zero, "free", {}, zero)

    @classmethod
    def gaussian_barrier(cls, grid: Grid1D, height: float, width: float,
                         center: float = 0.0) -> "Potential":
        """``height * exp(-(x - center)^2 / (2 width^2))``."""
        u = (grid.x - center) / width
        v = height * np.exp(-0.5 * u * u)
        return cls(grid, v, "gaussian_barrier",
                   {"height": height, "width": width, "center": center}, -u / width * v)

    @classmethod
    def eckart(cls, grid: Grid1D, height: float, width: float,
               center: float = 0.0) -> "Potential":
        """Symmetric Eckart barrier ``height / cosh^2((x - center) / width)``."""
        u = (grid.x - center) / width
        v = height / np.cosh(u) ** 2
        return cls(grid, v, "eckart", {"height": height, "width": width, "center": center},
                   -2.0 * np.tanh(u) * v / width)

    @classmethod
    def custom_table(cls, grid: Grid1D, samples, derivative=None) -> "Potential":
        return cls(grid, samples, "custom_table", {}, derivative)

    @classmethod
    def from_function(cls, grid: Grid1D, fn: Callable, derivative: Optional[Callable] = None,
                      kind: str = "custom_table", **parameters) -> "Potential":
        x = grid.x
        dv = None if derivative is None else derivative(x)
        return cls(grid, fn(x), kind, parameters, dv)

    @property
    def scale(self) -> float:
        return max(1.0, float(np.max(np.abs(self.values))))

    def is_asymptotically_constant(self, rtol: float = 1e-9) -> bool:
        v = self.values
        left = abs(v[0] - v[10])
        right = abs(v[-1] - v[-11])
        return bool(left < rtol * self.scale and right < rtol * self.scale)


# -- finite-dimensional operators ---------------------------------------------

def as_operator(a) -> np.ndarray:
    """Validate a dense square complex matrix."""
    a = np.asarray(a, dtype=np.complex128)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"operator must be a square matrix, got shape {a.shape}")
    return a


def is_hermitian(a, tol: float = 1e-12) -> bool:
    a = np.asarray(a)
    return bool(np.max(np.abs(a - a.conj().T), initial=0.0) < tol)


# -- expectation values --------------------------------------------------------

def expect_position(state: Wavefunction) -> float:
    return float(np.sum(state.grid.x * state.density) * state.grid.dx / state.norm2())


def expect_momentum(state: Wavefunction, params: PhysicalParams = PhysicalParams()) -> float:
    return inner_product(state, apply_momentum(state, params)).real / state.norm2()


def kinetic_energy(state: Wavefunction, params: PhysicalParams = PhysicalParams()) -> float:
    grid = state.grid
    psik = np.fft.fft(state.amplitudes)
    # Parseval: sum |psi|^2 dx == sum |psi_k|^2 dx / n
    t = np.sum((params.hbar * grid.k) ** 2 / (2 * params.mass) * np.abs(psik) ** 2)
    return float(t * grid.dx / grid.n_points)


def potential_energy(state: Wavefunction, potential: Potential) -> float:
    return float(np.sum(potential.values * state.density) * state.grid.dx)


def total_energy(state: Wavefunction, potential: Potential,
                 params: PhysicalParams = PhysicalParams()) -> float:
    return kinetic_energy(state, params) + potential_energy(state, potential)
