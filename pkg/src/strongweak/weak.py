"""Weak values from strong (projective) expectation values.

For an operator ``A`` and a post-selected state ``phi`` three hermitian
operators are built: the projector ``D = |phi><phi|``, the symmetrised
"flux" ``F = (D A + A^dag D)/2`` and the commutator ``C = i(A^dag D - D A)/2``.
Their expectation values in the pre-selected state give the real and
imaginary parts of the weak value as ``<F>/<D>`` and ``<C>/<D>``.  The same
construction with ``A = p`` and ``phi = |x>`` gives the momentum weak value
on a grid, and integrating its two parts recovers the wavefunction.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Union

import numpy as np
from scipy.integrate import cumulative_trapezoid

from .errors import DimensionMismatch, NodeError, NodeInInterval, OrthogonalSelection
from .state import (Grid1D, PhysicalParams, Wavefunction, as_operator,
                    spectral_derivative)

__all__ = [
    "EPS_OVERLAP", "EPS_NODE", "FiniteState", "PositionPoint", "OperatorTriple", "WeakValue",
    "build_triple", "weak_value_exact", "weak_value_from_strong",
    "momentum_weak_field", "momentum_weak_value_grid", "momentum_matrix",
    "node_mask", "node_free_interval", "reconstruct_wavefunction",
]

EPS_OVERLAP = 1e-10
EPS_NODE = 1e-14


@dataclass(frozen=True, eq=False)
class FiniteState:
    vector: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.vector, dtype=np.complex128).ravel()
        n = np.linalg.norm(v)
        if abs(n - 1.0) > 1e-12:
            raise ValueError(f"post-selected state must be normalised (|phi| = {n!r})")
        object.__setattr__(self, "vector", v)

    @classmethod
    def normalized(cls, v) -> "FiniteState":
        v = np.asarray(v, dtype=np.complex128).ravel()
        return cls(v / np.linalg.norm(v))


@dataclass(frozen=True)
class PositionPoint:
    """Post-selection on a position eigenstate, snapped to the nearest node."""

    x: float
    grid: Grid1D

    @property
    def index(self) -> int:
        return self.grid.index_of(self.x)

    @property
    def x_node(self) -> float:
        return float(self.grid.x[self.index])


PostSelection = Union[FiniteState, PositionPoint]


@dataclass(frozen=True)
class OperatorTriple:
    density: np.ndarray
    flux: np.ndarray
    commutator: np.ndarray


@dataclass(frozen=True)
class WeakValue:
    """A weak value with its two strong-measurement channels.

    ``value`` is the directly evaluated (or channel-assembled) complex
    number; ``re_channel``/``im_channel`` are the ratios read off strong
    expectation values and ``denominator`` is ``<psi|D|psi>``.
    """

    value: complex
    re_channel: float
    im_channel: float
    denominator: float
    re_stderr: Optional[float] = None
    im_stderr: Optional[float] = None

    @property
    def channels(self) -> complex:
        return complex(self.re_channel, self.im_channel)

    @property
    def consistency(self) -> float:
        return abs(self.value - self.channels)


def _post_vector(post, dim: Optional[int] = None) -> np.ndarray:
    if isinstance(post, FiniteState):
        v = post.vector
    elif isinstance(post, PositionPoint):
        v = np.zeros(post.grid.n_points, dtype=np.complex128)
        v[post.index] = 1.0
    else:
        v = FiniteState(post).vector
    if dim is not None and v.shape[0] != dim:
        raise DimensionMismatch(f"post-selected state has dimension {v.shape[0]}, operator {dim}")
    return v


# Expectations are accumulated in extended precision where the platform has
# it: near-orthogonal selections divide by |<phi|psi>|^2 and magnify roundoff.
_WIDE = np.clongdouble


def _triple(a, phi, dtype=np.complex128):
    a = a.astype(dtype, copy=False)
    phi = phi.astype(dtype, copy=False)
    d = np.outer(phi, phi.conj())
    # D A and A^dag D: for hermitian A this is the usual anticommutator and
    # commutator, and the ordering keeps <F>/<D> = Re <A>_w for any A
    da = d @ a
    ad = a.conj().T @ d
    return d, 0.5 * (da + ad), 0.5j * (ad - da)


def build_triple(op, post: PostSelection) -> OperatorTriple:
    """Density, flux and commutator operators for ``op`` and the post-selection.

    All three are hermitian even when ``op`` is not.

    Raises
    ------
    DimensionMismatch
        If the post-selected state and the operator disagree in dimension.
    """
    a = as_operator(op)
    phi = _post_vector(post, a.shape[0])
    return OperatorTriple(*_triple(a, phi))


def _pre_vector(pre, dim: int) -> np.ndarray:
    psi = np.asarray(pre, dtype=np.complex128).ravel()
    if psi.shape[0] != dim:
        raise DimensionMismatch(f"pre-selected state has dimension {psi.shape[0]}, operator {dim}")
    return psi


def _check_overlap(overlap: complex, eps: float):
    if abs(overlap) <= eps:
        raise OrthogonalSelection(
            f"|<phi|psi>| = {abs(overlap):.3g} is below the overlap threshold {eps:.3g}; "
            "the weak value is undefined")


def weak_value_exact(op, pre_state, post: PostSelection,
                     eps_overlap: float = EPS_OVERLAP) -> WeakValue:
    """``<phi|A|psi> / <phi|psi>`` evaluated directly."""
    a = as_operator(op)
    psi = _pre_vector(pre_state, a.shape[0])
    phi = _post_vector(post, a.shape[0])
    overlap = np.vdot(phi, psi)
    _check_overlap(overlap, eps_overlap)
    pw, fw = psi.astype(_WIDE), phi.astype(_WIDE)
    w = complex((fw.conj() @ (a.astype(_WIDE) @ pw)) / (fw.conj() @ pw))
    return WeakValue(w, w.real, w.imag, float(abs(overlap) ** 2 / np.vdot(psi, psi).real))


def weak_value_from_strong(op, pre_state, post: PostSelection,
                           eps_overlap: float = EPS_OVERLAP) -> WeakValue:
    """Weak value assembled from the expectations of ``D``, ``F`` and ``C``."""
    a = as_operator(op)
    psi = _pre_vector(pre_state, a.shape[0])
    phi = _post_vector(post, a.shape[0])
    _check_overlap(np.vdot(phi, psi), eps_overlap)
    d, f, c = _triple(a, phi, _WIDE)
    pw = psi.astype(_WIDE)

    def expect(m):
        return (pw.conj() @ (m @ pw)).real

    den = expect(d)
    re = float(expect(f) / den)
    im = float(expect(c) / den)
    return WeakValue(complex(re, im), re, im, float(den / expect(np.eye(len(psi), dtype=_WIDE))))


# -- momentum on a grid --------------------------------------------------------

def node_mask(density, eps_node: float = EPS_NODE) -> np.ndarray:
    """True where the density is below ``eps_node`` times its maximum."""
    density = np.asarray(density)
    return density < eps_node * np.max(density, axis=-1, keepdims=True)


def momentum_weak_field(state: Wavefunction, params: PhysicalParams = PhysicalParams(),
                        eps_node: float = EPS_NODE):
    """Momentum weak value at every node.

    Returns ``(value, re_channel, im_channel, mask)``.  ``value`` is
    ``(p psi)(x)/psi(x)``; ``re_channel`` is ``M J / r`` with the probability
    current ``J``; ``im_channel`` is ``-(hbar/2) r'/r``.  All three are NaN
    where ``mask`` flags a node.
    """
    psi = state.amplitudes
    hbar, m = params.hbar, params.mass
    dpsi = spectral_derivative(psi, state.grid)
    r = np.abs(psi) ** 2
    mask = node_mask(r, eps_node)
    safe_psi = np.where(mask, 1.0, psi)
    safe_r = np.where(mask, 1.0, r)
    value = -1j * hbar * dpsi / safe_psi
    current = hbar * np.imag(np.conj(psi) * dpsi) / m
    dr = 2.0 * np.real(np.conj(psi) * dpsi)
    re = m * current / safe_r
    im = -0.5 * hbar * dr / safe_r
    for a in (value, re, im):
        a[mask] = np.nan
    return value, re, im, mask


def momentum_weak_value_grid(state: Wavefunction, x: Union[float, PositionPoint],
                             params: PhysicalParams = PhysicalParams(),
                             eps_node: float = EPS_NODE) -> WeakValue:
    """Momentum weak value post-selected at the grid node nearest ``x``.

    Raises
    ------
    NodeError
        If the density there is below ``eps_node`` times its maximum.
    """
    point = x if isinstance(x, PositionPoint) else PositionPoint(float(x), state.grid)
    i = point.index
    value, re, im, mask = momentum_weak_field(state, params, eps_node)
    if mask[i]:
        raise NodeError(f"density at x={point.x_node:.6g} is below the node threshold; "
                        "the momentum weak value diverges there")
    return WeakValue(complex(value[i]), float(re[i]), float(im[i]), float(state.density[i]))


def momentum_matrix(grid: Grid1D, params: PhysicalParams = PhysicalParams()) -> np.ndarray:
    """Dense matrix of the spectral momentum operator in the node basis."""
    n = grid.n_points
    f = np.fft.fft(np.eye(n), axis=0)
    return np.fft.ifft(params.hbar * grid.k_derivative[:, None] * f, axis=0)


# -- reconstruction -------------------------------------------------------------

def node_free_interval(mask, anchor: int) -> tuple:
    """Largest ``(lo, hi)`` index range (inclusive) around ``anchor`` with no masked node."""
    mask = np.asarray(mask, dtype=bool)
    if mask[anchor]:
        raise NodeInInterval(f"anchor index {anchor} is itself masked")
    bad = np.flatnonzero(mask)
    left = bad[bad < anchor]
    right = bad[bad > anchor]
    lo = int(left[-1]) + 1 if left.size else 0
    hi = int(right[0]) - 1 if right.size else mask.size - 1
    return lo, hi


def reconstruct_wavefunction(re_field, im_field, anchor: int, grid: Grid1D,
                             params: PhysicalParams = PhysicalParams(),
                             interval: Optional[tuple] = None) -> Wavefunction:
    """Rebuild ``sqrt(rho) exp(iS/hbar)`` from the two momentum weak-value fields.

    ``S`` is the running integral of ``re_field`` and ``ln rho`` that of
    ``-(2/hbar) im_field``, both anchored at ``anchor`` (trapezoid rule).  The
    result is zero outside ``interval`` (inclusive index bounds, default the
    whole grid) and normalised inside it; the global phase is fixed by
    ``S(anchor) = 0``.
    """
    re_field = np.asarray(re_field, dtype=float)
    im_field = np.asarray(im_field, dtype=float)
    n = grid.n_points
    lo, hi = (0, n - 1) if interval is None else (int(interval[0]), int(interval[1]))
    if not lo <= anchor <= hi:
        raise ValueError(f"anchor {anchor} outside interval [{lo}, {hi}]")
    window = slice(lo, hi + 1)
    re_w, im_w = re_field[window], im_field[window]
    if not (np.all(np.isfinite(re_w)) and np.all(np.isfinite(im_w))):
        bad = lo + int(np.flatnonzero(~(np.isfinite(re_w) & np.isfinite(im_w)))[0])
        raise NodeInInterval(f"weak-value field is undefined at index {bad} inside [{lo}, {hi}]")
    dx = grid.dx
    phase = cumulative_trapezoid(re_w, dx=dx, initial=0.0)
    log_rho = -2.0 / params.hbar * cumulative_trapezoid(im_w, dx=dx, initial=0.0)
    a = anchor - lo
    phase -= phase[a]
    log_rho -= log_rho[a]
    rho = np.exp(log_rho - np.max(log_rho))
    rho /= np.sum(rho) * dx
    psi = np.zeros(n, dtype=np.complex128)
    psi[window] = np.sqrt(rho) * np.exp(1j * phase / params.hbar)
    return Wavefunction(grid, psi)
