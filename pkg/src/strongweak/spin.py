"""Path-spin model of a two-path neutron interferometer.

The four-dimensional state space is ``path (1, 2) x spin (up, down along z)``
ordered as ``np.kron(path, spin)``.  A magnetic coupling of strength angle
``alpha`` entangles the spin with the path operator ``sigma_z`` (+1 on path 1,
-1 on path 2).  Post-selecting a path state and measuring the spin along
x, y or z gives six intensities from which the complex weak value of the
path operator follows without any weak measurement.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, fields
from typing import Optional

import numpy as np

from .errors import DegenerateAngle, OrthogonalSelection
from .weak import EPS_OVERLAP, FiniteState, WeakValue, build_triple, weak_value_exact

__all__ = [
    "SPIN_STATES", "PATH_SIGMA_Z", "PathSpinState", "InterferometerConfig", "IntensityTable",
    "evolve_preselected", "post_selection_state", "intensity_table", "direct_weak_value",
    "triple_weak_value", "weak_spin_from_intensities", "verify_triple_correspondence",
    "sample_intensity_table", "sweep", "write_sweep_csv",
]

_R2 = 1.0 / np.sqrt(2.0)
SPIN_STATES = {
    "x+": np.array([_R2, _R2], dtype=complex),
    "x-": np.array([_R2, -_R2], dtype=complex),
    "y+": np.array([_R2, 1j * _R2], dtype=complex),
    "y-": np.array([_R2, -1j * _R2], dtype=complex),
    "z+": np.array([1, 0], dtype=complex),
    "z-": np.array([0, 1], dtype=complex),
}
PATH_SIGMA_Z = np.diag([1.0, -1.0]).astype(complex)
# sigma_z on the path factor, identity on spin
_PATH_OPERATOR = np.kron(PATH_SIGMA_Z, np.eye(2))


def _unit(v, name):
    v = np.asarray(v, dtype=complex).ravel()
    if v.shape != (2,):
        raise ValueError(f"{name} must have two components")
    n = np.linalg.norm(v)
    if abs(n - 1.0) > 1e-12:
        raise ValueError(f"{name} must be normalised (norm {n!r})")
    return v


@dataclass(frozen=True, eq=False)
class PathSpinState:
    amplitudes: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.amplitudes, dtype=complex).ravel()
        if a.shape != (4,):
            raise ValueError("path-spin state has four amplitudes")
        if abs(np.linalg.norm(a) - 1.0) > 1e-12:
            raise ValueError("path-spin state must be normalised")
        object.__setattr__(self, "amplitudes", a)


@dataclass(frozen=True, eq=False)
class InterferometerConfig:
    """Coupling angle and the pre- and post-selected path states.

    ``alpha`` may be anything in ``[0, pi]`` here; the inference routines
    reject the endpoints with :class:`DegenerateAngle`.
    """

    alpha: float
    path_pre: np.ndarray
    path_post: np.ndarray

    def __post_init__(self):
        if not (0.0 <= self.alpha <= np.pi):
            raise ValueError(f"alpha={self.alpha!r} outside [0, pi]")
        object.__setattr__(self, "path_pre", _unit(self.path_pre, "path_pre"))
        object.__setattr__(self, "path_post", _unit(self.path_post, "path_post"))

    @property
    def overlap(self) -> complex:
        return complex(np.vdot(self.path_post, self.path_pre))


@dataclass(frozen=True)
class IntensityTable:
    x_plus: float
    x_minus: float
    y_plus: float
    y_minus: float
    z_plus: float
    z_minus: float

    def completeness(self):
        """Per-axis sums; each equals the path post-selection probability."""
        return (self.x_plus + self.x_minus, self.y_plus + self.y_minus,
                self.z_plus + self.z_minus)

    def as_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}


def _check_alpha(alpha):
    if not (0.0 < alpha < np.pi) or np.sin(alpha) == 0.0:
        raise DegenerateAngle(f"alpha={alpha!r}: cot(alpha/2) or sin(alpha) is singular")


def evolve_preselected(cfg: InterferometerConfig) -> PathSpinState:
    """State after the coupling, starting from spin up along +x."""
    c, s = np.cos(cfg.alpha / 2), np.sin(cfg.alpha / 2)
    pre = np.kron(cfg.path_pre, SPIN_STATES["x+"])
    flipped = np.kron(PATH_SIGMA_Z @ cfg.path_pre, SPIN_STATES["x-"])
    v = c * pre - 1j * s * flipped
    return PathSpinState(v / np.linalg.norm(v))


def post_selection_state(cfg: InterferometerConfig, probe: str) -> FiniteState:
    """Post-selected path state times the spin probe, e.g. ``probe='y-'``."""
    return FiniteState(np.kron(cfg.path_post, SPIN_STATES[probe]))


def intensity_table(cfg: InterferometerConfig) -> IntensityTable:
    """The six post-selection probabilities ``<psi|D|psi>``."""
    psi = evolve_preselected(cfg).amplitudes
    out = {}
    for probe in SPIN_STATES:
        d = build_triple(_PATH_OPERATOR, post_selection_state(cfg, probe)).density
        out[probe] = float(np.vdot(psi, d @ psi).real)
    return IntensityTable(out["x+"], out["x-"], out["y+"], out["y-"], out["z+"], out["z-"])


def direct_weak_value(cfg: InterferometerConfig, eps_overlap: float = EPS_OVERLAP) -> complex:
    """``<P_f|sigma_z|P_i> / <P_f|P_i>`` on the two-dimensional path space."""
    overlap = cfg.overlap
    if abs(overlap) <= eps_overlap:
        raise OrthogonalSelection(f"|<P_f|P_i>| = {abs(overlap):.3g}")
    return complex(np.vdot(cfg.path_post, PATH_SIGMA_Z @ cfg.path_pre) / overlap)


def triple_weak_value(cfg: InterferometerConfig, eps_overlap: float = EPS_OVERLAP) -> WeakValue:
    """Weak value from the D/F/C ratios on the full path-spin space (probe ``x+``)."""
    psi = evolve_preselected(cfg).amplitudes
    post = post_selection_state(cfg, "x+")
    if abs(cfg.overlap) <= eps_overlap:
        raise OrthogonalSelection(f"|<P_f|P_i>| = {abs(cfg.overlap):.3g}")
    triple = build_triple(_PATH_OPERATOR, post)
    den = float(np.vdot(psi, triple.density @ psi).real)
    re = float(np.vdot(psi, triple.flux @ psi).real) / den
    im = float(np.vdot(psi, triple.commutator @ psi).real) / den
    direct = weak_value_exact(_PATH_OPERATOR, psi, post, eps_overlap=0.0).value
    return WeakValue(direct, re, im, den)


def weak_spin_from_intensities(table: IntensityTable, alpha: float,
                               eps_overlap: float = EPS_OVERLAP,
                               n_counts: Optional[int] = None) -> WeakValue:
    """Real and imaginary weak value of the path operator from six intensities.

    With ``n_counts`` (counts per spin axis) the standard errors of a
    shot-noise measurement are attached by first-order propagation.

    Raises
    ------
    DegenerateAngle
        For ``alpha`` outside ``(0, pi)``.
    OrthogonalSelection
        When the implied path overlap ``sqrt(I_x+)/cos(alpha/2)`` is below
        ``eps_overlap``.
    """
    _check_alpha(alpha)
    half_cot = 0.5 / np.tan(alpha / 2)
    ix = table.x_plus
    if ix <= 0 or np.sqrt(ix) / np.cos(alpha / 2) <= eps_overlap:
        raise OrthogonalSelection(f"I_x+ = {ix:.3g}: post-selection orthogonal to the path state")
    dy = table.y_plus - table.y_minus
    dz = table.z_plus - table.z_minus
    re = half_cot * dy / ix
    im = half_cot * dz / ix
    re_se = im_se = None
    if n_counts:
        var_x = ix * (1 - ix) / n_counts
        var_y = (table.y_plus + table.y_minus - dy ** 2) / n_counts
        var_z = (table.z_plus + table.z_minus - dz ** 2) / n_counts
        re_se = float(abs(half_cot) * np.sqrt(var_y / ix ** 2 + dy ** 2 * var_x / ix ** 4))
        im_se = float(abs(half_cot) * np.sqrt(var_z / ix ** 2 + dz ** 2 * var_x / ix ** 4))
    return WeakValue(complex(re, im), float(re), float(im), float(ix), re_se, im_se)


def verify_triple_correspondence(cfg: InterferometerConfig,
                                 table: Optional[IntensityTable] = None) -> dict:
    """Residuals of the flux/commutator and intensity identities for probe ``x+``.

    Keys: ``flux_weak``, ``commutator_weak`` (expectations against
    ``|<P_i|P_f>|^2 cos^2(alpha/2)`` times the weak value), ``flux_intensity``,
    ``commutator_intensity`` (against ``cot(alpha/2)/2`` times the intensity
    differences) and ``x_plus`` (``I_x+`` against its closed form).
    """
    _check_alpha(cfg.alpha)
    psi = evolve_preselected(cfg).amplitudes
    triple = build_triple(_PATH_OPERATOR, post_selection_state(cfg, "x+"))
    flux = float(np.vdot(psi, triple.flux @ psi).real)
    comm = float(np.vdot(psi, triple.commutator @ psi).real)
    w = direct_weak_value(cfg)
    weight = abs(cfg.overlap) ** 2 * np.cos(cfg.alpha / 2) ** 2
    table = intensity_table(cfg) if table is None else table
    half_cot = 0.5 / np.tan(cfg.alpha / 2)
    return {
        "flux_weak": abs(flux - weight * w.real),
        "commutator_weak": abs(comm - weight * w.imag),
        "flux_intensity": abs(flux - half_cot * (table.y_plus - table.y_minus)),
        "commutator_intensity": abs(comm - half_cot * (table.z_plus - table.z_minus)),
        "x_plus": abs(table.x_plus - weight),
    }


def sample_intensity_table(table: IntensityTable, n_counts: int, seed) -> IntensityTable:
    """Shot-noise version of ``table``.

    Each spin axis is an independent run of ``n_counts`` particles landing
    in ``+``, ``-`` or neither (path not post-selected).
    """
    rng = np.random.default_rng(seed)
    out = []
    for plus, minus in ((table.x_plus, table.x_minus), (table.y_plus, table.y_minus),
                        (table.z_plus, table.z_minus)):
        rest = max(0.0, 1.0 - plus - minus)
        p = np.array([plus, minus, rest])
        counts = rng.multinomial(n_counts, p / p.sum())
        out.extend(counts[:2] / n_counts)
    return IntensityTable(*map(float, out))


SWEEP_COLUMNS = ("alpha", "phi", "I_x+", "I_x-", "I_y+", "I_y-", "I_z+", "I_z-",
                 "Re_w", "Im_w", "Re_w_direct", "Im_w_direct", "residual",
                 "Re_w_noisy", "Im_w_noisy", "Re_w_stderr", "Im_w_stderr")


def sweep(alphas, phis, path_pre=(_R2, _R2), n_counts: Optional[int] = None,
          seed: int = 0) -> list:
    """Rows over an ``(alpha, phi)`` grid with ``P_f = (cos phi, sin phi)``.

    ``residual`` is the largest disagreement between the three evaluation
    routes, relative to ``max(1, |w|)`` for the weak value itself.

    Points with orthogonal post-selection or a degenerate angle are skipped.
    With ``n_counts`` each row also carries a shot-noise estimate; point
    ``j`` of the sweep uses the seed sequence ``(seed, j)``.
    """
    rows = []
    j = 0
    for alpha in np.atleast_1d(alphas):
        for phi in np.atleast_1d(phis):
            cfg = InterferometerConfig(float(alpha), path_pre, (np.cos(phi), np.sin(phi)))
            try:
                table = intensity_table(cfg)
                est = weak_spin_from_intensities(table, cfg.alpha)
                direct = direct_weak_value(cfg)
                residual = max(verify_triple_correspondence(cfg, table).values())
            except (OrthogonalSelection, DegenerateAngle):
                continue
            # weak values grow without bound near orthogonality; compare relatively
            residual = max(residual, abs(est.value - direct) / max(1.0, abs(direct)))
            row = dict(zip(SWEEP_COLUMNS, (float(alpha), float(phi), table.x_plus,
                                           table.x_minus, table.y_plus, table.y_minus,
                                           table.z_plus, table.z_minus, est.re_channel,
                                           est.im_channel, direct.real, direct.imag, residual)))
            if n_counts:
                noisy = sample_intensity_table(table, n_counts, (seed, j))
                try:
                    nest = weak_spin_from_intensities(noisy, cfg.alpha, n_counts=n_counts)
                    row.update({"Re_w_noisy": nest.re_channel, "Im_w_noisy": nest.im_channel,
                                "Re_w_stderr": nest.re_stderr, "Im_w_stderr": nest.im_stderr})
                except OrthogonalSelection:
                    pass
            rows.append(row)
            j += 1
    return rows


def write_sweep_csv(rows, path, header: Optional[str] = None):
    """Write sweep rows; ``header`` becomes a leading ``# ...`` comment line."""
    with open(path, "w", newline="") as fh:
        if header:
            fh.write(f"# {header}\n")
        w = csv.DictWriter(fh, fieldnames=SWEEP_COLUMNS, restval="")
        w.writeheader()
        for row in rows:
            w.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in row.items()})
