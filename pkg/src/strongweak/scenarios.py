"""Scenario runners behind the command line.

Each runner takes a validated config dict, an :class:`Emitter` (which may
discard output, as ``verify`` does) and a ``reduced`` flag, and returns a
list of :class:`Check` results.  Module errors are re-raised as
:class:`~strongweak.errors.ScenarioError` tagged with the operation that
failed.
"""
from __future__ import annotations

import contextlib
import csv
import hashlib
import io
import os
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy import stats

from . import bohmian, spin, tof
from .errors import ConfigError, DegenerateAngle, ScenarioError, StrongWeakError
from .evolution import PropagatorConfig, propagate
from .state import (CoherentStateSpec, Grid1D, PhysicalParams, Potential,
                    prepare_coherent_state)
from .weak import momentum_weak_field, weak_value_exact, weak_value_from_strong

SCENARIOS = ("finite_dim", "tof", "bohmian", "spin")


@dataclass
class Check:
    name: str
    value: float
    limit: float
    passed: bool
    kind: str = "max"   # "max": value <= limit; "min": value >= limit

    def as_dict(self):
        return {"value": _jsonable(self.value), "limit": self.limit, "kind": self.kind,
                "passed": bool(self.passed)}


def _jsonable(v):
    v = float(v)
    return v if np.isfinite(v) else repr(v)


def upper(name, value, limit):
    return Check(name, float(value), float(limit), bool(value <= limit), "max")


def lower(name, value, limit):
    return Check(name, float(value), float(limit), bool(value >= limit), "min")


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, np.integer):
        return str(int(v))
    return str(v)


class Emitter:
    """Collects output files; writes them when ``out_dir`` is set."""

    def __init__(self, out_dir: Optional[str], config_hash: str):
        self.out_dir = out_dir
        self.config_hash = config_hash
        self.files = {}

    def csv(self, name: str, columns, rows):
        buf = io.StringIO()
        buf.write(f"# config_hash: {self.config_hash}\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(columns)
        for row in rows:
            w.writerow([_fmt(v) for v in row])
        data = buf.getvalue().encode()
        self.files[name] = hashlib.sha256(data).hexdigest()
        if self.out_dir is not None:
            with open(os.path.join(self.out_dir, name), "wb") as fh:
                fh.write(data)


@contextlib.contextmanager
def stage(location: str):
    """Re-raise package errors as :class:`ScenarioError` naming ``location``."""
    try:
        yield
    except (ScenarioError, ConfigError):
        raise
    except StrongWeakError as exc:
        raise ScenarioError(f"{type(exc).__name__}: {exc}", location, exc) from exc


# -- config access ----------------------------------------------------------------

def section(cfg: dict, name: str, required: bool = True) -> dict:
    if name not in cfg or cfg[name] is None:
        if required:
            raise ConfigError(f"missing required field '{name}'")
        return {}
    if not isinstance(cfg[name], dict):
        raise ConfigError(f"field '{name}' must be a mapping")
    return cfg[name]


def number(sec: dict, key: str, where: str, default=None, kind=float):
    if key not in sec or sec[key] is None:
        if default is None:
            raise ConfigError(f"missing required field '{where}.{key}'")
        return default
    try:
        return kind(float(sec[key])) if kind is int else kind(sec[key])
    except (TypeError, ValueError):
        raise ConfigError(f"field '{where}.{key}' must be a number, got {sec[key]!r}") from None


def number_list(value, where: str):
    """A list of numbers, or ``{start, stop, num}`` for an evenly spaced range."""
    if isinstance(value, dict):
        return np.linspace(number(value, "start", where), number(value, "stop", where),
                           number(value, "num", where, kind=int))
    try:
        return np.array([float(v) for v in np.atleast_1d(value)], dtype=float)
    except (TypeError, ValueError):
        raise ConfigError(f"field '{where}' must be a number list or range") from None


def complex_vector(value, where: str):
    out = []
    for v in value:
        if isinstance(v, (list, tuple)) and len(v) == 2:
            out.append(complex(float(v[0]), float(v[1])))
        else:
            try:
                out.append(complex(str(v).replace(" ", "")))
            except ValueError:
                raise ConfigError(f"field '{where}' has a bad component {v!r}") from None
    return np.array(out)


def seed_of(cfg: dict, needed: bool):
    if "seed" not in cfg or cfg["seed"] is None:
        if needed:
            raise ConfigError("missing required field 'seed' (sampling requested)")
        return None
    try:
        return int(cfg["seed"])
    except (TypeError, ValueError):
        raise ConfigError(f"field 'seed' must be an integer, got {cfg['seed']!r}") from None


def _build(what, fn, *args, **kw):
    try:
        return fn(*args, **kw)
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"invalid {what}: {exc}") from exc


def physics_of(cfg) -> PhysicalParams:
    sec = section(cfg, "physics", required=False)
    return _build("physics", PhysicalParams, number(sec, "hbar", "physics", 1.0),
                  number(sec, "mass", "physics", 1.0))


def grid_of(cfg) -> Grid1D:
    sec = section(cfg, "grid")
    return _build("grid", Grid1D, number(sec, "x_min", "grid"), number(sec, "x_max", "grid"),
                  number(sec, "n_points", "grid", kind=int))


def potential_of(cfg, grid) -> Potential:
    sec = section(cfg, "potential", required=False)
    kind = sec.get("kind", "free")
    if kind == "free":
        return Potential.free(grid)
    if kind in ("gaussian_barrier", "eckart"):
        ctor = getattr(Potential, kind)
        return _build("potential", ctor, grid, number(sec, "height", "potential"),
                      number(sec, "width", "potential"), number(sec, "center", "potential", 0.0))
    raise ConfigError(f"unknown potential kind {kind!r} (free, gaussian_barrier, eckart)")


def state_of(cfg, grid, params):
    sec = section(cfg, "state")
    spec = _build("state", CoherentStateSpec, number(sec, "gamma", "state"),
                  number(sec, "center", "state"), number(sec, "momentum", "state"))
    with stage("state.prepare_coherent_state"):
        return prepare_coherent_state(spec, grid, params)


def propagation_of(cfg) -> PropagatorConfig:
    sec = section(cfg, "propagation")
    return _build("propagation", PropagatorConfig, number(sec, "dt", "propagation"),
                  number(sec, "t_max", "propagation"),
                  number(sec, "boundary_density_threshold", "propagation", 1e-8),
                  number(sec, "record_stride", "propagation", 1, kind=int))


def _evolve(cfg):
    params = physics_of(cfg)
    grid = grid_of(cfg)
    pot = potential_of(cfg, grid)
    prop = propagation_of(cfg)
    psi0 = state_of(cfg, grid, params)
    with stage("evolution.propagate"):
        record = propagate(psi0, pot, prop, params)
    return record


def _record_checks(record):
    return [upper("norm_drift", record.norm_drift, 1e-10),
            upper("relative_energy_drift", record.relative_energy_drift, 1e-8)]


def validate(cfg: dict):
    """Check the sections a scenario needs without running it."""
    if not isinstance(cfg, dict):
        raise ConfigError("config must be a mapping")
    scenario = cfg.get("scenario")
    if scenario not in SCENARIOS:
        raise ConfigError(f"field 'scenario' must be one of {SCENARIOS}, got {scenario!r}")
    if scenario in ("tof", "bohmian"):
        physics_of(cfg)
        grid = grid_of(cfg)
        potential_of(cfg, grid)
        section(cfg, "state")
        propagation_of(cfg)
    protocol = section(cfg, "protocol", required=scenario in ("tof", "spin"))
    if scenario == "tof":
        if "detectors" not in protocol:
            raise ConfigError("missing required field 'protocol.detectors'")
        seed_of(cfg, needed=bool(protocol.get("n_events")))
    elif scenario == "bohmian":
        seed_of(cfg, needed=True)
    elif scenario == "finite_dim":
        seed_of(cfg, needed=True)
    elif scenario == "spin":
        for key in ("alpha", "phi"):
            if key not in protocol:
                raise ConfigError(f"missing required field 'protocol.{key}'")
        seed_of(cfg, needed=bool(protocol.get("n_counts")))
    return scenario


# -- finite-dimensional identity ------------------------------------------------------

def random_instance(rng, dim: int, hermitian: bool, min_overlap: float = 1e-3):
    """Random operator and normalised pre/post states with ``|<phi|psi>| > min_overlap``."""
    def unit():
        v = rng.normal(size=dim) + 1j * rng.normal(size=dim)
        return v / np.linalg.norm(v)

    a = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    if hermitian:
        a = 0.5 * (a + a.conj().T)
    psi = unit()
    while True:
        phi = unit()
        if abs(np.vdot(phi, psi)) > min_overlap:
            return a, psi, phi


def run_finite_dim(cfg, emit: Emitter, reduced=False):
    sec = section(cfg, "protocol", required=False)
    n = number(sec, "n_instances", "protocol", 1000, kind=int)
    lo = number(sec, "dim_min", "protocol", 2, kind=int)
    hi = number(sec, "dim_max", "protocol", 8, kind=int)
    min_overlap = number(sec, "min_overlap", "protocol", 1e-3)
    tol = number(sec, "tolerance", "protocol", 1e-12)
    if not 1 <= lo <= hi:
        raise ConfigError("protocol.dim_min/dim_max must satisfy 1 <= dim_min <= dim_max")
    rng = np.random.default_rng(seed_of(cfg, needed=True))
    rows = []
    worst = 0.0
    for i in range(n):
        dim = int(rng.integers(lo, hi + 1))
        herm = bool(i % 2 == 0)
        a, psi, phi = random_instance(rng, dim, herm, min_overlap)
        with stage("weak.weak_value_from_strong"):
            direct = weak_value_exact(a, psi, phi).value
            strong = weak_value_from_strong(a, psi, phi)
        res = max(abs(strong.re_channel - direct.real), abs(strong.im_channel - direct.imag))
        worst = max(worst, res)
        rows.append((i, dim, int(herm), direct.real, direct.imag, strong.re_channel,
                     strong.im_channel, res))
    emit.csv("instances.csv", ("index", "dim", "hermitian", "re_direct", "im_direct",
                               "re_strong", "im_strong", "residual"), rows)
    return [upper("triple_identity_max_residual", worst, tol)]


# -- spin interferometer ------------------------------------------------------------------

def run_spin(cfg, emit: Emitter, reduced=False):
    sec = section(cfg, "protocol")
    alphas = number_list(sec["alpha"], "protocol.alpha")
    phis = number_list(sec["phi"], "protocol.phi")
    path_pre = complex_vector(sec.get("path_pre", [2 ** -0.5, 2 ** -0.5]), "protocol.path_pre")
    n_counts = number(sec, "n_counts", "protocol", 0, kind=int)
    tol = number(sec, "tolerance", "protocol", 1e-12)
    seed = seed_of(cfg, needed=bool(n_counts))
    for a in alphas:
        if not 0.0 < a < np.pi:
            with stage("spin.weak_spin_from_intensities"):
                raise DegenerateAngle(f"alpha={float(a)!r} lies outside (0, pi)")
    with stage("spin.sweep"):
        rows = spin.sweep(alphas, phis, path_pre, n_counts or None, seed or 0)
    worst_completeness = 0.0
    in_range = True
    for r in rows:
        sums = (r["I_x+"] + r["I_x-"], r["I_y+"] + r["I_y-"], r["I_z+"] + r["I_z-"])
        worst_completeness = max(worst_completeness, max(sums) - min(sums))
        in_range &= all(0.0 <= r[k] <= 1.0 for k in ("I_x+", "I_x-", "I_y+", "I_y-", "I_z+", "I_z-"))
    emit.csv("sweep.csv", spin.SWEEP_COLUMNS,
             [[r.get(c, "") for c in spin.SWEEP_COLUMNS] for r in rows])
    worst = max((r["residual"] for r in rows), default=0.0)
    checks = [upper("three_route_residual", worst, tol),
              upper("completeness_spread", worst_completeness, tol),
              lower("intensities_in_unit_interval", float(in_range), 1.0),
              lower("points_evaluated", len(rows), 1)]
    return checks


# -- time of flight ---------------------------------------------------------------------------

def _tail_closed(rho, frac=1e-6):
    return rho >= frac * np.max(rho)


def run_tof(cfg, emit: Emitter, reduced=False):
    sec = section(cfg, "protocol")
    record = _evolve(cfg)
    params = record.params
    grid = record.grid
    detectors = number_list(sec["detectors"], "protocol.detectors")
    fd_step = number(sec, "fd_step", "protocol", grid.dx)
    tol = number(sec, "tolerance", "protocol", 1e-6)
    n_events = number(sec, "n_events", "protocol", 0, kind=int)
    if reduced:
        n_events = min(n_events, 100_000)
    click_step = number(sec, "click_fd_step", "protocol", 1.0)
    bins = number(sec, "bins", "protocol", 50, kind=int)
    coverage_min = number(sec, "coverage_min", "protocol", 0.99)
    seed = seed_of(cfg, needed=bool(n_events))

    checks = _record_checks(record)
    dist_cols, dist_data = ["t"], [record.times]
    wm_rows = []
    worst_re = worst_im = worst_mean = 0.0
    for x in detectors:
        with stage("tof.density_in_time"):
            dens = tof.density_in_time(record, x)
            flux = tof.flux_in_time(record, x)
        dist_cols += [f"rho_{x:g}", f"flux_{x:g}"]
        dist_data += [dens.values, flux.values]
        exact = tof.exact_weak_momentum_at(record, x)
        with stage("tof.infer_im_weak_momentum_fd"):
            re = tof.infer_re_weak_momentum(dens, flux, params)
            im = tof.infer_im_weak_momentum_fd(record, x, fd_step)
            rel = tof.verify_mean_time_relation(record, x, fd_step)
        ok = _tail_closed(dens.values) & np.isfinite(im)
        worst_re = max(worst_re, float(np.max(np.abs(re - exact.real)[ok])))
        worst_im = max(worst_im, float(np.max(np.abs(im - exact.imag)[ok])))
        worst_mean = max(worst_mean, rel.relative)
        for k in np.flatnonzero(ok):
            wm_rows.append((x, record.times[k], exact.real[k], exact.imag[k], re[k], im[k]))
    emit.csv("distributions.csv", dist_cols, np.column_stack(dist_data))
    emit.csv("weak_momentum.csv", ("detector_x", "t", "re_exact", "im_exact",
                                   "re_flux_ratio", "im_log_slope"), wm_rows)
    checks += [upper("re_protocol_max_error", worst_re, tol),
               upper("im_protocol_max_error", worst_im, tol),
               upper("mean_time_relation_relative", worst_mean, 1e-4)]

    if n_events:
        est_rows = []
        inside = total = 0
        for j, x in enumerate(detectors):
            samples = []
            for side, sign in enumerate((-1, 1)):
                xs = x + 0.5 * sign * click_step
                with stage("tof.sample_clicks"):
                    dist = tof.density_in_time(record, xs)
                    s = tof.sample_clicks(dist, n_events, [seed, j, side])
                samples.append(s)
                emit.csv(f"events_{x:g}_{'left' if side == 0 else 'right'}.csv",
                         ("t",), ((t,) for t in s.event_times))
            lo_q, hi_q = np.quantile(np.concatenate([s.event_times for s in samples]),
                                     [1e-3, 1 - 1e-3])
            with stage("tof.estimate_im_from_clicks"):
                slope = tof.log_norm_slope(record, x, click_step)
                est = tof.estimate_im_from_clicks(samples[0], samples[1], click_step, bins,
                                                  params.hbar, slope, (lo_q, hi_q))
            truth = np.interp(est.bin_centers, record.times, tof.exact_weak_momentum_at(record, x).imag)
            hit = np.abs(est.estimate - truth) <= 3 * est.stderr
            inside += int(hit.sum())
            total += hit.size
            est_rows += [(x, c, e, s, t) for c, e, s, t in
                         zip(est.bin_centers, est.estimate, est.stderr, truth)]
        emit.csv("click_estimate.csv", ("detector_x", "t", "im_estimate", "stderr", "im_exact"),
                 est_rows)
        checks.append(lower("click_coverage_3sigma", inside / max(total, 1), coverage_min))
    return checks


# -- Bohmian -------------------------------------------------------------------------------------

def _ks_equivariance(record, n, rng):
    grid = record.grid
    edges = np.concatenate(([grid.x[0] - 0.5 * grid.dx], grid.x + 0.5 * grid.dx))

    def cdf_of(rho):
        c = np.concatenate(([0.0], np.cumsum(rho)))
        return c / c[-1]

    c0 = cdf_of(record.densities[0])
    x0 = np.interp(rng.random(n), c0, edges)
    with stage("bohmian.integrate_ensemble"):
        xs, status = bohmian.integrate_ensemble(record, x0)
    cT = cdf_of(record.densities[-1])
    final = xs[-1][status == 0]
    res = stats.kstest(final, lambda x: np.interp(x, edges, cT))
    return x0, xs, status, res


def run_bohmian(cfg, emit: Emitter, reduced=False):
    sec = section(cfg, "protocol", required=False)
    n_traj = number(sec, "n_trajectories", "protocol", 10_000, kind=int)
    if reduced:
        n_traj = min(n_traj, 2000)
    starts = number_list(sec.get("trajectories", []), "protocol.trajectories")
    probes = number_list(sec.get("probe_x", []), "protocol.probe_x")
    ks_alpha = number(sec, "ks_alpha", "protocol", 0.01)
    rng = np.random.default_rng(seed_of(cfg, needed=True))

    record = _evolve(cfg)
    params = record.params
    checks = _record_checks(record)

    worst_fields = 0.0
    for k in (0, len(record) // 2, len(record) - 1):
        state = record.state(k)
        field = bohmian.polar_decompose(state, params)
        _, re, im, _ = momentum_weak_field(state, params)
        pb = bohmian.bohmian_momentum_field(field, params)
        po = bohmian.osmotic_momentum_field(field, params)
        ok = ~field.node_mask
        worst_fields = max(worst_fields, float(np.max(np.abs(pb - re)[ok])),
                           float(np.max(np.abs(po - im)[ok])))
    checks.append(upper("fields_match_weak_channels", worst_fields, 1e-10))

    x0, xs, status, ks = _ks_equivariance(record, n_traj, rng)
    checks.append(lower("equivariance_ks_pvalue", ks.pvalue, ks_alpha))
    ordered = xs[:, status == 0][:, np.argsort(x0[status == 0])]
    checks.append(lower("no_crossing", float(np.all(np.diff(ordered, axis=1) >= 0)), 1.0))
    emit.csv("ensemble.csv", ("index", "x0", "x_final", "status"),
             zip(range(len(x0)), x0, xs[-1], status))

    part = bohmian.energy_partition(record)
    checks.append(upper("energy_partition_relative_drift", part.relative_drift, 1e-7))
    emit.csv("energy_partition.csv", ("t", "kinetic_bohm", "internal_osmotic", "potential", "total"),
             zip(part.times, part.kinetic, part.internal, part.potential, part.total))

    hj, scale = bohmian.hamilton_jacobi_residual(record)
    checks.append(upper("hamilton_jacobi_relative", hj / scale, 1e-5))
    cont, cscale = bohmian.continuity_residual(record)
    checks.append(upper("continuity_relative", cont / cscale, 1e-6))
    ehr = bohmian.ehrenfest_check(record)
    checks.append(upper("ehrenfest_relative", ehr.residual / max(ehr.scale, 1e-300), 1e-6))

    for x in probes:
        with stage("bohmian.fixed_point_momentum_rate"):
            fr = bohmian.fixed_point_momentum_rate(record, x)
            mr = bohmian.material_momentum_rate(record, x)
        checks.append(upper(f"fixed_point_rate_relative_{x:g}", fr.residual / fr.scale, 1e-4))
        checks.append(upper(f"material_rate_relative_{x:g}", mr.residual / mr.scale, 1e-4))

    rows = []
    for i, start in enumerate(starts):
        with stage("bohmian.integrate_trajectory"):
            tr = bohmian.integrate_trajectory(record, start)
        rows += [(i, *r) for r in tr.rows()]
    if starts.size:
        emit.csv("trajectories.csv", ("trajectory", "t", "x", "p_bohm", "kinetic_bohm",
                                      "internal_osmotic", "potential", "quantum_potential"), rows)
    return checks


RUNNERS = {"finite_dim": run_finite_dim, "spin": run_spin, "tof": run_tof,
           "bohmian": run_bohmian}
