"""Pure numpy implementations of the hot kernels.

These define the reference semantics; the compiled versions in
``_ckernels`` must reproduce them (bit-for-bit for the sampler and the
histogram, to rounding for the trajectory integrator).
"""
import numpy as np

OK, NODE, OFF_GRID = 0, 1, 2


def sample_piecewise(cdf, left, width, u_bin, u_jitter):
    """Inverse-CDF draw from a piecewise-constant density.

    ``cdf`` has one more entry than ``left`` (cell left edges, common
    ``width``).  ``u_bin`` selects the cell, ``u_jitter`` the position inside.
    """
    cdf = np.asarray(cdf, dtype=float)
    target = np.asarray(u_bin, dtype=float) * cdf[-1]
    idx = np.searchsorted(cdf, target, side="right") - 1
    np.clip(idx, 0, len(left) - 1, out=idx)
    return np.asarray(left, dtype=float)[idx] + np.asarray(u_jitter, dtype=float) * width


def histogram(values, edges):
    """Counts per bin; bins are half-open except the last, as in ``np.histogram``."""
    values = np.asarray(values, dtype=float)
    edges = np.asarray(edges, dtype=float)
    nb = len(edges) - 1
    idx = np.searchsorted(edges, values, side="right") - 1
    idx[values == edges[-1]] = nb - 1
    keep = (idx >= 0) & (idx < nb)
    return np.bincount(idx[keep], minlength=nb).astype(np.int64)


def _interp(field_a, field_b, wa, x, x_min, dx, n, status):
    """Cubic-in-x, linear-in-t velocity for a vector of positions."""
    u = (x - x_min) / dx
    finite = np.isfinite(u)
    i = np.floor(np.where(finite, u, 0.0)).astype(np.int64)
    s = u - i
    bad = (i < 1) | (i > n - 3) | ~finite
    status[bad & (status == OK)] = OFF_GRID
    i = np.where(bad, 1, i)
    w = (-s * (s - 1.0) * (s - 2.0) / 6.0,
         (s + 1.0) * (s - 1.0) * (s - 2.0) / 2.0,
         -(s + 1.0) * s * (s - 2.0) / 2.0,
         (s + 1.0) * s * (s - 1.0) / 6.0)
    va = w[0] * field_a[i - 1] + w[1] * field_a[i] + w[2] * field_a[i + 1] + w[3] * field_a[i + 2]
    vb = w[0] * field_b[i - 1] + w[1] * field_b[i] + w[2] * field_b[i + 1] + w[3] * field_b[i + 2]
    v = wa * va + (1.0 - wa) * vb
    status[~np.isfinite(v) & (status == OK)] = NODE
    v[bad] = np.nan
    return v


def integrate_trajectories(x0, times, velocity, x_min, dx, substeps):
    """RK4 integration of ``dx/dt = v(x, t)`` through a sampled velocity field.

    ``velocity`` has shape ``(n_times, n_points)`` (NaN marks excluded nodes).
    Returns ``(xs, status)`` with ``xs`` of shape ``(n_times, n_traj)``;
    trajectories that hit a NaN node or leave the stencil range are frozen at
    NaN with ``status`` NODE or OFF_GRID.
    """
    x = np.array(x0, dtype=float)
    times = np.asarray(times, dtype=float)
    velocity = np.asarray(velocity, dtype=float)
    nt, n = velocity.shape
    status = np.zeros(x.shape, dtype=np.int64)
    out = np.empty((nt, x.size))
    out[0] = x
    for k in range(nt - 1):
        fa, fb = velocity[k], velocity[k + 1]
        span = times[k + 1] - times[k]
        h = span / substeps
        for j in range(substeps):
            a0 = j * h / span
            am = (j + 0.5) * h / span
            a1 = (j + 1.0) * h / span
            k1 = _interp(fa, fb, 1.0 - a0, x, x_min, dx, n, status)
            k2 = _interp(fa, fb, 1.0 - am, x + 0.5 * h * k1, x_min, dx, n, status)
            k3 = _interp(fa, fb, 1.0 - am, x + 0.5 * h * k2, x_min, dx, n, status)
            k4 = _interp(fa, fb, 1.0 - a1, x + h * k3, x_min, dx, n, status)
            x = x + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
            x[status != OK] = np.nan
        out[k + 1] = x
    return out, status
