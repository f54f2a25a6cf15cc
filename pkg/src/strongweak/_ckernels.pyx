# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled versions of the kernels in ``_kernels_py``."""
import numpy as np
cimport numpy as cnp
from libc.math cimport floor, isfinite, NAN

cnp.import_array()

DEF OK = 0
DEF NODE = 1
DEF OFF_GRID = 2


cdef inline Py_ssize_t _upper(const double[::1] a, double v) nogil:
    # first index with a[idx] > v (searchsorted side='right')
    cdef Py_ssize_t lo = 0, hi = a.shape[0], mid
    while lo < hi:
        mid = (lo + hi) >> 1
        if a[mid] <= v:
            lo = mid + 1
        else:
            hi = mid
    return lo


def sample_piecewise(cdf, left, double width, u_bin, u_jitter):
    cdef const double[::1] c = np.ascontiguousarray(cdf, dtype=np.float64)
    cdef const double[::1] l = np.ascontiguousarray(left, dtype=np.float64)
    cdef const double[::1] ub = np.ascontiguousarray(u_bin, dtype=np.float64)
    cdef const double[::1] uj = np.ascontiguousarray(u_jitter, dtype=np.float64)
    cdef Py_ssize_t n = ub.shape[0], i, idx, nl = l.shape[0]
    cdef double total = c[c.shape[0] - 1]
    out = np.empty(n, dtype=np.float64)
    cdef double[::1] o = out
    with nogil:
        for i in range(n):
            idx = _upper(c, ub[i] * total) - 1
            if idx < 0:
                idx = 0
            elif idx > nl - 1:
                idx = nl - 1
            o[i] = l[idx] + uj[i] * width
    return out


def histogram(values, edges):
    cdef const double[::1] v = np.ascontiguousarray(values, dtype=np.float64)
    cdef const double[::1] e = np.ascontiguousarray(edges, dtype=np.float64)
    cdef Py_ssize_t nb = e.shape[0] - 1, i, idx
    cdef double first = e[0], last = e[nb], x
    cdef double inv_width = nb / (last - first) if last > first else 0.0
    counts = np.zeros(nb, dtype=np.int64)
    cdef cnp.int64_t[::1] cnt = counts
    cdef bint uniform = nb > 0 and np.allclose(np.diff(edges), (last - first) / nb,
                                               rtol=1e-9, atol=0.0)
    with nogil:
        for i in range(v.shape[0]):
            x = v[i]
            if not (first <= x <= last):
                continue
            if x == last:
                idx = nb - 1
            elif uniform:
                # arithmetic guess, then walk to the bin searchsorted would pick
                idx = <Py_ssize_t>((x - first) * inv_width)
                if idx > nb - 1:
                    idx = nb - 1
                while idx > 0 and x < e[idx]:
                    idx -= 1
                while idx < nb - 1 and x >= e[idx + 1]:
                    idx += 1
            else:
                idx = _upper(e, x) - 1
            cnt[idx] += 1
    return counts


cdef inline double _velocity(const double* fa, const double* fb, double wa,
                             double x, double x_min, double dx, Py_ssize_t n,
                             cnp.int64_t* status) nogil:
    cdef double u, s, w0, w1, w2, w3, va, vb, v
    cdef Py_ssize_t i
    if not isfinite(x):
        if status[0] == OK:
            status[0] = OFF_GRID
        return NAN
    u = (x - x_min) / dx
    i = <Py_ssize_t>floor(u)
    s = u - i
    if i < 1 or i > n - 3:
        if status[0] == OK:
            status[0] = OFF_GRID
        return NAN
    w0 = -s * (s - 1.0) * (s - 2.0) / 6.0
    w1 = (s + 1.0) * (s - 1.0) * (s - 2.0) / 2.0
    w2 = -(s + 1.0) * s * (s - 2.0) / 2.0
    w3 = (s + 1.0) * s * (s - 1.0) / 6.0
    va = w0 * fa[i - 1] + w1 * fa[i] + w2 * fa[i + 1] + w3 * fa[i + 2]
    vb = w0 * fb[i - 1] + w1 * fb[i] + w2 * fb[i + 1] + w3 * fb[i + 2]
    v = wa * va + (1.0 - wa) * vb
    if not isfinite(v):
        if status[0] == OK:
            status[0] = NODE
        return NAN
    return v


def integrate_trajectories(x0, times, velocity, double x_min, double dx, int substeps):
    cdef const double[::1] t = np.ascontiguousarray(times, dtype=np.float64)
    cdef const double[:, ::1] vel = np.ascontiguousarray(velocity, dtype=np.float64)
    cdef Py_ssize_t nt = vel.shape[0], n = vel.shape[1]
    xs0 = np.array(x0, dtype=np.float64).ravel()
    cdef Py_ssize_t m = xs0.shape[0], p, k, j
    out = np.empty((nt, m), dtype=np.float64)
    status = np.zeros(m, dtype=np.int64)
    cdef double[:, ::1] o = out
    cdef cnp.int64_t[::1] st = status
    cdef double[::1] xv = xs0
    # stage-major sweeps over trajectories keep independent work adjacent,
    # which pipelines far better than one trajectory's serial RK chain
    scratch = np.empty((4, m), dtype=np.float64)
    cdef double[:, ::1] sc = scratch
    cdef double* xc = &sc[0, 0]
    cdef double* k1 = &sc[1, 0]
    cdef double* k2 = &sc[2, 0]
    cdef double* k3 = &sc[3, 0]
    cdef double span, h, a0, am, a1, k4
    cdef const double* fa
    cdef const double* fb
    for p in range(m):
        o[0, p] = xv[p]
        xc[p] = xv[p]
    for k in range(nt - 1):
        fa = &vel[k, 0]
        fb = &vel[k + 1, 0]
        span = t[k + 1] - t[k]
        h = span / substeps
        with nogil:
            for j in range(substeps):
                a0 = j * h / span
                am = (j + 0.5) * h / span
                a1 = (j + 1.0) * h / span
                for p in range(m):
                    if st[p] == OK:
                        k1[p] = _velocity(fa, fb, 1.0 - a0, xc[p], x_min, dx, n, &st[p])
                for p in range(m):
                    if st[p] == OK:
                        k2[p] = _velocity(fa, fb, 1.0 - am, xc[p] + 0.5 * h * k1[p], x_min, dx, n, &st[p])
                for p in range(m):
                    if st[p] == OK:
                        k3[p] = _velocity(fa, fb, 1.0 - am, xc[p] + 0.5 * h * k2[p], x_min, dx, n, &st[p])
                for p in range(m):
                    if st[p] == OK:
                        k4 = _velocity(fa, fb, 1.0 - a1, xc[p] + h * k3[p], x_min, dx, n, &st[p])
                        xc[p] = xc[p] + h / 6.0 * (k1[p] + 2.0 * k2[p] + 2.0 * k3[p] + k4)
                    if st[p] != OK:
                        xc[p] = NAN
            for p in range(m):
                o[k + 1, p] = xc[p]
    return out, status
