"""Compare the compiled and pure-numpy kernels.

    python3 benchmarks/bench_kernels.py [--repeat 3]

Prints the best wall time of each kernel for both backends and the speedup.
Both backends get identical inputs; their outputs are checked for agreement.
"""
import argparse
import time

import numpy as np

from strongweak import _kernels_py

try:
    from strongweak import _ckernels
except ImportError:  # extension not built
    _ckernels = None


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return min(times), out


def cases(rng):
    n = 1_000_000
    mesh = np.linspace(0.0, 30.0, 1501)
    dens = np.exp(-0.5 * ((mesh - 12.0) / 2.0) ** 2)
    dt = mesh[1] - mesh[0]
    cdf = np.concatenate(([0.0], np.cumsum(dens * dt)))
    u = rng.random((2, n))
    yield "sample_piecewise (1e6 draws)", lambda k: k.sample_piecewise(cdf, mesh - dt / 2, dt, u[0], u[1])

    values = rng.normal(12.0, 2.0, n)
    edges = np.linspace(6.0, 18.0, 51)
    yield "histogram (1e6 values, 50 bins)", lambda k: k.histogram(values, edges)

    n_points, n_times = 4096, 200
    x = np.linspace(-200.0, 200.0, n_points, endpoint=False)
    t = np.linspace(0.0, 4.0, n_times)
    vel = 5.0 + 0.1 * np.sin(0.05 * x)[None, :] * np.cos(t)[:, None]
    x0 = rng.uniform(-40.0, -20.0, 10_000)
    yield "integrate_trajectories (1e4 x 200 snapshots)", \
        lambda k: k.integrate_trajectories(x0, t, vel, -200.0, x[1] - x[0], 4)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()
    rng = np.random.default_rng(0)
    print(f"{'kernel':48s} {'numpy [s]':>10s} {'cython [s]':>11s} {'speedup':>8s}")
    for name, run in cases(rng):
        t_py, out_py = best_of(lambda: run(_kernels_py), args.repeat)
        if _ckernels is None:
            print(f"{name:48s} {t_py:10.4f} {'n/a':>11s}")
            continue
        t_c, out_c = best_of(lambda: run(_ckernels), args.repeat)
        a = out_py[0] if isinstance(out_py, tuple) else out_py
        b = out_c[0] if isinstance(out_c, tuple) else out_c
        if not np.allclose(a, b, rtol=1e-12, atol=1e-12, equal_nan=True):
            raise SystemExit(f"{name}: backends disagree")
        print(f"{name:48s} {t_py:10.4f} {t_c:11.4f} {t_py / t_c:7.1f}x")


if __name__ == "__main__":
    main()
