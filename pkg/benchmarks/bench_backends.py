"""Time the numba kernels against the pure-numpy fallback.

Each workload goes through the public API; the backend is switched with the
``SKILLFLOW_DISABLE_NUMBA`` flag, which is read on every call. Results of the
two backends are compared as well, since they are meant to agree bit for bit.

    python3 benchmarks/bench_backends.py [--repeat 3] [--quick]
"""

import argparse
import os
import time

import numpy as np

import skillflow as sf
from skillflow.config import DISABLE_NUMBA_ENV
from skillflow.separatrix import cell_centres

P = sf.DEFAULT_PARAMS


def ode(scale):
    tr = sf.integrate_ode(P, sf.PhaseState(0.4, 0.3), 20.0 * scale, 1e-3)
    return np.stack([tr.theta, tr.p])


def classify(scale):
    n = int(11 * scale) or 1
    th, pp = np.meshgrid(cell_centres(n), cell_centres(n), indexing="ij")
    labels = sf.classify_many(P, th.ravel(), pp.ravel(), t_max=200.0)
    return np.array([lab.value for lab in labels])


def separatrix(scale):
    sep = sf.compute_separatrix(P)
    return np.stack([sep.theta, sep.p])


def discrete(scale):
    tr = sf.simulate_discrete(P, sf.PhaseState(0.4, 0.3), sf.DiscreteSimConfig.for_horizon(1e-3, 5.0 * scale, seed=1))
    return np.stack([tr.theta, tr.p])


def sde_basin(scale):
    n = max(2, int(5 * scale))
    grid = sf.basin_grid(P, cell_centres(n), cell_centres(n), sf.SdeMethod(0.1, n_samples=20, t_end=20.0))
    return grid.cells.astype(float)


WORKLOADS = {
    "ode 20k steps": ode,
    "classify grid": classify,
    "separatrix": separatrix,
    "discrete rounds": discrete,
    "sde basin": sde_basin,
}


def timed(fn, scale, repeat):
    best, out = float("inf"), None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn(scale)
        best = min(best, time.perf_counter() - t0)
    return best, out


def run(backend, fn, scale, repeat):
    if backend == "numpy":
        os.environ[DISABLE_NUMBA_ENV] = "1"
    else:
        os.environ.pop(DISABLE_NUMBA_ENV, None)
    try:
        return timed(fn, scale, repeat)
    finally:
        os.environ.pop(DISABLE_NUMBA_ENV, None)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--quick", action="store_true", help="shrink every workload")
    args = ap.parse_args()
    scale = 0.25 if args.quick else 1.0

    # warm-up so JIT compilation (or cache loading) is not timed
    for fn in WORKLOADS.values():
        run("numba", fn, 0.05, 1)

    print(f"{'workload':<18}{'numba [s]':>12}{'numpy [s]':>12}{'speedup':>10}  identical")
    for name, fn in WORKLOADS.items():
        t_nb, a = run("numba", fn, scale, args.repeat)
        t_np, b = run("numpy", fn, scale, args.repeat)
        same = a.shape == b.shape and np.array_equal(a, b)
        print(f"{name:<18}{t_nb:>12.4f}{t_np:>12.4f}{t_np / t_nb:>9.1f}x  {same}")


if __name__ == "__main__":
    main()
