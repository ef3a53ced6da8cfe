"""Time the compiled kernels against the numpy fallback.

    python benchmarks/bench_kernels.py [--repeat 5]

Prints one row per workload: best wall time of each backend, the speedup,
and the largest relative difference between the two results.
"""

import argparse
import time

import numpy as np

from rmtcompound import _kernels_py as pure

try:
    from rmtcompound import _kernels as compiled
except ImportError:  # extension not built
    compiled = None


def _workloads(rng):
    n = 2000
    y = rng.uniform(0.0, 50.0, n)
    x = rng.uniform(0.01, 80.0, n)
    z = rng.uniform(-0.5, 0.5, n)
    return [
        ("2F1 Euler integral (AA density)", "log_beta_integral",
         (336.5, 2.66, -241.6, y, 0.0, 0.0)),
        ("U integral (GA/AG density)", "log_beta_integral",
         (3.0, 1.5, 0.0, 1.0, -x, 0.0)),
        ("1F1 Euler integral", "log_beta_integral",
         (1.5, 4.0, 0.0, 1.0, 0.0, rng.uniform(-100, 100, n))),
        ("2F1 series |z| <= 0.5", "series_2f1", (2.5, -3.7, 6.1, z)),
        ("1F1 series", "series_1f1", (-7.5, 2.5, rng.uniform(-20, 20, n))),
    ]


def _best(fn, args, repeat):
    best, out = np.inf, None
    for _ in range(repeat):
        t = time.perf_counter()
        out = fn(*args)
        best = min(best, time.perf_counter() - t)
    return best, out


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--seed", type=int, default=1)
    args = ap.parse_args()
    rng = np.random.default_rng(args.seed)
    print(f"{'workload':36s} {'numpy [ms]':>11s} {'compiled [ms]':>14s} {'speedup':>8s} {'max diff':>9s}")
    for label, name, wl_args in _workloads(rng):
        tp, rp = _best(getattr(pure, name), wl_args, args.repeat)
        if compiled is None:
            print(f"{label:36s} {tp * 1e3:11.2f} {'n/a':>14s}")
            continue
        tc, rc = _best(getattr(compiled, name), wl_args, args.repeat)
        diff = float(np.nanmax(np.abs(np.asarray(rp[0]) - np.asarray(rc[0]))
                               / np.maximum(1.0, np.abs(np.asarray(rp[0])))))
        print(f"{label:36s} {tp * 1e3:11.2f} {tc * 1e3:14.2f} {tp / tc:8.1f} {diff:9.1e}")


if __name__ == "__main__":
    main()
