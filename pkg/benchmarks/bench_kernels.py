"""Compare the compiled kernels with their pure-Python fallbacks.

    python3 benchmarks/bench_kernels.py [--repeat 5]
"""

import argparse
import time

import numpy as np

from rydfret import _kernels_py

try:
    from rydfret import _kernels
except ImportError:  # extension not built
    _kernels = None


def _best(fn, repeat):
    best = np.inf
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def cases(rng):
    n = 15
    A = rng.normal(size=(n, n))
    H = 0.5 * (A + A.T)
    psi = np.zeros(n, complex)
    psi[0] = 1.0
    times = np.linspace(0.0, 5.0, 11)
    dt = 0.05 / (2 * np.pi * np.linalg.norm(H, 2))
    steps = int(np.ceil(times[-1] / dt))
    # n* = 49, L = 0 on the sqrt(r) grid out to r = 2n(n + 15)
    x = np.arange(1, 7921) * 0.01
    g = 0.75 / x**2 - 8.0 + 4.0 / 49.0**2 * x**2
    return {
        f"rk4_propagate (dim {n}, {steps} steps)": lambda m: m.rk4_propagate(H, psi, times, dt),
        f"numerov_inward ({x.size} points)": lambda m: m.numerov_inward(g, 0.01, 1e-30, 2e-30),
    }


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)
    if _kernels is None:
        print("compiled extension not available; only the fallback can run")
    rng = np.random.default_rng(0)
    print(f"{'kernel':44s} {'python [ms]':>12s} {'cython [ms]':>12s} {'speedup':>8s} {'max diff':>10s}")
    for name, call in cases(rng).items():
        tp, ref = _best(lambda: call(_kernels_py), args.repeat)
        if _kernels is None:
            print(f"{name:44s} {tp * 1e3:12.2f} {'-':>12s}")
            continue
        tc, out = _best(lambda: call(_kernels), args.repeat)
        diff = np.max(np.abs(np.asarray(out) - np.asarray(ref)) / (np.max(np.abs(ref)) or 1.0))
        print(f"{name:44s} {tp * 1e3:12.2f} {tc * 1e3:12.3f} {tp / tc:8.1f} {diff:10.1e}")


if __name__ == "__main__":
    main()
