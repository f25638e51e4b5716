"""Time the compiled kernels against the NumPy fallback.

    python benchmarks/bench_kernels.py [--repeat 3] [--regions 7]
"""
import argparse
import timeit

import numpy as np

from rsdcm import _kernels
from rsdcm.balloon import BalloonParams, _param_matrix


def workloads(n, rng):
    # one Monte-Carlo run: 100 s burn-in plus 300 scans at 40 sub-steps each
    K = 2000 + 300 * 40
    x = np.ascontiguousarray(0.05 * rng.standard_normal((K, n)))
    P = _param_matrix([BalloonParams()] * n, n)
    F = np.linalg.qr(rng.standard_normal((2 * n, 2 * n)))[0] * 0.95
    u = rng.standard_normal((K, 2 * n))
    return {
        "balloon_rk4": lambda be: be.balloon_rk4(x, 0.05, P),
        "linear_recursion": lambda be: be.linear_recursion(F, u, np.zeros(2 * n), 1),
    }


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--regions", type=int, default=7)
    args = ap.parse_args(argv)
    rng = np.random.default_rng(0)
    jobs = workloads(args.regions, rng)
    backends = _kernels.available_backends()
    print(f"{'kernel':<18}" + "".join(f"{b:>12}" for b in backends) + f"{'speedup':>10}")
    for name, job in jobs.items():
        times = {}
        for b in backends:
            mod = _kernels.get_backend(b)
            times[b] = min(timeit.repeat(lambda: job(mod), number=1, repeat=args.repeat))
        row = f"{name:<18}" + "".join(f"{times[b]:>11.4f}s" for b in backends)
        if "cython" in times:
            row += f"{times['python'] / times['cython']:>9.1f}x"
        print(row)


if __name__ == "__main__":
    main()
