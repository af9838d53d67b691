"""Time the numba and numpy routes of the norm-scan kernels against each other.

Run with ``python benchmarks/bench_kernels.py [--repeat N]``; numba must be
importable (the numpy route is always available).
"""
import argparse
import timeit

import numpy as np

from cylpar import _kernels


def _best(fn, repeat: int) -> float:
    return min(timeit.repeat(fn, number=1, repeat=repeat))


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=5)
    parser.add_argument("--sizes", type=int, nargs="+", default=[256, 1024, 4096, 16384])
    args = parser.parse_args(argv)
    if not _kernels.HAVE_NUMBA:
        raise SystemExit("numba route unavailable (not installed or CYLPAR_DISABLE_NUMBA set)")

    rng = np.random.default_rng(0)
    print(f"{'kernel':<28} {'n':>6} {'centers':>7} {'numpy_s':>11} {'numba_s':>11} {'speedup':>8}")
    for n in args.sizes:
        vals = rng.random(n)
        half = n // 32
        kern = np.exp(-np.minimum(np.arange(n), n - np.arange(n)) / 16.0)
        # compile outside the timed region
        _kernels.window_integrals_numba(vals, half)
        _kernels.circular_weighted_sums_numba(vals, kern, np.arange(2, dtype=np.int64))
        t_np = _best(lambda: _kernels.window_integrals_numpy(vals, half), args.repeat)
        t_nb = _best(lambda: _kernels.window_integrals_numba(vals, half), args.repeat)
        print(f"{'window_integrals':<28} {n:>6} {n:>7} {t_np:11.3e} {t_nb:11.3e} {t_np / t_nb:8.2f}")
        for n_centers in (16, n):
            centers = np.linspace(0, n - 1, n_centers).astype(np.int64)
            t_np = _best(lambda: _kernels.circular_weighted_sums_numpy(vals, kern, centers), args.repeat)
            t_nb = _best(lambda: _kernels.circular_weighted_sums_numba(vals, kern, centers), args.repeat)
            print(f"{'circular_weighted_sums':<28} {n:>6} {n_centers:>7} "
                  f"{t_np:11.3e} {t_nb:11.3e} {t_np / t_nb:8.2f}")


if __name__ == "__main__":
    main()
