"""Hot loops behind the norm scans, with a numba route and a plain numpy route.

Set ``CYLPAR_DISABLE_NUMBA=1`` to force the numpy route (also used when numba
is not importable). Both routes compute the same quantities; the benchmark in
``benchmarks/bench_kernels.py`` times them against each other.
"""
from __future__ import annotations

import os

import numpy as np

_DISABLED = os.environ.get("CYLPAR_DISABLE_NUMBA", "").strip().lower() in {"1", "true", "yes"}

try:
    if _DISABLED:
        raise ImportError("numba disabled by CYLPAR_DISABLE_NUMBA")
    from numba import njit

    HAVE_NUMBA = True
except ImportError:
    HAVE_NUMBA = False

BACKEND = "numba" if HAVE_NUMBA else "numpy"

# n * len(centers) at or below which the numba direct sum beats the FFT route
DIRECT_SUM_LIMIT = 8192


def window_integrals_numpy(values: np.ndarray, half: int) -> np.ndarray:
    """Periodic trapezoid sums over nodes c-half..c+half for every node c.

    The result is in units of dx (multiply by dx to get the integral).
    """
    n = values.shape[0]
    ext = np.concatenate([values[n - half:], values, values[:half]])
    csum = np.concatenate([[0.0], np.cumsum(ext)])
    width = 2 * half + 1
    total = csum[width:width + n] - csum[:n]
    left = ext[:n]
    right = ext[width - 1:width - 1 + n]
    return total - 0.5 * (left + right)


def circular_weighted_sums_numpy(values: np.ndarray, kernel: np.ndarray,
                                 centers: np.ndarray) -> np.ndarray:
    """out[i] = sum_k kernel[(k - centers[i]) mod n] * values[k].

    ``kernel`` must be symmetric (kernel[m] == kernel[-m]), which holds for
    every weight built from a periodic distance.
    """
    n = values.shape[0]
    conv = np.fft.irfft(np.fft.rfft(values) * np.fft.rfft(kernel), n=n)
    return conv[centers]


if HAVE_NUMBA:

    @njit(cache=True)
    def window_integrals_numba(values, half):
        n = values.shape[0]
        out = np.empty(n)
        acc = 0.0
        for m in range(-half, half + 1):
            acc += values[m % n]
        for c in range(n):
            lo = values[(c - half) % n]
            hi = values[(c + half) % n]
            out[c] = acc - 0.5 * (lo + hi)
            # slide the window one node to the right
            acc += values[(c + half + 1) % n] - lo
        return out

    @njit(cache=True)
    def circular_weighted_sums_numba(values, kernel, centers):
        n = values.shape[0]
        out = np.empty(centers.shape[0])
        for i in range(centers.shape[0]):
            c = centers[i]
            s = 0.0
            for k in range(n):
                s += kernel[(k - c) % n] * values[k]
            out[i] = s
        return out

    window_integrals = window_integrals_numba

    def circular_weighted_sums(values, kernel, centers):
        # the direct sum costs n per center; the FFT route wins beyond a few thousand terms
        if values.shape[0] * centers.shape[0] <= DIRECT_SUM_LIMIT:
            return circular_weighted_sums_numba(values, kernel, centers)
        return circular_weighted_sums_numpy(values, kernel, centers)
else:
    window_integrals_numba = None
    circular_weighted_sums_numba = None
    window_integrals = window_integrals_numpy
    circular_weighted_sums = circular_weighted_sums_numpy
