"""Timing comparison of the numba kernels against their pure-numpy twins.

Run as a script:

    python3 benchmarks/bench_kernels.py

Numbers are best-of-repeats wall times; the numba column includes a warm-up
call so JIT compilation is not billed to the measurement.
"""

import time

import numpy as np

from anharmonic import _kernels


def best_of(fn, repeats=5):
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def bench_case(name, np_fn, nb_fn, repeats=5):
    t_np = best_of(np_fn, repeats)
    if nb_fn is None:
        print(f"{name:34s} numpy {t_np*1e3:9.3f} ms   numba       (unavailable)")
        return
    nb_fn()  # warm-up / compile
    t_nb = best_of(nb_fn, repeats)
    print(f"{name:34s} numpy {t_np*1e3:9.3f} ms   numba {t_nb*1e3:9.3f} ms   "
          f"speedup {t_np/t_nb:5.2f}x")


def main():
    rng = np.random.default_rng(0)
    print(f"numba available: {_kernels.HAS_NUMBA}, active: {_kernels.USE_NUMBA}")

    for n in (512, 1024):
        w = np.abs(rng.standard_normal((n, n)))
        args21 = (w, 2.0, 1.0, False, False, 1e-2, 1e-3)
        bench_case(f"mixed_reduce {n}x{n} (p=2, q=1)",
                   lambda: _kernels.mixed_reduce_np(*args21),
                   (lambda: _kernels.mixed_reduce_nb(*args21)) if _kernels.HAS_NUMBA else None)
        args = (w, 1.5, 2.5, False, False, 1e-2, 1e-3)
        bench_case(f"mixed_reduce {n}x{n} (p,q general)",
                   lambda: _kernels.mixed_reduce_np(*args),
                   (lambda: _kernels.mixed_reduce_nb(*args)) if _kernels.HAS_NUMBA else None)
        args_inf = (w, 1.0, 2.0, True, False, 1e-2, 1e-3)
        bench_case(f"mixed_reduce {n}x{n} (p=INF)",
                   lambda: _kernels.mixed_reduce_np(*args_inf),
                   (lambda: _kernels.mixed_reduce_nb(*args_inf)) if _kernels.HAS_NUMBA else None)

    for n in (2048, 4096):
        a = np.abs(rng.standard_normal(n))
        b = np.abs(rng.standard_normal(n))
        bench_case(f"scaled_quotient_grid {n}x{n}",
                   lambda: _kernels.scaled_quotient_grid_np(a, b, 0.3, -6.0),
                   (lambda: _kernels.scaled_quotient_grid_nb(a, b, 0.3, -6.0))
                   if _kernels.HAS_NUMBA else None)
        bench_case(f"weighted_quotient_grid {n}x{n}",
                   lambda: _kernels.weighted_quotient_grid_np(a, b, 1.0, 2.0, 1e-3, 12.0),
                   (lambda: _kernels.weighted_quotient_grid_nb(a, b, 1.0, 2.0, 1e-3, 12.0))
                   if _kernels.HAS_NUMBA else None)


if __name__ == "__main__":
    main()
