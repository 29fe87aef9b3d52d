"""Hot lattice-reduction kernels, in numba and pure-numpy twins.

The numba path is used when numba imports cleanly and the environment
variable ANHARMONIC_NO_NUMBA is not set to 1/true/yes; otherwise the numpy
twins serve. Both paths agree to ~1e-12 relative (sequential vs pairwise
summation) and are compared in tests and in benchmarks/bench_kernels.py.
"""

import os

import numpy as np

try:
    from numba import njit
    HAS_NUMBA = True
except ImportError:  # pragma: no cover - numba is an install-time choice
    njit = None
    HAS_NUMBA = False


def _env_disabled() -> bool:
    return os.environ.get("ANHARMONIC_NO_NUMBA", "").strip().lower() in ("1", "true", "yes")


USE_NUMBA = HAS_NUMBA and not _env_disabled()


def mixed_reduce_np(w, p, q, p_is_inf, q_is_inf, cell_x, cell_xi):
    """Mixed L^p (over rows, the x axis) then L^q (over columns) reduction.

    ``w`` is the nonnegative weighted magnitude lattice, shape (nx, nxi).
    Finite exponents use the plain power sum times the cell measure, which
    is also the quasi-norm formula for p or q below 1.
    """
    w = np.asarray(w)
    if p_is_inf:
        inner = w.max(axis=0)
    else:
        inner = (np.sum(w ** p, axis=0) * cell_x) ** (1.0 / p)
    if q_is_inf:
        return float(inner.max())
    return float((np.sum(inner ** q) * cell_xi) ** (1.0 / q))


def scaled_quotient_grid_np(a, b, tau, expo):
    """(1 + tau*(a_i + b_n))**expo on the outer-product lattice."""
    return (1.0 + tau * (a[:, None] + b[None, :])) ** expo


def weighted_quotient_grid_np(a, b, q1, s2, t_pow_n, two_beta_n):
    """v^s2 / (1 + t^N v^(2 beta N)) with v = q1 + a_i + b_n."""
    v = q1 + a[:, None] + b[None, :]
    return v ** s2 / (1.0 + t_pow_n * v ** two_beta_n)


if HAS_NUMBA:

    @njit(cache=True, fastmath=True)
    def _mixed_reduce_nb(w, p, q, p_is_inf, q_is_inf, cell_x, cell_xi):
        # row-major traversal with per-column accumulators: the lattice is
        # C-ordered with x along rows, so reducing over x column by column
        # would stride through memory; p in {1, 2} skips pow entirely
        nx, nxi = w.shape
        inner = np.zeros(nxi)
        if p_is_inf:
            for i in range(nx):
                for n in range(nxi):
                    if w[i, n] > inner[n]:
                        inner[n] = w[i, n]
        elif p == 1.0:
            for i in range(nx):
                for n in range(nxi):
                    inner[n] += w[i, n]
            for n in range(nxi):
                inner[n] = inner[n] * cell_x
        elif p == 2.0:
            for i in range(nx):
                for n in range(nxi):
                    inner[n] += w[i, n] * w[i, n]
            for n in range(nxi):
                inner[n] = np.sqrt(inner[n] * cell_x)
        else:
            for i in range(nx):
                for n in range(nxi):
                    inner[n] += w[i, n] ** p
            for n in range(nxi):
                inner[n] = (inner[n] * cell_x) ** (1.0 / p)
        if q_is_inf:
            m = 0.0
            for n in range(nxi):
                if inner[n] > m:
                    m = inner[n]
            return m
        acc = 0.0
        if q == 1.0:
            for n in range(nxi):
                acc += inner[n]
            return acc * cell_xi
        if q == 2.0:
            for n in range(nxi):
                acc += inner[n] * inner[n]
            return np.sqrt(acc * cell_xi)
        for n in range(nxi):
            acc += inner[n] ** q
        return (acc * cell_xi) ** (1.0 / q)

    @njit(cache=True)
    def _int_pow(base, n):
        # binary exponentiation for integer-valued exponents; pow() is the
        # dominant cost of the quotient grids otherwise
        neg = n < 0
        if neg:
            n = -n
        out = 1.0
        acc = base
        while n > 0:
            if n & 1:
                out *= acc
            acc *= acc
            n >>= 1
        return 1.0 / out if neg else out

    @njit(cache=True, fastmath=True)
    def _scaled_quotient_grid_nb(a, b, tau, expo):
        na = a.shape[0]
        nb = b.shape[0]
        out = np.empty((na, nb))
        int_expo = int(round(expo))
        if expo == int_expo and abs(int_expo) <= 64:
            for i in range(na):
                base_i = 1.0 + tau * a[i]
                for n in range(nb):
                    out[i, n] = _int_pow(base_i + tau * b[n], int_expo)
        else:
            for i in range(na):
                base_i = 1.0 + tau * a[i]
                for n in range(nb):
                    out[i, n] = (base_i + tau * b[n]) ** expo
        return out

    @njit(cache=True, fastmath=True)
    def _weighted_quotient_grid_nb(a, b, q1, s2, t_pow_n, two_beta_n):
        na = a.shape[0]
        nb = b.shape[0]
        out = np.empty((na, nb))
        int_s2 = int(round(s2))
        int_tbn = int(round(two_beta_n))
        ints = s2 == int_s2 and abs(int_s2) <= 64 \
            and two_beta_n == int_tbn and abs(int_tbn) <= 64
        for i in range(na):
            vi = q1 + a[i]
            if ints:
                for n in range(nb):
                    v = vi + b[n]
                    out[i, n] = _int_pow(v, int_s2) / (1.0 + t_pow_n * _int_pow(v, int_tbn))
            else:
                for n in range(nb):
                    v = vi + b[n]
                    out[i, n] = v ** s2 / (1.0 + t_pow_n * v ** two_beta_n)
        return out

    def mixed_reduce_nb(w, p, q, p_is_inf, q_is_inf, cell_x, cell_xi):
        return float(_mixed_reduce_nb(
            np.ascontiguousarray(w, dtype=np.float64),
            float(p), float(q), bool(p_is_inf), bool(q_is_inf),
            float(cell_x), float(cell_xi)))

    def scaled_quotient_grid_nb(a, b, tau, expo):
        return _scaled_quotient_grid_nb(
            np.ascontiguousarray(a, dtype=np.float64),
            np.ascontiguousarray(b, dtype=np.float64),
            float(tau), float(expo))

    def weighted_quotient_grid_nb(a, b, q1, s2, t_pow_n, two_beta_n):
        return _weighted_quotient_grid_nb(
            np.ascontiguousarray(a, dtype=np.float64),
            np.ascontiguousarray(b, dtype=np.float64),
            float(q1), float(s2), float(t_pow_n), float(two_beta_n))


if USE_NUMBA:
    mixed_reduce = mixed_reduce_nb
    scaled_quotient_grid = scaled_quotient_grid_nb
    weighted_quotient_grid = weighted_quotient_grid_nb
else:
    mixed_reduce = mixed_reduce_np
    scaled_quotient_grid = scaled_quotient_grid_np
    weighted_quotient_grid = weighted_quotient_grid_np
