"""Periodic pseudospectral discretization of the oscillator and its spectrum.

The kinetic part is the exact Fourier multiplier |omega|^(2l) on a staggered
grid (nodes offset by half a cell, so the origin is never a node); the
potential is diagonal. The assembled dense matrix is real symmetric and
positive definite by construction: the multiplier is nonnegative and the
nodal potential is strictly positive.
"""

from __future__ import annotations

import hashlib
import json
import struct
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import InvalidSpecError, NonConvergenceError, NumericalError
from .model import OscillatorSpec, evaluate_potential, oscillator_from_dict, oscillator_to_dict

_CLUSTER_GAP = 1e-8
_ORTHO_TOL = 1e-9
_RESIDUAL_TOL = 1e-8
_MAX_DENSE = 4096

_CACHE_MAGIC = b"AHNC"
_CACHE_VERSION = 1


@dataclass(frozen=True)
class Grid:
    """Staggered periodic grid on [-L, L]^d with N points per axis."""

    dimension: int = 1
    points_per_axis: int = 512
    half_width: float = 12.0

    def __post_init__(self):
        if self.dimension not in (1, 2):
            raise InvalidSpecError("grid dimension must be 1 or 2")
        n = self.points_per_axis
        if not isinstance(n, (int, np.integer)) or n < 8 or (n & (n - 1)) != 0:
            raise InvalidSpecError("points_per_axis must be a power of two, at least 8")
        object.__setattr__(self, "points_per_axis", int(n))
        L = float(self.half_width)
        if not np.isfinite(L) or L <= 0:
            raise InvalidSpecError("half_width must be a positive real")
        object.__setattr__(self, "half_width", L)

    @property
    def h(self) -> float:
        return 2.0 * self.half_width / self.points_per_axis

    @property
    def size(self) -> int:
        return self.points_per_axis ** self.dimension

    @property
    def cell_volume(self) -> float:
        return self.h ** self.dimension

    def axis_nodes(self) -> np.ndarray:
        n = self.points_per_axis
        return -self.half_width + (np.arange(n) + 0.5) * self.h

    def nodes(self) -> np.ndarray:
        """All nodes as a (size, d) array, C-order over axes."""
        a = self.axis_nodes()
        if self.dimension == 1:
            return a[:, None]
        g1, g2 = np.meshgrid(a, a, indexing="ij")
        return np.stack([g1.ravel(), g2.ravel()], axis=-1)

    def axis_frequencies(self) -> np.ndarray:
        """Frequency lattice n/(2L) in ascending order (DFT bins, shifted)."""
        n = self.points_per_axis
        return np.arange(-n // 2, n // 2) / (2.0 * self.half_width)

    def frequency_nodes(self) -> np.ndarray:
        f = self.axis_frequencies()
        if self.dimension == 1:
            return f[:, None]
        g1, g2 = np.meshgrid(f, f, indexing="ij")
        return np.stack([g1.ravel(), g2.ravel()], axis=-1)

    @property
    def frequency_cell(self) -> float:
        return (1.0 / (2.0 * self.half_width)) ** self.dimension

    def wrapped_axis_offsets(self) -> np.ndarray:
        """Signed offsets z_i of the cyclic window table, origin at index 0."""
        n = self.points_per_axis
        return (((np.arange(n) + n // 2) % n) - n // 2) * self.h


def default_grid(dimension: int = 1) -> Grid:
    return Grid(dimension, 512 if dimension == 1 else 64, 12.0)


@dataclass(frozen=True, eq=False)
class FieldSample:
    """A complex-valued function sampled on a grid, flattened C-order."""

    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        v = np.ascontiguousarray(self.values, dtype=np.complex128).copy()
        if v.ndim != 1 or v.shape[0] != self.grid.size:
            raise InvalidSpecError(
                f"field needs {self.grid.size} flat values, got shape {np.shape(self.values)}")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    def norm_l2(self) -> float:
        return float(np.sqrt(self.grid.cell_volume * np.sum(np.abs(self.values) ** 2)))

    def inner(self, other: "FieldSample") -> complex:
        if other.grid != self.grid:
            raise ValueError("fields live on different grids")
        return complex(self.grid.cell_volume * np.sum(self.values * np.conj(other.values)))

    def __add__(self, other):
        return FieldSample(self.grid, self.values + other.values)

    def __sub__(self, other):
        return FieldSample(self.grid, self.values - other.values)

    def __mul__(self, scalar):
        return FieldSample(self.grid, self.values * scalar)

    __rmul__ = __mul__

    def __neg__(self):
        return FieldSample(self.grid, -self.values)


def field_from_function(grid: Grid, fn) -> FieldSample:
    """Sample fn on the grid; fn takes (size, d) points or, for d=1, a 1-d array."""
    if grid.dimension == 1:
        vals = fn(grid.axis_nodes())
    else:
        vals = fn(grid.nodes())
    return FieldSample(grid, np.asarray(vals, dtype=np.complex128).ravel())


def _kinetic_multiplier(osc: OscillatorSpec, grid: Grid) -> np.ndarray:
    n = grid.points_per_axis
    k = np.fft.fftfreq(n, d=1.0 / n)  # integer bin indices in FFT order
    w = np.pi * k / grid.half_width
    if grid.dimension == 1:
        return np.abs(w) ** (2 * osc.l)
    w2 = w[:, None] ** 2 + w[None, :] ** 2
    return w2 ** osc.l


def assemble_operator(osc: OscillatorSpec, grid: Grid) -> np.ndarray:
    """Dense real symmetric matrix of (-Laplacian)^l + V on the grid.

    Positivity is certified exactly: the Fourier multiplier is nonnegative
    and the strictly positive nodal potential is checked (the staggered
    grid excludes the origin, so min V over nodes is positive for any valid
    potential). Gershgorin radii are available separately as a diagnostic
    only; they are far too pessimistic to certify anything here.
    """
    if osc.dimension != grid.dimension:
        raise InvalidSpecError("oscillator and grid dimensions differ")
    if grid.size > _MAX_DENSE:
        raise InvalidSpecError(
            f"dense operator would be {grid.size}^2; cap is {_MAX_DENSE}^2")

    nodes = grid.nodes()
    v_nodes = evaluate_potential(osc.potential, nodes)
    v_min = float(np.min(v_nodes))
    if v_min <= 0:
        raise NumericalError(f"nodal potential minimum {v_min:.3e} is not positive")

    mult = _kinetic_multiplier(osc, grid)
    n = grid.points_per_axis
    if grid.dimension == 1:
        kern = np.fft.ifft(mult).real
        idx = (np.arange(n)[:, None] - np.arange(n)[None, :]) % n
        a = kern[idx]
    else:
        kern = np.fft.ifft2(mult).real
        di = (np.arange(n)[:, None] - np.arange(n)[None, :]) % n
        a = kern[di[:, None, :, None], di[None, :, None, :]].reshape(grid.size, grid.size)
    a = a + np.diag(np.asarray(v_nodes, dtype=float).ravel())
    a = 0.5 * (a + a.T)
    return a


def gershgorin_bounds(a: np.ndarray):
    """Diagnostic (min, max) Gershgorin eigenvalue bounds of a square matrix."""
    d = np.diag(a)
    r = np.sum(np.abs(a), axis=1) - np.abs(d)
    return float(np.min(d - r)), float(np.max(d + r))


@dataclass(eq=False)
class SpectralDecomposition:
    """Retained eigenpairs of the discretized oscillator.

    ``eigenvectors`` has shape (grid.size, m) and is orthonormal in the
    h-weighted inner product; columns carry a deterministic sign gauge.
    """

    oscillator: OscillatorSpec
    grid: Grid
    m: int
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    def __post_init__(self):
        self.eigenvalues = np.ascontiguousarray(self.eigenvalues, dtype=float)
        self.eigenvectors = np.ascontiguousarray(self.eigenvectors, dtype=float)
        self.eigenvalues.setflags(write=False)
        self.eigenvectors.setflags(write=False)
        self._clusters = _cluster_ranges(self.eigenvalues)

    def coefficients(self, f: FieldSample) -> np.ndarray:
        if f.grid != self.grid:
            raise ValueError("field grid does not match decomposition grid")
        return self.grid.cell_volume * (self.eigenvectors.T @ f.values)

    def reconstruct(self, coeffs: np.ndarray) -> FieldSample:
        return FieldSample(self.grid, self.eigenvectors @ np.asarray(coeffs))

    def eigenfunction(self, j: int) -> FieldSample:
        if not 0 <= j < self.m:
            raise ValueError(f"mode index {j} outside [0, {self.m})")
        return FieldSample(self.grid, self.eigenvectors[:, j])

    def span_residual_fraction(self, f: FieldSample) -> float:
        """Relative L2 mass of f outside the retained-mode span."""
        nf = f.norm_l2()
        if nf == 0.0:
            return 0.0
        rec = self.eigenvectors @ self.coefficients(f)
        res = float(np.sqrt(self.grid.cell_volume * np.sum(np.abs(f.values - rec) ** 2)))
        return res / nf

    def cluster_of(self, j: int):
        """(start, stop) of the numerically degenerate cluster containing j."""
        for start, stop in self._clusters:
            if start <= j < stop:
                return start, stop
        raise ValueError(f"mode index {j} outside [0, {self.m})")


def _cluster_ranges(eigenvalues):
    ranges = []
    start = 0
    for j in range(1, len(eigenvalues) + 1):
        if j == len(eigenvalues) or eigenvalues[j] - eigenvalues[j - 1] >= _CLUSTER_GAP:
            ranges.append((start, j))
            start = j
    return ranges


def eigendecompose(a: np.ndarray, m: int, *, osc: OscillatorSpec, grid: Grid) -> SpectralDecomposition:
    """Lowest m eigenpairs of the assembled operator, checked and gauged.

    Raises NumericalError when the decomposition violates its invariants
    (orthonormality to 1e-9, residual to 1e-8 per unit of (1 + lambda),
    positive ground eigenvalue) and NonConvergenceError when the dense
    solver fails.
    """
    a = np.asarray(a, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError("operator must be a square matrix")
    scale = float(np.max(np.abs(a)))
    if scale > 0 and float(np.max(np.abs(a - a.T))) > 1e-12 * scale:
        raise ValueError("operator is not symmetric to 1e-12 relative")
    if not isinstance(m, (int, np.integer)) or not 1 <= m <= a.shape[0]:
        raise ValueError(f"mode count m={m} outside [1, {a.shape[0]}]")
    if a.shape[0] != grid.size:
        raise ValueError("operator size does not match grid")

    try:
        vals, vecs = scipy.linalg.eigh(a, subset_by_index=(0, m - 1))
    except scipy.linalg.LinAlgError as exc:  # pragma: no cover - rare driver failure
        raise NonConvergenceError(f"dense symmetric eigensolver failed: {exc}",
                                  {"matrix_size": a.shape[0], "modes": m})

    hd = grid.cell_volume
    vecs = vecs / np.sqrt(hd)

    # re-orthonormalize inside numerically degenerate clusters, then fix signs
    for start, stop in _cluster_ranges(vals):
        if stop - start > 1:
            block, _ = np.linalg.qr(vecs[:, start:stop] * np.sqrt(hd))
            vecs[:, start:stop] = block / np.sqrt(hd)
    peaks = np.argmax(np.abs(vecs), axis=0)
    signs = np.sign(vecs[peaks, np.arange(m)])
    signs[signs == 0] = 1.0
    vecs = vecs * signs

    gram = hd * (vecs.T @ vecs)
    ortho_err = float(np.max(np.abs(gram - np.eye(m))))
    if ortho_err > _ORTHO_TOL:
        raise NumericalError(f"eigenvector orthonormality error {ortho_err:.3e} exceeds {_ORTHO_TOL}")
    if vals[0] <= 0:
        raise NumericalError(f"ground eigenvalue {vals[0]:.6e} is not positive")
    resid = a @ vecs - vecs * vals
    resid_norms = np.sqrt(hd * np.sum(resid ** 2, axis=0))
    bound = _RESIDUAL_TOL * (1.0 + vals)
    if np.any(resid_norms > bound):
        worst = int(np.argmax(resid_norms / bound))
        raise NumericalError(
            f"eigenpair residual {resid_norms[worst]:.3e} at mode {worst} "
            f"exceeds {bound[worst]:.3e}")

    return SpectralDecomposition(osc, grid, int(m), vals, vecs)


def decompose(osc: OscillatorSpec, grid: Grid, m: int | None = None) -> SpectralDecomposition:
    """Assemble and eigendecompose in one step; m defaults to size/2."""
    if m is None:
        m = grid.size // 2
    return eigendecompose(assemble_operator(osc, grid), m, osc=osc, grid=grid)


@dataclass(frozen=True)
class GrowthFit:
    """Log-log slope of the eigenvalue sequence against the mode index."""

    slope: float
    intercept: float
    target: float
    rel_deviation: float
    j_lo: int
    j_hi: int


def growth_target(osc: OscillatorSpec) -> float:
    k = osc.degree_half
    return 2.0 * k * osc.l / (osc.dimension * (k + osc.l))


def eigenvalue_growth_fit(dec: SpectralDecomposition, j_lo: int, j_hi: int) -> GrowthFit:
    """Least-squares fit of log lambda_j vs log j over [j_lo, j_hi].

    The window must start at j_lo >= 20 and stop by 0.4 m, away from the
    discretization-corrupted tail, and must contain at least 20 points.
    """
    if j_lo < 20:
        raise ValueError("j_lo must be at least 20 (asymptotic regime)")
    if j_hi > 0.4 * dec.m:
        raise ValueError(f"j_hi={j_hi} exceeds 0.4*m = {0.4 * dec.m:.0f}")
    if j_hi - j_lo + 1 < 20:
        raise ValueError("growth window needs at least 20 points")
    j = np.arange(j_lo, j_hi + 1)
    lam = dec.eigenvalues[j_lo:j_hi + 1]
    slope, intercept = np.polyfit(np.log(j), np.log(lam), 1)
    target = growth_target(dec.oscillator)
    return GrowthFit(float(slope), float(intercept), target,
                     abs(slope - target) / target, int(j_lo), int(j_hi))


# --- binary cache -----------------------------------------------------------

def cache_key(osc: OscillatorSpec, grid: Grid, m: int) -> str:
    payload = {
        "oscillator": oscillator_to_dict(osc),
        "grid": {"dimension": grid.dimension, "points_per_axis": grid.points_per_axis,
                 "half_width": grid.half_width},
        "m": int(m),
    }
    return hashlib.sha256(json.dumps(payload, sort_keys=True).encode()).hexdigest()


def save_decomposition(dec: SpectralDecomposition, path) -> None:
    """Write a decomposition: magic, version, JSON header, little-endian f8 arrays."""
    header = {
        "key": cache_key(dec.oscillator, dec.grid, dec.m),
        "oscillator": oscillator_to_dict(dec.oscillator),
        "grid": {"dimension": dec.grid.dimension,
                 "points_per_axis": dec.grid.points_per_axis,
                 "half_width": dec.grid.half_width},
        "m": dec.m,
        "size": dec.grid.size,
    }
    blob = json.dumps(header, sort_keys=True).encode()
    with open(path, "wb") as fh:
        fh.write(_CACHE_MAGIC)
        fh.write(struct.pack("<I", _CACHE_VERSION))
        fh.write(struct.pack("<Q", len(blob)))
        fh.write(blob)
        fh.write(np.ascontiguousarray(dec.eigenvalues, dtype="<f8").tobytes())
        fh.write(np.ascontiguousarray(dec.eigenvectors, dtype="<f8").tobytes())


def load_decomposition(path) -> SpectralDecomposition:
    with open(path, "rb") as fh:
        if fh.read(4) != _CACHE_MAGIC:
            raise InvalidSpecError(f"{path} is not a decomposition cache file")
        version, = struct.unpack("<I", fh.read(4))
        if version != _CACHE_VERSION:
            raise InvalidSpecError(f"unsupported cache version {version}")
        blob_len, = struct.unpack("<Q", fh.read(8))
        header = json.loads(fh.read(blob_len).decode())
        osc = oscillator_from_dict(header["oscillator"])
        grid = Grid(header["grid"]["dimension"], header["grid"]["points_per_axis"],
                    header["grid"]["half_width"])
        m = int(header["m"])
        size = int(header["size"])
        vals = np.frombuffer(fh.read(8 * m), dtype="<f8").copy()
        vecs = np.frombuffer(fh.read(8 * size * m), dtype="<f8").copy().reshape(size, m)
    if header["key"] != cache_key(osc, grid, m):
        raise InvalidSpecError("cache key mismatch; file does not match its header")
    if vals.shape[0] != m or vals[0] <= 0 or not np.all(np.diff(vals) >= 0):
        raise NumericalError("cached eigenvalues fail basic sanity checks")
    return SpectralDecomposition(osc, grid, m, vals, vecs)
