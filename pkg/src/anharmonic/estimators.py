"""Experiment estimators: smoothing-rate fits, long-time rates, spectral sums,
algebra and multilinear ratios, singular weights, and norm-equivalence bands.

Two families of measurements live here. Analytic ones evaluate the weight
quotient that controls the semigroup bound on a dedicated scaled quadrature
box. Probe-based ones drive the spectral semigroup over fixed probe corpora
and report worst-case norm ratios, which are explicit lower bounds for the
operator norms.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .calculus import SemigroupQuery, heat_semigroup, sobolev_norm
from .errors import InvalidSpecError, ProbeSkipWarning, TruncationError
from .model import (MixedNormParams, OscillatorSpec, WeightSpec, check_exponent,
                    evaluate_potential, is_inf)
from .phasespace import WindowSpec, mixed_norm, modulation_norm, stft, _weight_lattice
from .spectral import FieldSample, Grid, SpectralDecomposition

PROBE_SEED = 1234

_GUARD_REL = 5e-3
_DEFAULT_T_GRID = tuple(np.logspace(-1, -3, 6))


def sigma_exponent(k: int, l: int, beta: float, dimension: int, p_tilde, q_tilde) -> float:
    """Short-time blow-up exponent (d / 2 beta)(1/(k p) + 1/(l q)).

    ``p_tilde`` and ``q_tilde`` are the positive-part exponent gaps; the INF
    marker zeroes the corresponding term.
    """
    term_p = 0.0 if is_inf(p_tilde) else 1.0 / (k * float(p_tilde))
    term_q = 0.0 if is_inf(q_tilde) else 1.0 / (l * float(q_tilde))
    return dimension / (2.0 * beta) * (term_p + term_q)


def _auto_n_pow(beta: float, s2: float, p_tilde, q_tilde, dimension: int) -> int:
    finite = [float(e) for e in (p_tilde, q_tilde) if not is_inf(e)]
    p_eff = min(finite) if finite else 1.0
    n = 1
    while (2.0 * beta * n - s2) * p_eff <= dimension + 10.0:
        n += 1
    return n


@dataclass(frozen=True)
class WeightQuotientParams:
    """Parameters of the weight-quotient functional controlling the bound.

    ``form`` selects the integrand: "weighted" is the literal quotient
    v_s2 / (1 + t^N v~^(2 beta N)); "scaled" is its scale-exact reduction
    (1 + t^(1/(2 beta)) (V^(1/2) + |xi|^l))^(s2 - 2 beta N), which carries
    the exact power-law decay and is the form used for slope acceptance.
    ``radius`` is the box constant: the quadrature box grows like
    (radius / t^(1/(2 beta)))^(1/k) in x and ^(1/l) in xi, so truncation is
    scale-covariant in t.
    """

    oscillator: OscillatorSpec
    s2: float = 0.0
    p_tilde: object = 1.0
    q_tilde: object = 1.0
    n_pow: int | None = None
    radius: float = 30.0
    resolution: int = 2048
    form: str = "scaled"
    t_list: tuple = _DEFAULT_T_GRID

    def __post_init__(self):
        osc = self.oscillator
        if osc.dimension != 1:
            raise InvalidSpecError("quotient quadrature is implemented for dimension 1")
        object.__setattr__(self, "s2", float(self.s2))
        if self.s2 < 0:
            raise InvalidSpecError("s2 < 0 is outside the reduction's validity")
        object.__setattr__(self, "p_tilde", check_exponent("p_tilde", self.p_tilde))
        object.__setattr__(self, "q_tilde", check_exponent("q_tilde", self.q_tilde))
        if self.form not in ("scaled", "weighted"):
            raise InvalidSpecError(f"unknown quotient form {self.form!r}")
        if not (np.isfinite(self.radius) and self.radius > 0):
            raise InvalidSpecError("radius must be a positive real")
        if not isinstance(self.resolution, (int, np.integer)) or self.resolution < 32:
            raise InvalidSpecError("resolution must be an integer >= 32")
        n = self.n_pow
        if n is None:
            n = _auto_n_pow(osc.beta, self.s2, self.p_tilde, self.q_tilde, osc.dimension)
        else:
            n = int(n)
            if n < 1:
                raise InvalidSpecError("n_pow must be a positive integer")
        finite = [float(e) for e in (self.p_tilde, self.q_tilde) if not is_inf(e)]
        p_eff = min(finite) if finite else 1.0
        if (2.0 * osc.beta * n - self.s2) * p_eff <= osc.dimension:
            raise InvalidSpecError(
                f"n_pow={n} leaves the quotient non-integrable: "
                f"(2 beta N - s2) * {p_eff} must exceed d={osc.dimension}")
        object.__setattr__(self, "n_pow", n)
        t = tuple(float(v) for v in self.t_list)
        if not t or any(not (0.0 < v <= 1.0) for v in t):
            raise InvalidSpecError("t_list must contain values in (0, 1]")
        if any(t[i] <= t[i + 1] for i in range(len(t) - 1)):
            raise InvalidSpecError("t_list must be strictly decreasing")
        object.__setattr__(self, "t_list", t)


def _quotient_lattice(params: WeightQuotientParams, t: float, radius: float,
                      resolution: int):
    osc = params.oscillator
    k = osc.degree_half
    tau = t ** (1.0 / (2.0 * osc.beta))
    box = radius * max(1.0, 1.0 / tau)
    r_x = box ** (1.0 / k)
    r_xi = box ** (1.0 / osc.l)
    m = resolution
    x = -r_x + (np.arange(m) + 0.5) * (2.0 * r_x / m)
    xi = -r_xi + (np.arange(m) + 0.5) * (2.0 * r_xi / m)
    a = np.sqrt(np.asarray(evaluate_potential(osc.potential, x), dtype=float))
    b = np.abs(xi) ** osc.l
    if params.form == "scaled":
        grid_vals = _kernels.scaled_quotient_grid(a, b, tau, params.s2 - 2.0 * osc.beta * params.n_pow)
    else:
        grid_vals = _kernels.weighted_quotient_grid(
            a, b, osc.q1, params.s2, t ** params.n_pow, 2.0 * osc.beta * params.n_pow)
    return grid_vals, 2.0 * r_x / m, 2.0 * r_xi / m


def _quotient_value(params, t, radius, resolution) -> float:
    vals, dx, dxi = _quotient_lattice(params, t, radius, resolution)
    p, q = params.p_tilde, params.q_tilde
    return _kernels.mixed_reduce(
        vals,
        1.0 if is_inf(p) else float(p),
        1.0 if is_inf(q) else float(q),
        is_inf(p), is_inf(q), dx, dxi)


def weight_quotient_norm(params: WeightQuotientParams, t: float) -> float:
    """Mixed L^(p~, q~) norm of the quotient integrand at time t in (0, 1].

    A doubling guard recomputes on a box twice as large (same spacing) and
    raises TruncationError when the value moves by 0.5% or more.
    """
    t = float(t)
    if not (0.0 < t <= 1.0):
        raise ValueError("t must lie in (0, 1]")
    base = _quotient_value(params, t, params.radius, params.resolution)
    guard = _quotient_value(params, t, 2.0 * params.radius, 2 * params.resolution)
    denom = max(abs(base), abs(guard), np.finfo(float).tiny)
    if abs(guard - base) / denom >= _GUARD_REL:
        raise TruncationError(
            f"quotient norm moved {abs(guard - base) / denom:.2%} when the box doubled "
            f"(radius {params.radius}); enlarge the truncation radius",
            suggested_radius=4.0 * params.radius)
    return base


@dataclass(frozen=True)
class DecayFitResult:
    """Least-squares power-law fit of (t, value) samples in log-log space."""

    slope: float
    intercept: float
    r_squared: float
    t_window: tuple
    target: float | None
    rel_deviation: float | None


def fit_decay_exponent(samples, target: float | None = None) -> DecayFitResult:
    """Ordinary least squares of log(value) against log(t).

    Needs at least 6 samples spanning at least 1.5 decades, all positive.
    ``target`` is the expected slope (the negated smoothing exponent for
    semigroup runs); the relative deviation is reported against it.
    """
    pts = [(float(t), float(v)) for t, v in samples]
    if len(pts) < 6:
        raise ValueError("need at least 6 samples for a slope fit")
    ts = np.array([p[0] for p in pts])
    vs = np.array([p[1] for p in pts])
    if np.any(ts <= 0) or np.any(vs <= 0):
        raise ValueError("samples must have positive t and value")
    if np.log10(ts.max() / ts.min()) < 1.5:
        raise ValueError("samples must span at least 1.5 decades of t")
    lx, ly = np.log(ts), np.log(vs)
    slope, intercept = np.polyfit(lx, ly, 1)
    pred = slope * lx + intercept
    ss_res = float(np.sum((ly - pred) ** 2))
    ss_tot = float(np.sum((ly - ly.mean()) ** 2))
    r2 = 1.0 if ss_tot == 0.0 else 1.0 - ss_res / ss_tot
    r2 = float(min(max(r2, 0.0), 1.0))
    dev = None if target in (None, 0.0) else abs(slope - target) / abs(target)
    return DecayFitResult(float(slope), float(intercept), r2,
                          (float(ts.min()), float(ts.max())),
                          None if target is None else float(target),
                          None if dev is None else float(dev))


def smoothing_decay_run(params: WeightQuotientParams):
    """Sample the quotient over params.t_list and fit the decay exponent.

    Returns (samples, DecayFitResult) with the target slope -sigma.
    """
    osc = params.oscillator
    sigma = sigma_exponent(osc.degree_half, osc.l, osc.beta, osc.dimension,
                           params.p_tilde, params.q_tilde)
    samples = [(t, weight_quotient_norm(params, t)) for t in params.t_list]
    return samples, fit_decay_exponent(samples, target=-sigma)


# --- probe corpora ----------------------------------------------------------

def gaussian_probe_fields(grid: Grid, count: int, seed: int = PROBE_SEED,
                          center_range=(-3.0, 3.0), width_range=(0.5, 2.0),
                          modulation_range=(-2.0, 2.0)):
    """Unit-L2 Gaussian packets with seeded centers, widths, and modulations."""
    rng = np.random.default_rng(seed)
    probes = []
    for _ in range(count):
        centers = rng.uniform(*center_range, size=grid.dimension)
        widths = rng.uniform(*width_range, size=grid.dimension)
        mods = rng.uniform(*modulation_range, size=grid.dimension)
        nodes = grid.nodes()
        envelope = np.exp(-np.pi * np.sum(((nodes - centers) / widths) ** 2, axis=1))
        carrier = np.exp(2j * np.pi * nodes @ mods)
        f = FieldSample(grid, envelope * carrier)
        n = f.norm_l2()
        probes.append(FieldSample(grid, f.values / n))
    return probes


def eigenfunction_probes(dec: SpectralDecomposition, count: int = 10):
    return [dec.eigenfunction(j) for j in range(min(count, dec.m))]


def standard_probe_family(dec: SpectralDecomposition, kind: str = "equivalence",
                          seed: int = PROBE_SEED):
    """The fixed probe corpora: 'operator' is 30 Gaussians plus the first 10
    eigenfunctions; 'equivalence' is 40 Gaussians plus the first 10."""
    if kind == "operator":
        n_gauss = 30
    elif kind == "equivalence":
        n_gauss = 40
    else:
        raise ValueError(f"unknown probe family {kind!r}")
    return gaussian_probe_fields(dec.grid, n_gauss, seed) + eigenfunction_probes(dec, 10)


def _norm_spec(spec_tuple, osc):
    p, q, s = spec_tuple
    return MixedNormParams(p, q), WeightSpec("anharmonic", float(s)), osc


def probe_operator_bound(dec: SpectralDecomposition, beta: float, t: float,
                         source, target, probes, window: WindowSpec | None = None) -> float:
    """Max over probes of target-norm(exp(-t H^beta) f) / source-norm(f).

    An explicit lower bound for the operator norm between the two weighted
    spaces. Probes with vanishing source norm are skipped with a warning.
    ``source`` and ``target`` are (p, q, s) triples measured against the
    anharmonic weight of the decomposition's oscillator.
    """
    window = window or WindowSpec()
    src_params, src_weight, osc = _norm_spec(source, dec.oscillator)
    tgt_params, tgt_weight, _ = _norm_spec(target, dec.oscillator)
    query = SemigroupQuery(dec, beta, t)
    best = None
    for i, f in enumerate(probes):
        denom = modulation_norm(f, window, src_weight, osc, src_params)
        if denom == 0.0:
            warnings.warn(f"probe {i} skipped: zero source norm", ProbeSkipWarning,
                          stacklevel=2)
            continue
        num = modulation_norm(heat_semigroup(query, f), window, tgt_weight, osc, tgt_params)
        ratio = num / denom
        best = ratio if best is None else max(best, ratio)
    if best is None:
        raise ValueError("all probes were skipped")
    return float(best)


@dataclass(frozen=True)
class LongtimeRateResult:
    """Exponential-rate fit of the probe bound over a t window."""

    rate: float
    intercept: float
    r_squared: float
    target: float
    rel_deviation: float
    t_window: tuple


def longtime_rate(dec: SpectralDecomposition, beta: float, t_list, source, target,
                  probes, window: WindowSpec | None = None) -> LongtimeRateResult:
    """Fit log probe_operator_bound against t; the expected rate is the
    negated beta-th power of the ground eigenvalue. Requires matching
    nonnegative weight exponents on both sides (the refined regime)."""
    if source[2] != target[2] or float(source[2]) < 0:
        raise ValueError("longtime fit needs s_source = s_target >= 0")
    ts = [float(t) for t in t_list]
    if len(ts) < 3:
        raise ValueError("need at least 3 time points")
    vals = [probe_operator_bound(dec, beta, t, source, target, probes, window) for t in ts]
    ys = np.log(vals)
    rate, intercept = np.polyfit(ts, ys, 1)
    pred = rate * np.array(ts) + intercept
    ss_res = float(np.sum((ys - pred) ** 2))
    ss_tot = float(np.sum((ys - ys.mean()) ** 2))
    r2 = 1.0 if ss_tot == 0.0 else float(min(max(1.0 - ss_res / ss_tot, 0.0), 1.0))
    target_rate = -float(dec.eigenvalues[0]) ** beta
    dev = abs(rate - target_rate) / abs(target_rate)
    return LongtimeRateResult(float(rate), float(intercept), r2, target_rate,
                              float(dev), (min(ts), max(ts)))


def spectral_sum_bound(dec: SpectralDecomposition, beta: float, s0: float, t: float):
    """(sum_j exp(-t lambda_j^beta) lambda_j^s0, ratio to exp(-t lambda_0^beta)).

    The ratio is computed against the shifted exponent so it stays finite
    when the raw sum underflows at large t.
    """
    if t < 1.0:
        raise ValueError("the bound is a long-time statement; t must be >= 1")
    if s0 < 0:
        raise ValueError("s0 must be nonnegative")
    lam = dec.eigenvalues
    lam_b = lam ** beta
    total = float(np.sum(np.exp(-t * lam_b) * lam ** s0))
    ratio = float(np.sum(np.exp(-t * (lam_b - lam_b[0])) * lam ** s0))
    return total, ratio


def algebra_ratio(f: FieldSample, g: FieldSample, params: MixedNormParams,
                  ws: WeightSpec, osc: OscillatorSpec | None = None,
                  window: WindowSpec | None = None) -> float:
    """norm(f g) / (norm(f) norm(g)) with the pointwise grid product.

    Returns NaN (with a warning) when a factor norm vanishes, so corpus
    maxima can skip the pair.
    """
    window = window or WindowSpec()
    nf = modulation_norm(f, window, ws, osc, params)
    ng = modulation_norm(g, window, ws, osc, params)
    if nf == 0.0 or ng == 0.0:
        warnings.warn("algebra pair skipped: zero factor norm", ProbeSkipWarning,
                      stacklevel=2)
        return float("nan")
    product = FieldSample(f.grid, f.values * g.values)
    return modulation_norm(product, window, ws, osc, params) / (nf * ng)


def _inv(e) -> float:
    return 0.0 if is_inf(e) else 1.0 / float(e)


def multilinear_ratio(factors, p_list, q_list, p0, q0, ws: WeightSpec,
                      osc: OscillatorSpec | None = None,
                      window: WindowSpec | None = None) -> float:
    """norm of the m-fold product in M^(p0, q0) over the product of factor
    norms in M^(p_i, q_i); the exponents must satisfy the Hoelder-type
    relations sum 1/p_i = 1/p0 and sum 1/q_i = m - 1 + 1/q0 to 1e-12."""
    m = len(factors)
    if m < 1 or len(p_list) != m or len(q_list) != m:
        raise ValueError("need one (p, q) pair per factor")
    if abs(sum(_inv(p) for p in p_list) - _inv(p0)) > 1e-12:
        raise ValueError("exponents violate sum 1/p_i = 1/p0")
    if abs(sum(_inv(q) for q in q_list) - (m - 1 + _inv(q0))) > 1e-12:
        raise ValueError("exponents violate sum 1/q_i = m - 1 + 1/q0")
    window = window or WindowSpec()
    denom = 1.0
    for f, p, q in zip(factors, p_list, q_list):
        denom *= modulation_norm(f, window, ws, osc, MixedNormParams(p, q))
    if denom == 0.0:
        warnings.warn("multilinear probe skipped: zero factor norm", ProbeSkipWarning,
                      stacklevel=2)
        return float("nan")
    values = factors[0].values.copy()
    for f in factors[1:]:
        values = values * f.values
    product = FieldSample(factors[0].grid, values)
    num = modulation_norm(product, window, ws, osc, MixedNormParams(p0, q0))
    return num / denom


@dataclass(frozen=True)
class SingularWeightResult:
    """Modulation-norm diagnostics of the truncated power singularity."""

    value: float
    value_half: float
    radius: float
    x_growth: float
    xi_tail: tuple
    xi_tail_growth: float


def _xi_tail_accumulator(field_ps, ws, osc, params, bulk_radius, xi_limits):
    """Outer-exponent tail mass A(Xi) = sum over bulk_radius < |xi| <= Xi of
    inner(xi)^q (or the annulus sup for q = INF)."""
    grid = field_ps.grid
    lattice = _weight_lattice(ws, osc, grid)
    mag = np.abs(field_ps.values)
    if lattice is not None:
        mag = mag * lattice
    p, q = params.p, params.q
    if is_inf(p):
        inner = mag.max(axis=0)
    else:
        inner = (np.sum(mag ** float(p), axis=0) * grid.cell_volume) ** (1.0 / float(p))
    radii = np.linalg.norm(grid.frequency_nodes(), axis=1)
    out = []
    for xi_max in xi_limits:
        mask = (radii > bulk_radius) & (radii <= xi_max)
        if is_inf(q):
            acc = float(inner[mask].max()) if np.any(mask) else 0.0
        else:
            acc = float(np.sum(inner[mask] ** float(q)) * grid.frequency_cell)
        out.append((float(xi_max), acc))
    return tuple(out)


def singular_weight_norm(alpha: float, params: MixedNormParams, ws: WeightSpec,
                         radius: float, *, grid: Grid,
                         osc: OscillatorSpec | None = None,
                         window: WindowSpec | None = None,
                         bulk_radius: float = 1.0,
                         tail_radius: float = 2.5) -> SingularWeightResult:
    """Weighted modulation norm of |x|^(-alpha) truncated to |x| <= radius.

    Reports the value at the given radius and at half of it (the x-side
    truncation trend) plus the outer-exponent frequency-tail accumulators at
    tail_radius and twice it. For admissible exponents the value is stable
    under radius doubling; for inadmissible outer exponents the frequency
    tail keeps growing, which is where divergence shows first: the bulk of
    the norm always dominates a lattice total, so the total-norm trend alone
    cannot expose a slowly divergent tail.
    """
    if alpha <= 0:
        raise ValueError("alpha must be positive")
    if ws.s < 0:
        raise ValueError("singular-weight runs need s >= 0")
    if radius > grid.half_width:
        raise ValueError("truncation radius exceeds the grid half-width")
    window = window or WindowSpec()

    def truncated(r):
        nodes_r = np.linalg.norm(grid.nodes(), axis=1)
        vals = np.where(nodes_r <= r, nodes_r ** (-alpha), 0.0)
        return FieldSample(grid, vals)

    f_full = truncated(radius)
    f_half = truncated(radius / 2.0)
    ps_full = stft(f_full, window)
    value = float(mixed_norm(ps_full, ws, osc, params))
    value_half = float(modulation_norm(f_half, window, ws, osc, params))
    x_growth = abs(value - value_half) / value_half if value_half > 0 else float("inf")
    tails = _xi_tail_accumulator(ps_full, ws, osc, params, bulk_radius,
                                 (tail_radius, 2.0 * tail_radius))
    a1, a2 = tails[0][1], tails[1][1]
    tail_growth = (a2 / a1 - 1.0) if a1 > 0 else float("inf")
    return SingularWeightResult(value, value_half, float(radius), float(x_growth),
                                tails, float(tail_growth))


@dataclass(frozen=True)
class EquivalenceBand:
    """Observed band of spectral-norm to modulation-norm ratios."""

    min_ratio: float
    max_ratio: float
    count: int

    @property
    def spread(self) -> float:
        return self.max_ratio / self.min_ratio


def sobolev_modulation_equivalence(dec: SpectralDecomposition, s: float, probes,
                                   window: WindowSpec | None = None) -> EquivalenceBand:
    """Band of ratios sobolev_norm / modulation_norm(p=q=2, anharmonic s).

    Probes are projected onto the retained-mode span first, so the spectral
    norm sees exactly the same object as the lattice norm.
    """
    window = window or WindowSpec()
    params = MixedNormParams(2.0, 2.0)
    ws = WeightSpec("anharmonic", float(s))
    ratios = []
    for f in probes:
        f_span = dec.reconstruct(dec.coefficients(f))
        denom = modulation_norm(f_span, window, ws, dec.oscillator, params)
        if denom == 0.0:
            warnings.warn("equivalence probe skipped: zero modulation norm",
                          ProbeSkipWarning, stacklevel=2)
            continue
        ratios.append(sobolev_norm(dec, s, f_span) / denom)
    if not ratios:
        raise ValueError("all probes were skipped")
    return EquivalenceBand(float(min(ratios)), float(max(ratios)), len(ratios))
