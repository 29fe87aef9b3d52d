"""Phase-space laboratory for fractional anharmonic oscillator semigroups.

The package builds discrete oscillators (fractional Laplacian plus a strictly
positive even-degree potential), diagonalises them on staggered periodic
grids, and measures modulation-space norms of spectral flows: heat smoothing
rates, long-time decay, Sobolev equivalence bands, algebra ratios, singular
initial data, small-data nonlinear evolution, and the Gaussian-conjugated
Ornstein-Uhlenbeck picture.
"""

__version__ = "0.1.0"

from .errors import (AnharmonicError, BoundaryMassWarning, DiscardedMassWarning,
                     InvalidSpecError, NonConvergenceError, NumericalError,
                     OffSpanWarning, ProbeSkipWarning, SchemaError, TruncationError)
from .model import (INF, MixedNormParams, OscillatorSpec, PotentialSpec, WeightSpec,
                    check_exponent, evaluate_potential, exponent_from_json,
                    exponent_to_json, hermite_oscillator, is_inf, norm_params_from_dict,
                    norm_params_to_dict, oscillator, oscillator_from_dict,
                    oscillator_to_dict, potential_from_dict, potential_to_dict,
                    submultiplicativity_defect, weight_from_dict, weight_to_dict,
                    weight_value)
from .spectral import (FieldSample, Grid, GrowthFit, SpectralDecomposition,
                       assemble_operator, cache_key, decompose, default_grid,
                       eigendecompose, eigenvalue_growth_fit, field_from_function,
                       gershgorin_bounds, growth_target, load_decomposition,
                       save_decomposition)
from .calculus import (SemigroupQuery, apply_spectral_function, fractional_power,
                       heat_semigroup, project, sobolev_norm)
from .phasespace import (PhaseSpaceField, WindowSpec, gaussian_half_density,
                         gaussian_stft, mixed_norm, modulation_norm, stft,
                         window_values)
from .estimators import (DecayFitResult, EquivalenceBand, LongtimeRateResult,
                         SingularWeightResult, WeightQuotientParams, algebra_ratio,
                         eigenfunction_probes, fit_decay_exponent, gaussian_probe_fields,
                         longtime_rate, multilinear_ratio, probe_operator_bound,
                         sigma_exponent, singular_weight_norm, smoothing_decay_run,
                         sobolev_modulation_equivalence, spectral_sum_bound,
                         standard_probe_family, weight_quotient_norm)
from .nlheat import (NonlinearProblemSpec, ThresholdResult, Trajectory,
                     apply_nonlinearity, duhamel_residual, etd_evolve, picard_solve,
                     replace_u0, smallness_threshold)
from .ougauss import (GaussianConjugation, OuRateResult, apply_conjugation,
                      conjugation_discarded_mass, gaussian_modulation_norm,
                      ou_probe_rate, ou_semigroup)

__all__ = [
    "__version__",
    # errors and warnings
    "AnharmonicError", "InvalidSpecError", "NumericalError", "TruncationError",
    "NonConvergenceError", "SchemaError", "BoundaryMassWarning", "OffSpanWarning",
    "ProbeSkipWarning", "DiscardedMassWarning",
    # model
    "INF", "is_inf", "check_exponent", "PotentialSpec", "evaluate_potential",
    "OscillatorSpec", "oscillator", "hermite_oscillator", "WeightSpec", "weight_value",
    "submultiplicativity_defect", "MixedNormParams", "exponent_to_json",
    "exponent_from_json", "potential_to_dict", "potential_from_dict",
    "oscillator_to_dict", "oscillator_from_dict", "weight_to_dict", "weight_from_dict",
    "norm_params_to_dict", "norm_params_from_dict",
    # spectral
    "Grid", "default_grid", "FieldSample", "field_from_function", "assemble_operator",
    "gershgorin_bounds", "SpectralDecomposition", "eigendecompose", "decompose",
    "GrowthFit", "growth_target", "eigenvalue_growth_fit", "cache_key",
    "save_decomposition", "load_decomposition",
    # calculus
    "SemigroupQuery", "apply_spectral_function", "heat_semigroup", "fractional_power",
    "project", "sobolev_norm",
    # phasespace
    "WindowSpec", "window_values", "PhaseSpaceField", "stft", "gaussian_half_density",
    "gaussian_stft", "mixed_norm", "modulation_norm",
    # estimators
    "sigma_exponent", "WeightQuotientParams", "weight_quotient_norm", "DecayFitResult",
    "fit_decay_exponent", "smoothing_decay_run", "gaussian_probe_fields",
    "eigenfunction_probes", "standard_probe_family", "probe_operator_bound",
    "LongtimeRateResult", "longtime_rate", "spectral_sum_bound", "algebra_ratio",
    "multilinear_ratio", "SingularWeightResult", "singular_weight_norm",
    "EquivalenceBand", "sobolev_modulation_equivalence",
    # nlheat
    "NonlinearProblemSpec", "apply_nonlinearity", "Trajectory", "picard_solve",
    "etd_evolve", "duhamel_residual", "ThresholdResult", "smallness_threshold",
    "replace_u0",
    # ougauss
    "GaussianConjugation", "conjugation_discarded_mass", "apply_conjugation",
    "ou_semigroup", "gaussian_modulation_norm", "OuRateResult", "ou_probe_rate",
]
