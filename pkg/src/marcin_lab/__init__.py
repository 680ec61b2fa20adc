"""Numerical laboratory for dyadic martingale-difference maximal constants
and their harmonic-analysis counterparts."""
from .dyadic import (DyadicSpace, SampleVector, ShapeError, conditional_expectation, martingale_diff,
                     martingale_parts, martingale_synthesis)
from .matrices import Matrix, transform
from .maximal import (EstimateOptions, Mode, NormEstimate, H_estimate, adversarial_pair, apply_TA, apply_VA,
                      bv_upper_bound, estimate_h, exact_h2_oracle, h_ratio, maximal_function,
                      trivial_upper_bound, truncation_sequence)
from .lorentz import WeightSequence, check_conditions, d_norm, d_star_norm, lorentz_column_bound, make_weight
from .counterexamples import band_matrix, sign_matrix, verify_counterexample
from .harmonic import (GridFunction, PeriodicGrid, Symbol, apply_bilinear, cross_norm, paraproduct,
                       paraproduct_spectrum, sigma_from_matrix)
from .symbols import (coefficient_table, equivalence_experiment, estimate_multiplier_norm, h_norm_estimate,
                      marcinkiewicz_symbol, resynthesize, resynthesis_errors)

__version__ = "0.1.0"
