"""Numerical companion for frequent hypercyclicity of weighted shifts and translation semigroups."""

from ._common import (ContractError, GenerationError, HorizonTooSmallError, HypothesisViolation,
                      HypothesisWarning, InvalidInputError, InvalidWeightError, NormalizationError,
                      ResolutionError, SpecInconsistencyError, Verdict, WindowError)
from .conjugacy import P_apply, Q_apply, verify_diagram_P, verify_diagram_Q
from .dyadic import (BasisOrdering, DyadicIndex, SampledFunction, hat_eval, rank, reconstruct,
                     schauder_coefficients, wn_set)
from .freqdyn import (FrequencySets, check_c0_translation_fh, check_thm21_conditions,
                      check_unconditional_series, construct_fh_vector, continuous_lower_density,
                      extract_frequency_sets, generate_frequency_sets, lower_density, orbit_scan)
from .shifts import (LogSeq, PseudoShiftSpec, SparseSeq, backward_shift_spec, discretize_lp,
                     lpv_conjugate, pseudo_shift_apply, shift_spec_from_weight)
from .weights import (Weight, check_admissibility, check_chaos_c0, check_chaos_lp, check_fh_lp,
                      check_hypercyclic_translation, family_weight, step_normalize,
                      weight_from_config, weight_from_shift_weights)

__version__ = "0.1.0"
