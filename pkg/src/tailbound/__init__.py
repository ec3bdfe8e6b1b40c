"""Exponential tail bounds for the maximum and minimum of random vectors."""

__version__ = "0.1.0"

from .phi import ConjugateResult, PhiFunction, build_phi, legendre_1d  # noqa: E402
from .norms import (GaussianMgf, RademacherMgf, CustomMgf, EmpiricalMgf, bphi_norm,  # noqa: E402
                    natural_function, tail_bound_from_norm, subgaussian_sum_norm,
                    is_strictly_subgaussian)
from .max_tail import (MaxTailInputs, classify_norms, max_tail_upper_full,  # noqa: E402
                       max_tail_upper_two_term, pairwise_joint_upper, max_tail_lower)
from .min_tail import (BivariateSubgaussianParams, GaussianMultivariateMgf, HolderWeights,  # noqa: E402
                       holder_mgf_bound, log_mgf_conjugate, mgf_joint_eval, min_tail_upper,
                       orthant_tail_upper, zeta_bivariate, min_tail_combined_bivariate)
