"""Compander-based quantization of probability vectors under KL divergence."""

import types as _types

from .compander import (
    ArcSinhCompander,
    BetaCompander,
    Compander,
    IdentityCompander,
    L1SimplexCompander,
    L2SimplexCompander,
    MixedCompander,
    PowerCompander,
    TabulatedCompander,
    build_compander,
    compander_from_record,
)
from .datasets import EmpiricalDistribution, kmer_frequencies, sample_uniform_simplex, word_frequencies
from .distill import (
    JointDistribution,
    brute_force_distiller,
    brute_force_quantizer,
    degrading_cost_bounds,
    distiller_from_quantizer,
    mutual_information,
    pushforward_prior,
)
from .errors import (
    DomainError,
    EmptyDistributionError,
    KLCompandError,
    NumericalError,
    ParameterError,
    ParseError,
    SizeError,
    SolverError,
)
from .estimator import CompanderQuantizer
from .experiments import ExperimentConfig, run
from .floatfmt import BFLOAT16, MINIFLOAT8, FloatFormat, float_roundtrip
from .losses import (
    LossReport,
    alt_loss,
    asymptotic_loss,
    convergence_probe,
    expected_loss_mc,
    kl_divergence,
    minimax_saddle_loss,
    optimal_compander,
    single_letter_loss,
)
from .methods import make_quantizer
from .priors import (
    MaximinConstants,
    dirichlet_marginal,
    maximin_density,
    sample_coupled,
    sample_hard_prior,
    solve_maximin_constants,
    uniform_bad_prior,
)
from .quantizer import Quantizer, quantize_vector
from .worstcase import adversarial_search, worstcase_bound

__version__ = "0.1.0"

__all__ = sorted(n for n, v in globals().items() if not n.startswith("_") and not isinstance(v, _types.ModuleType))
