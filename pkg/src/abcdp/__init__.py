"""Differentially private approximate Bayesian computation (ABC) with a sparse-vector acceptance rule."""
from .analytics import (
    FlipProfile,
    PosteriorFunctional,
    expected_error_bound,
    flip_probability,
    flip_profile,
    flip_profile_grid,
    realized_error,
    tail_error_bound,
)
from .config import ConfigError, ExperimentConfig, load_config
from .distance import GaussianKernel, MMDDistance, WeightedL2Distance, mmd, mmd_squared
from .engine import (
    AbcResult,
    AccountingError,
    IndicatorTrace,
    PrivacyBudget,
    ProposalRecord,
    accountant_report,
    epsilon_from_scale,
    noise_scale_from_budget,
    rejection_indicators,
    run_abcdp,
    run_rejection_abc,
    sparse_vector_indicators,
)
from .noise import NoiseDiffDistribution, cdf_z, pdf_z, sample_laplace, tail_g
from .seeding import derive_seed, make_rng

__version__ = "0.1.0"
