"""Bayesian planning of simple step-stress accelerated life tests for items
with two independent Weibull competing failure modes.

The package covers the whole pipeline: model primitives, censored
likelihood, data simulation, maximum likelihood with bootstrap
goodness-of-fit, reparametrised gamma prior elicitation, gradient-based
posterior sampling with convergence gating, and preposterior-variance
optimal design search over stress-change time and lower stress level.
"""

from .backend import BACKEND
from .model import (
    Dataset,
    DesignSpec,
    ModelParams,
    Observation,
    StressFrame,
    overall_cdf,
    standardise_stress,
    sub_cdf,
    theta,
    transformed_time,
    use_quantile,
)
from .likelihood import LogLikValue, log_lik
from .simulate import RngSeed, derive, simulate_dataset
from .mle import GofResult, MleFit, fit_mle, gof_bootstrap
from .priors import (
    BootstrapSummary,
    GammaPrior,
    PhiParams,
    build_prior,
    elicit_bootstrap,
    from_phi,
    log_prior_natural,
    log_prior_phi,
    mom_gamma,
    to_phi,
)
from .mcmc import (
    Diagnostics,
    PosteriorDraws,
    SamplerConfig,
    diagnose,
    sample_posterior,
    sample_with_refit,
)
from .criteria import (
    CriterionPoint,
    CriterionSurface,
    criterion_at,
    optimise_1d,
    optimise_2d,
    smooth_1d,
    smooth_2d,
)

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "BootstrapSummary",
    "CriterionPoint",
    "CriterionSurface",
    "Dataset",
    "DesignSpec",
    "Diagnostics",
    "GammaPrior",
    "GofResult",
    "LogLikValue",
    "MleFit",
    "ModelParams",
    "Observation",
    "PhiParams",
    "PosteriorDraws",
    "RngSeed",
    "SamplerConfig",
    "StressFrame",
    "build_prior",
    "criterion_at",
    "derive",
    "diagnose",
    "elicit_bootstrap",
    "fit_mle",
    "from_phi",
    "gof_bootstrap",
    "log_lik",
    "log_prior_natural",
    "log_prior_phi",
    "mom_gamma",
    "optimise_1d",
    "optimise_2d",
    "overall_cdf",
    "sample_posterior",
    "sample_with_refit",
    "simulate_dataset",
    "smooth_1d",
    "smooth_2d",
    "standardise_stress",
    "sub_cdf",
    "theta",
    "to_phi",
    "transformed_time",
    "use_quantile",
]
