"""Bayesian quantile regression for binary longitudinal data."""

__version__ = "0.1.0"

from .distributions import (  # noqa: E402
    AlParams,
    MixtureConstants,
    al_cdf,
    al_density,
    al_quantile,
    check_loss,
    mixture_constants,
    sample_al,
    sample_gig_half,
    sample_inverse_gamma,
    sample_mvn,
    sample_truncated_normal,
)
from .models import DrawStore, IndividualBlock, McmcState, ModelSpec, PanelDataset, Priors, validate_state  # noqa: E402
from .rng import RandomStream  # noqa: E402
from .sampler import SamplerConfig, run_chain, run_chains  # noqa: E402
