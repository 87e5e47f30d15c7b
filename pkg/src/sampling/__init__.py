from src.sampling.parameterization import (
    BaseParameterization,
    LogitBox,
    Unconstrained,
    parameterization_from_name,
)
from src.sampling.posterior import (
    PosteriorChain,
    bandit_log_posterior,
    bellman_residual_loss,
    build_posterior,
    linear_log_posterior,
    mdp_log_posterior,
    posterior_sample,
    td_log_likelihood,
)
from src.sampling.sgld import PRIOR_SAMPLE, LogDensity, SgldConfig, sgld_sample

__all__ = [
    "BaseParameterization",
    "LogDensity",
    "LogitBox",
    "PRIOR_SAMPLE",
    "PosteriorChain",
    "SgldConfig",
    "Unconstrained",
    "bandit_log_posterior",
    "bellman_residual_loss",
    "build_posterior",
    "linear_log_posterior",
    "mdp_log_posterior",
    "parameterization_from_name",
    "posterior_sample",
    "sgld_sample",
    "td_log_likelihood",
]
