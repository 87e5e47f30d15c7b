from src.maxent.dual import (
    AdamAscent,
    demo_log_marginal_likelihood,
    dual_gradient,
    dual_objective,
    gibbs_log_weights,
    maximize_dual,
)
from src.maxent.features import (
    CompiledDemos,
    FeatureMatrix,
    build_feature_matrix,
    log_policy,
    traj_log_likelihood,
)
from src.maxent.prior import (
    FitOptions,
    FitReport,
    GibbsPrior,
    fit_prior,
    gibbs_weights,
    grad_log_prior,
    load_prior,
    log_prior_pdf,
    prior_normalization_check,
    reference_resample,
    save_prior,
)
from src.maxent.reference import (
    BaseReferenceSampler,
    DiscreteReference,
    GaussianReference,
    UniformBoxReference,
    default_reference,
    reference_from_dict,
)

__all__ = [
    "AdamAscent",
    "BaseReferenceSampler",
    "CompiledDemos",
    "DiscreteReference",
    "FeatureMatrix",
    "FitOptions",
    "FitReport",
    "GaussianReference",
    "GibbsPrior",
    "UniformBoxReference",
    "build_feature_matrix",
    "default_reference",
    "demo_log_marginal_likelihood",
    "dual_gradient",
    "dual_objective",
    "fit_prior",
    "gibbs_log_weights",
    "gibbs_weights",
    "grad_log_prior",
    "load_prior",
    "log_policy",
    "log_prior_pdf",
    "maximize_dual",
    "prior_normalization_check",
    "reference_resample",
    "reference_from_dict",
    "save_prior",
    "traj_log_likelihood",
]
