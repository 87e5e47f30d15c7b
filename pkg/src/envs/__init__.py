from src.envs.bandit import (
    BernoulliBanditSpec,
    LinearBanditSpec,
    bernoulli_pull,
    linear_pull,
)
from src.envs.base import BaseEnvironment
from src.envs.deep_sea import LEFT, RIGHT, DeepSeaSpec, deep_sea_step, solve_deep_sea_q
from src.envs.experts import (
    expert_action_probs,
    expert_policy,
    generate_demos,
    optimal_action_entropy,
)
from src.envs.tasks import (
    TaskDistribution,
    sample_beta_product_distribution,
    sample_task,
)

__all__ = [
    "BaseEnvironment",
    "BernoulliBanditSpec",
    "DeepSeaSpec",
    "LEFT",
    "LinearBanditSpec",
    "RIGHT",
    "TaskDistribution",
    "bernoulli_pull",
    "deep_sea_step",
    "expert_action_probs",
    "expert_policy",
    "generate_demos",
    "linear_pull",
    "optimal_action_entropy",
    "sample_beta_product_distribution",
    "sample_task",
    "solve_deep_sea_q",
]
