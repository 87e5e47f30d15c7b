from src.agents.bandit import (
    BehaviorCloningAgent,
    OracleTsAgent,
    RandomAgent,
    ThompsonAgent,
    UcbAgent,
    UcbExploreAgent,
    bc_act,
    bc_policy,
    expert_ts_act,
    naive_ts_act,
    naive_ucb_act,
    oracle_ts_act,
    ucb_explore_act,
)
from src.agents.base import BaseAgent
from src.agents.ensemble import (
    BootstrappedDqnAgent,
    EnsembleState,
    ReplayBuffer,
    bootdqn_episode,
    bootdqn_update,
    greedy_action,
    init_ensemble,
)
from src.agents.factory import (
    AGENT_KINDS,
    BANDIT_AGENTS,
    KIND_ALIASES,
    MDP_AGENTS,
    AgentConfig,
    BanditAgentFactory,
    BaseAgentFactory,
    DeepSeaAgentFactory,
    agent_factory_for,
)

__all__ = [
    "AGENT_KINDS",
    "AgentConfig",
    "BANDIT_AGENTS",
    "KIND_ALIASES",
    "BanditAgentFactory",
    "BaseAgent",
    "BaseAgentFactory",
    "BehaviorCloningAgent",
    "BootstrappedDqnAgent",
    "DeepSeaAgentFactory",
    "EnsembleState",
    "MDP_AGENTS",
    "OracleTsAgent",
    "RandomAgent",
    "ReplayBuffer",
    "ThompsonAgent",
    "UcbAgent",
    "UcbExploreAgent",
    "agent_factory_for",
    "bc_act",
    "bc_policy",
    "bootdqn_episode",
    "bootdqn_update",
    "expert_ts_act",
    "greedy_action",
    "init_ensemble",
    "naive_ts_act",
    "naive_ucb_act",
    "oracle_ts_act",
    "ucb_explore_act",
]
