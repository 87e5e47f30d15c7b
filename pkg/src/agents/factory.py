from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from constants import (
    BOOTSTRAP_MASK_RATE,
    DQN_GRADIENT_STEPS,
    DQN_LEARNING_RATE,
    ENSEMBLE_SIZE,
    UCB_CONSTANT,
)
from src.agents.bandit import (
    BehaviorCloningAgent,
    OracleTsAgent,
    RandomAgent,
    ThompsonAgent,
    UcbAgent,
    UcbExploreAgent,
)
from src.agents.base import BaseAgent
from src.agents.ensemble import BootstrappedDqnAgent, init_ensemble
from src.envs import BaseEnvironment, BernoulliBanditSpec, DeepSeaSpec, TaskDistribution
from src.errors import ConfigError, UnsupportedError
from src.maxent import GibbsPrior
from src.model import DemoDataset
from src.sampling import SgldConfig

BANDIT_AGENTS = (
    "expert-ts",
    "naive-ts",
    "naive-ucb",
    "bc",
    "oracle-ts",
    "ucb-explore",
    "random",
)
MDP_AGENTS = ("expert-bootdqn", "naive-bootdqn", "random")
AGENT_KINDS = tuple(dict.fromkeys(BANDIT_AGENTS + MDP_AGENTS))
# Accepted in configs and resolved to the kind on the right.
KIND_ALIASES = {"experior-ts": "expert-ts", "experior-bootdqn": "expert-bootdqn"}


@dataclass(frozen=True)
class AgentConfig:
    """Agent kind plus the parameters that kind reads.

    Attributes:
        kind (str): One of `AGENT_KINDS`, or a name in `KIND_ALIASES`.
        label (Optional[str]): Name used in reports, the kind if None.
        ucb_constant (float): UCB exploration constant.
        ensemble_size (int): Bootstrapped DQN members.
        mask_rate (float): Bootstrap mask probability.
        learning_rate (float): TD step size.
        gradient_steps (int): TD steps per episode.
        sgld (SgldConfig): Sampler budget for posterior draws and prior init.
    """

    kind: str
    label: Optional[str] = None
    ucb_constant: float = UCB_CONSTANT
    ensemble_size: int = ENSEMBLE_SIZE
    mask_rate: float = BOOTSTRAP_MASK_RATE
    learning_rate: float = DQN_LEARNING_RATE
    gradient_steps: int = DQN_GRADIENT_STEPS
    sgld: SgldConfig = field(default_factory=SgldConfig)

    def __post_init__(self):
        object.__setattr__(self, "kind", KIND_ALIASES.get(self.kind, self.kind))
        if self.kind not in AGENT_KINDS:
            raise ConfigError(f"unknown agent kind {self.kind!r}")
        if self.ensemble_size < 1:
            raise ConfigError("ensemble_size must be at least 1")
        if not 0 < self.mask_rate <= 1:
            raise ConfigError("mask_rate must lie in (0, 1]")
        if self.learning_rate <= 0 or self.gradient_steps < 0:
            raise ConfigError("learning_rate must be positive and gradient_steps nonnegative")
        if self.ucb_constant < 0:
            raise ConfigError("ucb_constant must be nonnegative")

    @property
    def name(self) -> str:
        return self.label or self.kind


class BaseAgentFactory(ABC):
    """Abstract base class for agent factories bound to one task distribution."""

    def __init__(
        self,
        env: BaseEnvironment,
        prior: Optional[GibbsPrior] = None,
        demos: Optional[DemoDataset] = None,
        dist: Optional[TaskDistribution] = None,
    ):
        """Initialize the factory with what agents may be built from.

        Args:
            env (BaseEnvironment): Environment the agents act in.
            prior (Optional[GibbsPrior]): Fitted expert prior.
            demos (Optional[DemoDataset]): Expert demonstrations.
            dist (Optional[TaskDistribution]): True task distribution, oracle only.
        """
        self.env = env
        self.prior = prior
        self.demos = demos if demos is not None else DemoDataset.empty(env.signature)
        self.dist = dist

    def _require_prior(self, cfg: AgentConfig) -> GibbsPrior:
        if self.prior is None:
            raise ConfigError(f"agent {cfg.name!r} needs a fitted prior")
        return self.prior

    @abstractmethod
    def create_agent(self, cfg: AgentConfig, rng: np.random.Generator) -> BaseAgent:
        """Create a fresh agent.

        Args:
            cfg (AgentConfig): Agent settings.
            rng (np.random.Generator): Random source for initialization.

        Returns:
            BaseAgent: A configured agent with empty history.
        """
        pass


class BanditAgentFactory(BaseAgentFactory):
    """Factory for agents on Bernoulli and linear bandits."""

    def create_agent(self, cfg: AgentConfig, rng: np.random.Generator) -> BaseAgent:
        n_arms = self.env.n_actions
        if cfg.kind == "expert-ts":
            return ThompsonAgent(self._require_prior(cfg), cfg.sgld, name=cfg.name)
        if cfg.kind == "naive-ts":
            return ThompsonAgent(GibbsPrior.empty(self.env), cfg.sgld, name=cfg.name)
        if cfg.kind == "random":
            return RandomAgent(n_arms, name=cfg.name)
        if not isinstance(self.env, BernoulliBanditSpec):
            raise UnsupportedError(f"agent {cfg.kind!r} needs a Bernoulli bandit")
        if cfg.kind == "naive-ucb":
            return UcbAgent(n_arms, cfg.ucb_constant, name=cfg.name)
        if cfg.kind == "ucb-explore":
            return UcbExploreAgent(self.demos, n_arms, cfg.ucb_constant, name=cfg.name)
        if cfg.kind == "bc":
            return BehaviorCloningAgent(self.demos, n_arms, name=cfg.name)
        if cfg.kind == "oracle-ts":
            if self.dist is None:
                raise ConfigError("oracle-ts needs the true task distribution")
            return OracleTsAgent(self.dist, name=cfg.name)
        raise UnsupportedError(f"agent {cfg.kind!r} does not act on bandits")


class DeepSeaAgentFactory(BaseAgentFactory):
    """Factory for agents on Deep Sea."""

    def create_agent(self, cfg: AgentConfig, rng: np.random.Generator) -> BaseAgent:
        if cfg.kind == "random":
            return RandomAgent(self.env.n_actions, name=cfg.name)
        if cfg.kind not in ("expert-bootdqn", "naive-bootdqn"):
            raise UnsupportedError(f"agent {cfg.kind!r} does not act on Deep Sea")
        prior = self._require_prior(cfg) if cfg.kind == "expert-bootdqn" else None
        ensemble = init_ensemble(self.env, prior, cfg.ensemble_size, cfg.sgld, rng)
        return BootstrappedDqnAgent(
            self.env,
            ensemble,
            mask_rate=cfg.mask_rate,
            learning_rate=cfg.learning_rate,
            gradient_steps=cfg.gradient_steps,
            name=cfg.name,
        )


def agent_factory_for(
    env: BaseEnvironment,
    prior: Optional[GibbsPrior] = None,
    demos: Optional[DemoDataset] = None,
    dist: Optional[TaskDistribution] = None,
) -> BaseAgentFactory:
    """Pick the factory matching an environment."""
    if isinstance(env, DeepSeaSpec):
        return DeepSeaAgentFactory(env, prior, demos, dist)
    return BanditAgentFactory(env, prior, demos, dist)
