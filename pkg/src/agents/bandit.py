import math
from typing import Optional

import numpy as np

from constants import UCB_CONSTANT
from src.agents.base import BaseAgent
from src.envs import BaseEnvironment, TaskDistribution
from src.envs.tasks import BETA_PRODUCT
from src.errors import DatasetError, DimensionError, UnsupportedError
from src.maxent import GibbsPrior
from src.model import DemoDataset, OnlineHistory, TaskParam
from src.sampling import PosteriorChain, SgldConfig, posterior_sample
from src.utils import random_argmax


def expert_ts_act(
    prior: GibbsPrior,
    history: OnlineHistory,
    cfg: SgldConfig,
    chain: Optional[PosteriorChain] = None,
    rng: Optional[np.random.Generator] = None,
) -> int:
    """Thompson step under the expert prior: sample θ, play its best arm.

    Args:
        prior (GibbsPrior): Prior bound to a Bernoulli bandit.
        history (OnlineHistory): Pulls so far.
        cfg (SgldConfig): Sampler budget.
        chain (Optional[PosteriorChain]): Persistent chain to continue.
        rng (Optional[np.random.Generator]): Random source.

    Returns:
        int: Arm with the largest sampled mean, ties broken uniformly.
    """
    rng = rng if rng is not None else np.random.default_rng(cfg.seed)
    theta = posterior_sample(prior, history, cfg, chain=chain, rng=rng)
    return random_argmax(theta.values, rng)


def naive_ts_act(
    env: BaseEnvironment,
    history: OnlineHistory,
    cfg: SgldConfig,
    chain: Optional[PosteriorChain] = None,
    rng: Optional[np.random.Generator] = None,
) -> int:
    """`expert_ts_act` under the non-informative reference prior."""
    return expert_ts_act(GibbsPrior.empty(env), history, cfg, chain=chain, rng=rng)


def ucb_indices(counts: np.ndarray, means: np.ndarray, t: int, c: float) -> np.ndarray:
    counts = np.asarray(counts, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        bonus = c * np.sqrt(math.log(t) / counts)
    return np.where(counts > 0, np.asarray(means, dtype=float) + bonus, np.inf)


def naive_ucb_act(
    counts: np.ndarray, means: np.ndarray, t: int, c: float = UCB_CONSTANT
) -> int:
    """UCB1 arm choice.

    Unpulled arms come first (lowest index). Otherwise the arm maximizing
    means[k] + c·√(ln t / counts[k]) is played; ties go to the larger count,
    then the lower index.

    Args:
        counts (np.ndarray): Pulls per arm.
        means (np.ndarray): Empirical mean reward per arm.
        t (int): Episode counter, at least 1.
        c (float): Exploration constant.

    Returns:
        int: Chosen arm.
    """
    if t < 1:
        raise DimensionError(f"UCB needs t ≥ 1, got {t}")
    counts = np.asarray(counts, dtype=float)
    unpulled = np.flatnonzero(counts == 0)
    if unpulled.size:
        return int(unpulled[0])
    index = ucb_indices(counts, means, t, c)
    best = np.flatnonzero(index == index.max())
    return int(best[np.argmax(counts[best])])


def ucb_explore_act(
    demos: DemoDataset,
    counts: np.ndarray,
    means: np.ndarray,
    t: int,
    c: float = UCB_CONSTANT,
) -> int:
    """UCB1 over online pulls merged with optimistically labeled demonstrations.

    Each demonstrated pull of arm a is relabeled with reward
    min(1, online UCB1 index of a), or 1 while a has no online pulls, and the
    arm is chosen by `naive_ucb_act` over the merged counts and means.

    An arm with neither online pulls nor demonstrations is still played before
    any other, lowest index first. Once every arm has merged data, ties go to
    the larger merged count, so with no online data the demo majority is played.
    """
    counts = np.asarray(counts, dtype=float)
    means = np.asarray(means, dtype=float)
    demo_counts = np.bincount(demos.first_actions(), minlength=counts.shape[0]).astype(float)
    pseudo = np.minimum(1.0, ucb_indices(counts, means, t, c))
    merged = counts + demo_counts
    with np.errstate(invalid="ignore", divide="ignore"):
        merged_means = np.where(
            demo_counts > 0, (counts * means + demo_counts * pseudo) / merged, means
        )
    return naive_ucb_act(merged, merged_means, t, c)


def bc_policy(demos: DemoDataset, n_arms: int) -> np.ndarray:
    """Empirical distribution of demonstrated arms, the cross-entropy minimizer."""
    if len(demos) == 0:
        raise DatasetError("behavior cloning needs at least one demonstration")
    counts = np.bincount(demos.first_actions(), minlength=n_arms).astype(float)
    return counts / counts.sum()


def bc_act(demos: DemoDataset, n_arms: int, rng: np.random.Generator) -> int:
    return int(rng.choice(n_arms, p=bc_policy(demos, n_arms)))


def oracle_ts_act(
    dist: TaskDistribution,
    successes: np.ndarray,
    failures: np.ndarray,
    rng: np.random.Generator,
) -> int:
    """Exact Thompson sampling with the true beta-product task distribution.

    Raises:
        UnsupportedError: For any other distribution kind.
    """
    if dist.kind != BETA_PRODUCT:
        raise UnsupportedError("oracle Thompson sampling needs a beta-product distribution")
    sampled = rng.beta(np.asarray(dist.a) + successes, np.asarray(dist.b) + failures)
    return random_argmax(sampled, rng)


class _ArmStatisticsMixin:
    """Running per-arm pull counts and reward sums."""

    def _reset_stats(self, n_arms: int):
        self.counts = np.zeros(n_arms)
        self.sums = np.zeros(n_arms)

    @property
    def means(self) -> np.ndarray:
        return np.divide(self.sums, self.counts, out=np.zeros_like(self.sums), where=self.counts > 0)

    def _record(self):
        for transition in self._episode:
            self.counts[transition.action] += 1
            self.sums[transition.action] += transition.reward


class ThompsonAgent(BaseAgent):
    """Posterior sampling with a persistent SGLD chain.

    Works on Bernoulli bandits (argmax of sampled arm means) and on linear
    bandits (argmax of φ(context, ·)ᵀθ). An empty prior gives the naive agent.
    """

    def __init__(self, prior: GibbsPrior, cfg: SgldConfig, name: str = "expert-ts"):
        super().__init__()
        self.name = name
        self.prior = prior
        self.chain = PosteriorChain(prior=prior, cfg=cfg)
        self.theta: Optional[TaskParam] = None

    def begin_episode(self, rng: np.random.Generator) -> None:
        super().begin_episode(rng)
        self.theta = self.chain.sample(self.history, rng)

    def act(self, state: int, rng: np.random.Generator) -> int:
        q_values = self.prior.env.q_table(self.theta.values)[state]
        return random_argmax(q_values, rng)


class UcbAgent(_ArmStatisticsMixin, BaseAgent):
    def __init__(self, n_arms: int, c: float = UCB_CONSTANT, name: str = "naive-ucb"):
        super().__init__()
        self.name = name
        self.c = c
        self._reset_stats(n_arms)

    def act(self, state: int, rng: np.random.Generator) -> int:
        return naive_ucb_act(self.counts, self.means, self.episodes_seen + 1, self.c)

    def end_episode(self, rng: np.random.Generator) -> None:
        self._record()
        super().end_episode(rng)


class UcbExploreAgent(UcbAgent):
    def __init__(
        self, demos: DemoDataset, n_arms: int, c: float = UCB_CONSTANT, name: str = "ucb-explore"
    ):
        super().__init__(n_arms, c, name)
        self.demos = demos

    def act(self, state: int, rng: np.random.Generator) -> int:
        return ucb_explore_act(
            self.demos, self.counts, self.means, self.episodes_seen + 1, self.c
        )


class BehaviorCloningAgent(BaseAgent):
    def __init__(self, demos: DemoDataset, n_arms: int, name: str = "bc"):
        super().__init__()
        self.name = name
        self.policy = bc_policy(demos, n_arms)

    def act(self, state: int, rng: np.random.Generator) -> int:
        return int(rng.choice(self.policy.shape[0], p=self.policy))


class OracleTsAgent(_ArmStatisticsMixin, BaseAgent):
    def __init__(self, dist: TaskDistribution, name: str = "oracle-ts"):
        if dist.kind != BETA_PRODUCT:
            raise UnsupportedError("oracle Thompson sampling needs a beta-product distribution")
        super().__init__()
        self.name = name
        self.dist = dist
        self._reset_stats(len(dist.a))

    @property
    def posterior(self):
        """Per-arm Beta parameters (a + successes, b + failures)."""
        return np.asarray(self.dist.a) + self.sums, np.asarray(self.dist.b) + self.counts - self.sums

    def act(self, state: int, rng: np.random.Generator) -> int:
        return oracle_ts_act(self.dist, self.sums, self.counts - self.sums, rng)

    def end_episode(self, rng: np.random.Generator) -> None:
        self._record()
        super().end_episode(rng)


class RandomAgent(BaseAgent):
    def __init__(self, n_actions: int, name: str = "random"):
        super().__init__()
        self.name = name
        self.n_actions = n_actions

    def act(self, state: int, rng: np.random.Generator) -> int:
        return int(rng.integers(self.n_actions))
