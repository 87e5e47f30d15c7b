from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from constants import BETA_PARAM_HIGH, BETA_PARAM_LOW
from src.envs.base import BaseEnvironment
from src.envs.deep_sea import DeepSeaSpec, solve_deep_sea_q
from src.errors import DimensionError, UnsupportedError
from src.model import TaskKind, TaskParam
from src.utils import SeedLike, as_rng

BETA_PRODUCT = "beta-product"
POINT_MASS = "point-mass"
CATEGORICAL_GOAL = "categorical-goal"
GAUSSIAN = "gaussian"


@dataclass(frozen=True)
class TaskDistribution:
    """Distribution μ* over tasks.

    Build instances with the classmethods rather than the constructor.
    """

    kind: str
    a: Tuple[float, ...] = ()
    b: Tuple[float, ...] = ()
    point: Optional[TaskParam] = None
    goal_probs: Tuple[float, ...] = ()
    mean: Tuple[float, ...] = ()
    std: float = 1.0

    def __post_init__(self):
        if self.kind == BETA_PRODUCT:
            if len(self.a) != len(self.b) or not self.a:
                raise DimensionError("beta parameters must pair up per arm")
            if min(self.a) <= 0 or min(self.b) <= 0:
                raise DimensionError("beta parameters must be positive")
        elif self.kind == POINT_MASS:
            if self.point is None:
                raise DimensionError("point-mass distribution needs a task")
        elif self.kind == CATEGORICAL_GOAL:
            probs = np.asarray(self.goal_probs)
            if probs.size == 0 or np.any(probs < 0) or not np.isclose(probs.sum(), 1):
                raise DimensionError("goal distribution must sum to 1")
        elif self.kind == GAUSSIAN:
            if not self.mean or self.std <= 0:
                raise DimensionError("gaussian distribution needs a mean and std > 0")
        else:
            raise UnsupportedError(f"unknown task distribution kind {self.kind!r}")

    @classmethod
    def beta_product(cls, a, b) -> "TaskDistribution":
        return cls(kind=BETA_PRODUCT, a=tuple(map(float, a)), b=tuple(map(float, b)))

    @classmethod
    def point_mass(cls, theta: TaskParam) -> "TaskDistribution":
        return cls(kind=POINT_MASS, point=theta)

    @classmethod
    def categorical_goal(cls, probs) -> "TaskDistribution":
        return cls(kind=CATEGORICAL_GOAL, goal_probs=tuple(map(float, probs)))

    @classmethod
    def gaussian(cls, mean, std: float = 1.0) -> "TaskDistribution":
        return cls(kind=GAUSSIAN, mean=tuple(map(float, mean)), std=float(std))

    @classmethod
    def for_deep_sea(cls, spec: DeepSeaSpec) -> "TaskDistribution":
        return cls.categorical_goal(spec.goal_probs())


def sample_task(
    dist: TaskDistribution, seed: SeedLike, env: Optional[BaseEnvironment] = None
) -> TaskParam:
    """Draw one task from μ*.

    Args:
        dist (TaskDistribution): Task distribution.
        seed (SeedLike): Seed or generator.
        env (Optional[BaseEnvironment]): Required for goal distributions,
            whose tasks are returned as the optimal Q-table of the drawn goal.

    Returns:
        TaskParam: The sampled task.
    """
    rng = as_rng(seed)
    if dist.kind == BETA_PRODUCT:
        return TaskParam(rng.beta(dist.a, dist.b), kind=TaskKind.BANDIT)
    if dist.kind == POINT_MASS:
        return dist.point
    if dist.kind == CATEGORICAL_GOAL:
        if not isinstance(env, DeepSeaSpec):
            raise UnsupportedError("goal distributions need a Deep Sea environment")
        goal = int(rng.choice(len(dist.goal_probs), p=dist.goal_probs))
        task, _ = solve_deep_sea_q(env, goal)
        return task
    mean = np.asarray(dist.mean)
    return TaskParam(
        mean + dist.std * rng.standard_normal(mean.shape[0]), kind=TaskKind.LINEAR
    )


def sample_beta_product_distribution(K: int, seed: SeedLike) -> TaskDistribution:
    """Random per-arm beta task distribution with parameters uniform on [0.05, 4].

    Args:
        K (int): Number of arms.
        seed (SeedLike): Seed or generator.

    Returns:
        TaskDistribution: A beta-product distribution.
    """
    if K < 2:
        raise DimensionError(f"a bandit needs K ≥ 2 arms, got {K}")
    rng = as_rng(seed)
    params = rng.uniform(BETA_PARAM_LOW, BETA_PARAM_HIGH, size=(2, K))
    return TaskDistribution.beta_product(params[0], params[1])
