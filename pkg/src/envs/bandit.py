from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from src.envs.base import BaseEnvironment
from src.errors import DimensionError
from src.model import EnvSignature, TaskKind, TaskParam


def bernoulli_pull(theta: TaskParam, arm: int, rng: np.random.Generator) -> int:
    """Draw a Bernoulli(theta[arm]) reward.

    Args:
        theta (TaskParam): Arm means.
        arm (int): Pulled arm.
        rng (np.random.Generator): Random source.

    Returns:
        int: Reward in {0, 1}.
    """
    if not 0 <= arm < len(theta):
        raise DimensionError(f"arm {arm} ≥ K={len(theta)}")
    return int(rng.random() < theta.values[arm])


@dataclass(frozen=True)
class BernoulliBanditSpec(BaseEnvironment):
    """K-armed Bernoulli bandit. A single dummy state 0, horizon 1."""

    K: int

    task_kind = TaskKind.BANDIT

    def __post_init__(self):
        if self.K < 2:
            raise DimensionError(f"a bandit needs K ≥ 2 arms, got {self.K}")

    @property
    def signature(self) -> str:
        return str(EnvSignature("bandit", {"K": self.K}))

    @property
    def n_states(self) -> int:
        return 1

    @property
    def n_actions(self) -> int:
        return self.K

    @property
    def horizon(self) -> int:
        return 1

    @property
    def param_dim(self) -> int:
        return self.K

    def q_tables(self, thetas: np.ndarray) -> np.ndarray:
        return np.asarray(thetas, dtype=float)[:, None, :]

    def pullback(self, grad_q: np.ndarray) -> np.ndarray:
        return np.asarray(grad_q, dtype=float)[0].copy()

    def initial_state(self, rng: np.random.Generator) -> int:
        return 0

    def step(
        self, task: TaskParam, state: int, action: int, rng: np.random.Generator
    ) -> Tuple[int, float, bool]:
        return 0, float(bernoulli_pull(task, action, rng)), True

    def optimal_value(self, task: TaskParam, state: int = 0) -> float:
        return float(task.values.max())

    def expected_reward(self, task: TaskParam, state: int, action: int) -> float:
        return float(task.values[action])


@dataclass(frozen=True, eq=False)
class LinearBanditSpec(BaseEnvironment):
    """Linear contextual bandit with mean reward φ(s, a)ᵀθ and unit Gaussian noise.

    Attributes:
        features (np.ndarray): Feature table of shape (contexts, K, d).
        context_probs (Optional[np.ndarray]): Context distribution, uniform if None.
    """

    features: np.ndarray
    context_probs: Optional[np.ndarray] = None

    task_kind = TaskKind.LINEAR

    def __post_init__(self):
        features = np.array(self.features, dtype=float)
        if features.ndim != 3:
            raise DimensionError("features must have shape (contexts, K, d)")
        if not np.all(np.isfinite(features)):
            raise DimensionError("features must be finite")
        features.setflags(write=False)
        object.__setattr__(self, "features", features)

        contexts = features.shape[0]
        probs = (
            np.full(contexts, 1.0 / contexts)
            if self.context_probs is None
            else np.array(self.context_probs, dtype=float)
        )
        if probs.shape != (contexts,) or not np.isclose(probs.sum(), 1.0):
            raise DimensionError("context distribution must sum to 1 over contexts")
        probs.setflags(write=False)
        object.__setattr__(self, "context_probs", probs)

    @property
    def signature(self) -> str:
        contexts, K, d = self.features.shape
        return str(EnvSignature("linear", {"K": K, "d": d, "contexts": contexts}))

    @property
    def n_states(self) -> int:
        return self.features.shape[0]

    @property
    def n_actions(self) -> int:
        return self.features.shape[1]

    @property
    def horizon(self) -> int:
        return 1

    @property
    def param_dim(self) -> int:
        return self.features.shape[2]

    def q_tables(self, thetas: np.ndarray) -> np.ndarray:
        return np.einsum("ckd,sd->sck", self.features, np.asarray(thetas, dtype=float))

    def pullback(self, grad_q: np.ndarray) -> np.ndarray:
        return np.einsum("ck,ckd->d", np.asarray(grad_q, dtype=float), self.features)

    def initial_state(self, rng: np.random.Generator) -> int:
        return int(rng.choice(self.n_states, p=self.context_probs))

    def step(
        self, task: TaskParam, state: int, action: int, rng: np.random.Generator
    ) -> Tuple[int, float, bool]:
        return self.n_states, linear_pull(self, task, state, action, rng), True

    def optimal_value(self, task: TaskParam, state: int) -> float:
        return float((self.features[state] @ task.values).max())

    def expected_reward(self, task: TaskParam, state: int, action: int) -> float:
        return float(self.features[state, action] @ task.values)


def linear_pull(
    spec: LinearBanditSpec,
    theta: TaskParam,
    context: int,
    arm: int,
    rng: np.random.Generator,
) -> float:
    """Draw φ(context, arm)ᵀθ + 𝒩(0, 1)."""
    return float(spec.features[context, arm] @ theta.values + rng.standard_normal())
