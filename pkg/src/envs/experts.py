import math

import numpy as np
from scipy.special import softmax
from scipy.stats import entropy

from constants import TIE_TOLERANCE
from src.envs.base import BaseEnvironment
from src.envs.tasks import (
    BETA_PRODUCT,
    CATEGORICAL_GOAL,
    POINT_MASS,
    TaskDistribution,
    sample_task,
)
from src.errors import DimensionError
from src.model import DemoDataset, TaskParam, Trajectory
from src.utils import SeedLike, argmax_ties, as_rng


def expert_policy(q_values: np.ndarray, beta: float) -> np.ndarray:
    """Noisily rational action distribution softmax(β·Q).

    Args:
        q_values (np.ndarray): Q-values of one state.
        beta (float): Inverse temperature in [0, ∞]; ∞ splits mass
            uniformly over the argmax set.

    Returns:
        np.ndarray: Probability vector over actions.
    """
    q_values = np.asarray(q_values, dtype=float)
    if beta < 0:
        raise DimensionError(f"β must be nonnegative, got {beta}")
    if math.isinf(beta):
        ties = argmax_ties(q_values).astype(float)
        return ties / ties.sum()
    return softmax(beta * q_values)


def expert_action_probs(
    env: BaseEnvironment, task: TaskParam, state: int, beta: float
) -> np.ndarray:
    """Expert policy of `task` at `state`."""
    return expert_policy(env.optimal_q(task)[state], beta)


def generate_demos(
    env: BaseEnvironment,
    dist: TaskDistribution,
    beta: float,
    n_demos: int,
    seed: SeedLike,
) -> DemoDataset:
    """Roll out noisily rational experts on tasks drawn i.i.d. from μ*.

    Only states and actions are recorded; rewards and tasks are discarded.

    Args:
        env (BaseEnvironment): Environment.
        dist (TaskDistribution): Task distribution μ*.
        beta (float): Expert inverse temperature.
        n_demos (int): Number of demonstrations N ≥ 1.
        seed (SeedLike): Seed or generator.

    Returns:
        DemoDataset: N demonstrations.
    """
    if n_demos < 1:
        raise DimensionError(f"need at least one demonstration, got {n_demos}")
    rng = as_rng(seed)
    trajectories = []
    for _ in range(n_demos):
        task = sample_task(dist, rng, env)
        q_table = env.optimal_q(task)
        state = env.initial_state(rng)
        steps = []
        done = False
        while not done:
            probs = expert_policy(q_table[state], beta)
            action = int(rng.choice(env.n_actions, p=probs))
            steps.append((state, action))
            state, _, done = env.step(task, state, action, rng)
        trajectories.append(Trajectory(steps=tuple(steps), terminal=state))
    return DemoDataset(trajectories=tuple(trajectories), env_signature=env.signature)


def optimal_action_entropy(
    env: BaseEnvironment, dist: TaskDistribution, mc_samples: int, seed: SeedLike
) -> float:
    """Entropy (nats) of the identity of the optimal action under μ*.

    For goal distributions the optimal trajectory is determined by the goal,
    so the goal entropy is returned exactly. Otherwise the probability of each
    action being optimal is estimated by Monte Carlo, splitting ties evenly.

    Args:
        env (BaseEnvironment): Environment.
        dist (TaskDistribution): Task distribution.
        mc_samples (int): Number of Monte Carlo draws, at least 1.
        seed (SeedLike): Seed or generator.

    Returns:
        float: Entropy in nats.
    """
    if mc_samples < 1:
        raise DimensionError("mc_samples must be at least 1")
    if dist.kind == CATEGORICAL_GOAL:
        return float(entropy(dist.goal_probs))

    rng = as_rng(seed)
    if dist.kind == POINT_MASS:
        q_tables = env.q_tables(dist.point.values[None, :])
    elif dist.kind == BETA_PRODUCT:
        q_tables = env.q_tables(rng.beta(dist.a, dist.b, size=(mc_samples, len(dist.a))))
    else:
        thetas = [sample_task(dist, rng, env).values for _ in range(mc_samples)]
        q_tables = env.q_tables(np.stack(thetas))

    contexts = np.array([env.initial_state(rng) for _ in range(q_tables.shape[0])])
    q_values = q_tables[np.arange(q_tables.shape[0]), contexts]
    ties = q_values >= q_values.max(axis=1, keepdims=True) - TIE_TOLERANCE
    frequencies = (ties / ties.sum(axis=1, keepdims=True)).mean(axis=0)
    return float(entropy(frequencies))
