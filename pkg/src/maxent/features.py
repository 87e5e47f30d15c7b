import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy.special import log_softmax

from constants import LOG_UNDERFLOW, REFERENCE_CHUNK, TIE_TOLERANCE
from src.envs import BaseEnvironment
from src.errors import DimensionError
from src.maxent.reference import BaseReferenceSampler
from src.model import DemoDataset, TaskParam, Trajectory
from src.utils import SeedLike, seed_sequence


def log_policy(q_tables: np.ndarray, beta: float) -> np.ndarray:
    """Log expert action probabilities for a batch of Q-tables (last axis = actions)."""
    if math.isinf(beta):
        ties = q_tables >= q_tables.max(axis=-1, keepdims=True) - TIE_TOLERANCE
        with np.errstate(divide="ignore"):
            return np.log(ties / ties.sum(axis=-1, keepdims=True))
    return log_softmax(beta * q_tables, axis=-1)


@dataclass(frozen=True)
class CompiledDemos:
    """Demonstrations de-duplicated into index arrays.

    Attributes:
        states (np.ndarray): Unique trajectories' states, shape (U, H).
        actions (np.ndarray): Unique trajectories' actions, shape (U, H).
        inverse (np.ndarray): For each demo, the row of its unique trajectory.
    """

    states: np.ndarray
    actions: np.ndarray
    inverse: np.ndarray

    @classmethod
    def from_demos(cls, demos: DemoDataset) -> "CompiledDemos":
        if len(demos) == 0:
            empty = np.zeros((0, 0), dtype=int)
            return cls(states=empty, actions=empty, inverse=np.zeros(0, dtype=int))
        horizons = {t.horizon for t in demos}
        if len(horizons) != 1:
            raise DimensionError(f"demonstrations mix horizons {sorted(horizons)}")
        steps = np.array([t.steps for t in demos], dtype=int)
        flat = steps.reshape(len(demos), -1)
        unique, inverse = np.unique(flat, axis=0, return_inverse=True)
        unique = unique.reshape(unique.shape[0], -1, 2)
        return cls(
            states=unique[:, :, 0],
            actions=unique[:, :, 1],
            inverse=inverse.reshape(-1),
        )

    @property
    def n_unique(self) -> int:
        return self.states.shape[0]

    def log_likelihoods(self, log_probs: np.ndarray) -> np.ndarray:
        """Per-trajectory log-likelihoods for a batch of log-policies.

        Args:
            log_probs (np.ndarray): Shape (S, n_states, n_actions).

        Returns:
            np.ndarray: Shape (S, U).
        """
        return log_probs[:, self.states, self.actions].sum(axis=-1)


def traj_log_likelihood(
    trajectory: Trajectory, theta: TaskParam, env: BaseEnvironment, beta: float
) -> float:
    """Log partial likelihood ln m_τ(θ) of one demonstration.

    Transition factors are omitted since they do not depend on the task.

    Args:
        trajectory (Trajectory): Expert demonstration.
        theta (TaskParam): Task vector.
        env (BaseEnvironment): Environment binding states and actions.
        beta (float): Expert inverse temperature, possibly ∞.

    Returns:
        float: Value in [−∞, 0].
    """
    q_table = env.q_table(theta.values)
    states = np.array(trajectory.states, dtype=int)
    actions = np.array(trajectory.actions, dtype=int)
    if np.any(states >= env.n_states) or np.any(actions >= env.n_actions):
        raise DimensionError("trajectory ids exceed the environment's ranges")
    log_probs = log_policy(q_table, beta)
    return float(log_probs[states, actions].sum())


@dataclass(frozen=True, eq=False)
class FeatureMatrix:
    """Demo likelihood features evaluated at reference samples.

    Attributes:
        values (np.ndarray): m_{τ_i}(θ_j), shape (S, N).
        log_values (np.ndarray): ln m, −∞ where the feature underflows.
        reference_samples (np.ndarray): θ_j drawn from μ0, shape (S, P).
    """

    values: np.ndarray
    log_values: np.ndarray
    reference_samples: np.ndarray

    @property
    def n_samples(self) -> int:
        return self.values.shape[0]

    @property
    def n_demos(self) -> int:
        return self.values.shape[1]

    def columns(self, mask: np.ndarray) -> "FeatureMatrix":
        return FeatureMatrix(
            values=self.values[:, mask],
            log_values=self.log_values[:, mask],
            reference_samples=self.reference_samples,
        )


def build_feature_matrix(
    demos: DemoDataset,
    env: BaseEnvironment,
    reference: BaseReferenceSampler,
    n_samples: int,
    beta: float,
    seed: SeedLike,
    workers: int = 1,
) -> FeatureMatrix:
    """Draw S reference samples and evaluate every demo's likelihood at each.

    Chunks of reference samples use independent child seeds, so the matrix is
    identical for any number of workers.

    Args:
        demos (DemoDataset): Expert demonstrations.
        env (BaseEnvironment): Environment the demos come from.
        reference (BaseReferenceSampler): μ0.
        n_samples (int): S ≥ 1.
        beta (float): Expert inverse temperature used for the features.
        seed (SeedLike): Integer seed, SeedSequence or generator.
        workers (int): Threads evaluating chunks.

    Returns:
        FeatureMatrix: The (S × N) feature matrix.
    """
    if n_samples < 1:
        raise DimensionError("need at least one reference sample")
    if len(demos) and demos.env_signature != env.signature:
        raise DimensionError(
            f"demos recorded on {demos.env_signature}, environment is {env.signature}"
        )
    if reference.dim != env.param_dim:
        raise DimensionError("reference prior dimension does not match environment")

    compiled = CompiledDemos.from_demos(demos)
    cells = max(1, compiled.states.size)
    chunk = int(max(1, min(REFERENCE_CHUNK, 2_000_000 // cells)))
    bounds = [(lo, min(lo + chunk, n_samples)) for lo in range(0, n_samples, chunk)]
    children = seed_sequence(seed).spawn(len(bounds))

    def evaluate(index: int):
        lo, hi = bounds[index]
        rng = np.random.default_rng(children[index])
        thetas = reference.sample(hi - lo, rng)
        if compiled.n_unique == 0:
            return thetas, np.zeros((hi - lo, 0))
        log_probs = log_policy(env.q_tables(thetas), beta)
        return thetas, compiled.log_likelihoods(log_probs)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(evaluate, range(len(bounds))))
    else:
        parts = [evaluate(i) for i in range(len(bounds))]

    samples = np.concatenate([p[0] for p in parts], axis=0)
    log_unique = np.concatenate([p[1] for p in parts], axis=0)
    log_values = log_unique[:, compiled.inverse]
    log_values = np.where(log_values < LOG_UNDERFLOW, -np.inf, log_values)
    values = np.exp(log_values)
    return FeatureMatrix(values=values, log_values=log_values, reference_samples=samples)
