import logging
from dataclasses import dataclass, field, replace
from typing import Dict, List, Optional, Tuple

import numpy as np

from constants import (
    BOOTSTRAP_MASK_RATE,
    DQN_GRADIENT_STEPS,
    DQN_LEARNING_RATE,
    NAIVE_QTABLE_STD,
)
from src.agents.base import BaseAgent
from src.envs import BaseEnvironment
from src.errors import DimensionError
from src.maxent import GibbsPrior
from src.model import OnlineHistory, TaskKind, TaskParam, Transition
from src.sampling import SgldConfig, bellman_residual_loss, build_posterior, sgld_sample
from src.utils import random_argmax

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class EnsembleState:
    """Q-table ensemble of a bootstrapped DQN agent.

    Attributes:
        members (Tuple[TaskParam, ...]): One Q-table per member.
        active (int): Member acting in the current episode.
        updates (Tuple[int, ...]): Gradient steps applied to each member.
    """

    members: Tuple[TaskParam, ...]
    active: int = 0
    updates: Tuple[int, ...] = ()

    def __post_init__(self):
        members = tuple(self.members)
        if not members:
            raise DimensionError("an ensemble needs at least one member")
        if not 0 <= self.active < len(members):
            raise DimensionError(f"active member {self.active} outside the ensemble")
        object.__setattr__(self, "members", members)
        if not self.updates:
            object.__setattr__(self, "updates", (0,) * len(members))

    @property
    def size(self) -> int:
        return len(self.members)

    def select(self, rng: np.random.Generator) -> "EnsembleState":
        """Pick the acting member uniformly at random."""
        return replace(self, active=int(rng.integers(self.size)))


@dataclass
class ReplayBuffer:
    """Unbounded replay buffer with per-member bootstrap masks fixed at insertion.

    Each member also keeps the distinct transitions it is allowed to train on,
    in first-seen order.
    """

    size: int
    mask_rate: float = BOOTSTRAP_MASK_RATE
    transitions: List[Transition] = field(default_factory=list)
    masks: List[np.ndarray] = field(default_factory=list)

    def __post_init__(self):
        self._visible: List[Dict[Transition, None]] = [{} for _ in range(self.size)]
        self._arrays: Dict[int, dict] = {}

    def add(self, transitions: List[Transition], rng: np.random.Generator) -> None:
        for transition in transitions:
            mask = rng.random(self.size) < self.mask_rate
            self.transitions.append(transition)
            self.masks.append(mask)
            for member in np.flatnonzero(mask):
                if transition not in self._visible[member]:
                    self._visible[member][transition] = None
                    self._arrays.pop(int(member), None)

    def __len__(self) -> int:
        return len(self.transitions)

    def member_arrays(self, member: int) -> Optional[dict]:
        """De-duplicated transitions visible to `member`, as column arrays."""
        if not self._visible[member]:
            return None
        if member not in self._arrays:
            episode = tuple(self._visible[member])
            self._arrays[member] = OnlineHistory(episodes=(episode,)).arrays
        return self._arrays[member]


def greedy_action(
    env: BaseEnvironment, member: TaskParam, state: int, rng: np.random.Generator
) -> int:
    return random_argmax(env.q_table(member.values)[state], rng)


def bootdqn_episode(
    env: BaseEnvironment,
    ensemble: EnsembleState,
    task: TaskParam,
    rng: np.random.Generator,
) -> Tuple[EnsembleState, List[Transition]]:
    """Collect one episode greedily with a uniformly chosen member.

    Args:
        env (BaseEnvironment): Environment to act in.
        ensemble (EnsembleState): Current ensemble.
        task (TaskParam): Task the environment steps under.
        rng (np.random.Generator): Random source.

    Returns:
        Tuple[EnsembleState, List[Transition]]: Ensemble with its active member
            set, and the episode's transitions.
    """
    ensemble = ensemble.select(rng)
    member = ensemble.members[ensemble.active]
    state = env.initial_state(rng)
    transitions = []
    done = False
    while not done:
        action = greedy_action(env, member, state, rng)
        next_state, reward, done = env.step(task, state, action, rng)
        transitions.append(Transition(state, action, reward, next_state, done))
        state = next_state
    return ensemble, transitions


def bootdqn_update(
    env: BaseEnvironment,
    ensemble: EnsembleState,
    buffer: ReplayBuffer,
    learning_rate: float = DQN_LEARNING_RATE,
    gradient_steps: int = DQN_GRADIENT_STEPS,
) -> EnsembleState:
    """Train every member on its masked replay data with the TD loss.

    Each step is a full-batch residual-gradient ascent step on
    −½ Σ (r + max Q(s′) − Q(s, a))² over the member's unmasked, de-duplicated
    transitions. The prior does not enter the loss.

    Args:
        env (BaseEnvironment): Environment mapping members to Q-tables.
        ensemble (EnsembleState): Current ensemble.
        buffer (ReplayBuffer): Replay data with bootstrap masks.
        learning_rate (float): Step size.
        gradient_steps (int): Steps per member.

    Returns:
        EnsembleState: Updated ensemble.
    """
    if gradient_steps == 0 or len(buffer) == 0:
        return ensemble
    members, updates = [], []
    for index, member in enumerate(ensemble.members):
        arrays = buffer.member_arrays(index)
        if arrays is None:
            members.append(member)
            updates.append(ensemble.updates[index])
            continue
        q_table = env.q_table(member.values).copy()
        for _ in range(gradient_steps):
            _, grad_q = bellman_residual_loss(q_table, arrays)
            q_table += learning_rate * grad_q
        members.append(TaskParam(q_table.reshape(-1), kind=TaskKind.QTABLE))
        updates.append(ensemble.updates[index] + gradient_steps)
    return EnsembleState(members=tuple(members), active=ensemble.active, updates=tuple(updates))


def init_ensemble(
    env: BaseEnvironment,
    prior: Optional[GibbsPrior],
    size: int,
    cfg: SgldConfig,
    rng: np.random.Generator,
) -> EnsembleState:
    """Initialize the ensemble from the expert prior, or randomly without one.

    With a prior each member is the last state of its own SGLD chain on the
    prior's log-density, started from a prior sample. Without one, members are
    i.i.d. 𝒩(0, 0.1²) Q-tables.

    Args:
        env (BaseEnvironment): Environment the members parameterize.
        prior (Optional[GibbsPrior]): Fitted prior, or None for the naive variant.
        size (int): Number of members, at least 1.
        cfg (SgldConfig): Chain budget.
        rng (np.random.Generator): Random source.

    Returns:
        EnsembleState: The initialized ensemble.
    """
    if size < 1:
        raise DimensionError(f"ensemble size must be at least 1, got {size}")
    if prior is None:
        members = [
            TaskParam(NAIVE_QTABLE_STD * rng.standard_normal(env.param_dim), kind=TaskKind.QTABLE)
            for _ in range(size)
        ]
        return EnsembleState(members=tuple(members))

    target = build_posterior(prior, OnlineHistory())
    members = [sgld_sample(target, cfg, rng)[-1] for _ in range(size)]
    logger.debug("Initialized %d ensemble members from the expert prior", size)
    return EnsembleState(members=tuple(members))


class BootstrappedDqnAgent(BaseAgent):
    """Tabular bootstrapped DQN: one greedy member per episode, masked TD training."""

    def __init__(
        self,
        env: BaseEnvironment,
        ensemble: EnsembleState,
        mask_rate: float = BOOTSTRAP_MASK_RATE,
        learning_rate: float = DQN_LEARNING_RATE,
        gradient_steps: int = DQN_GRADIENT_STEPS,
        name: str = "expert-bootdqn",
    ):
        super().__init__()
        self.name = name
        self.env = env
        self.ensemble = ensemble
        self.buffer = ReplayBuffer(size=ensemble.size, mask_rate=mask_rate)
        self.learning_rate = learning_rate
        self.gradient_steps = gradient_steps

    def begin_episode(self, rng: np.random.Generator) -> None:
        super().begin_episode(rng)
        self.ensemble = self.ensemble.select(rng)

    def act(self, state: int, rng: np.random.Generator) -> int:
        return greedy_action(self.env, self.ensemble.members[self.ensemble.active], state, rng)

    def end_episode(self, rng: np.random.Generator) -> None:
        self.buffer.add(self._episode, rng)
        super().end_episode(rng)
        self.ensemble = bootdqn_update(
            self.env, self.ensemble, self.buffer, self.learning_rate, self.gradient_steps
        )
