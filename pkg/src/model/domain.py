from dataclasses import dataclass, field
from enum import Enum
from functools import cached_property
from typing import Iterator, Optional, Sequence, Tuple

import numpy as np

from src.errors import DimensionError


class TaskKind(str, Enum):
    """Parameterization families a task vector can belong to."""

    BANDIT = "bandit"
    QTABLE = "qtable"
    LINEAR = "linear"


@dataclass(frozen=True, eq=False)
class TaskParam:
    """Vector of task parameters standing in for the unobserved task variable.

    Bandit vectors hold arm means in [0, 1]; Q-table vectors hold one optimal
    Q-value per (state, action) pair; linear vectors hold reward weights.
    """

    values: np.ndarray
    kind: TaskKind = TaskKind.BANDIT
    goal: Optional[int] = None

    def __post_init__(self):
        values = np.array(self.values, dtype=float).reshape(-1)
        values.setflags(write=False)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "kind", TaskKind(self.kind))

        if not np.all(np.isfinite(values)):
            raise DimensionError("task parameters must be finite")
        if self.kind is TaskKind.BANDIT and (
            np.any(values < 0.0) or np.any(values > 1.0)
        ):
            raise DimensionError("bandit arm means must lie in [0, 1]")

    def __len__(self) -> int:
        return self.values.shape[0]

    def __eq__(self, other) -> bool:
        if not isinstance(other, TaskParam):
            return NotImplemented
        return (
            self.kind is other.kind
            and self.goal == other.goal
            and np.array_equal(self.values, other.values)
        )

    def __hash__(self) -> int:
        return hash((self.kind, self.goal, self.values.tobytes()))


@dataclass(frozen=True)
class Trajectory:
    """A single expert episode: (state, action) steps and the final state."""

    steps: Tuple[Tuple[int, int], ...]
    terminal: Optional[int] = None

    def __post_init__(self):
        steps = tuple((int(s), int(a)) for s, a in self.steps)
        object.__setattr__(self, "steps", steps)
        if self.terminal is not None:
            object.__setattr__(self, "terminal", int(self.terminal))

    @property
    def horizon(self) -> int:
        return len(self.steps)

    @property
    def states(self) -> Tuple[int, ...]:
        return tuple(s for s, _ in self.steps)

    @property
    def actions(self) -> Tuple[int, ...]:
        return tuple(a for _, a in self.steps)


@dataclass(frozen=True)
class DemoDataset:
    """Expert demonstrations without rewards or task labels."""

    trajectories: Tuple[Trajectory, ...]
    env_signature: str

    def __post_init__(self):
        object.__setattr__(self, "trajectories", tuple(self.trajectories))

    @classmethod
    def empty(cls, env_signature: str) -> "DemoDataset":
        return cls(trajectories=(), env_signature=env_signature)

    def __len__(self) -> int:
        return len(self.trajectories)

    def __iter__(self) -> Iterator[Trajectory]:
        return iter(self.trajectories)

    def __getitem__(self, index: int) -> Trajectory:
        return self.trajectories[index]

    @property
    def horizon(self) -> int:
        """Horizon of the first trajectory, 0 for an empty dataset."""
        return self.trajectories[0].horizon if self.trajectories else 0

    def first_actions(self) -> np.ndarray:
        """Actions taken at the first step of every trajectory."""
        return np.array([t.steps[0][1] for t in self.trajectories], dtype=int)


@dataclass(frozen=True)
class Transition:
    state: int
    action: int
    reward: float
    next_state: int
    done: bool = False


@dataclass(frozen=True)
class OnlineHistory:
    """Transitions collected online, grouped per episode.

    The history is immutable; `extend` returns a new history with one more
    episode appended.
    """

    episodes: Tuple[Tuple[Transition, ...], ...] = ()

    def __post_init__(self):
        episodes = tuple(tuple(episode) for episode in self.episodes)
        for episode in episodes:
            for transition in episode:
                if not np.isfinite(transition.reward):
                    raise DimensionError("rewards in the history must be finite")
        object.__setattr__(self, "episodes", episodes)

    def extend(self, episode: Sequence[Transition]) -> "OnlineHistory":
        return OnlineHistory(episodes=self.episodes + (tuple(episode),))

    def __len__(self) -> int:
        return len(self.episodes)

    @cached_property
    def transitions(self) -> Tuple[Transition, ...]:
        return tuple(t for episode in self.episodes for t in episode)

    @cached_property
    def arrays(self) -> dict:
        """Column arrays (state, action, reward, next_state, done)."""
        transitions = self.transitions
        return {
            "state": np.array([t.state for t in transitions], dtype=int),
            "action": np.array([t.action for t in transitions], dtype=int),
            "reward": np.array([t.reward for t in transitions], dtype=float),
            "next_state": np.array([t.next_state for t in transitions], dtype=int),
            "done": np.array([t.done for t in transitions], dtype=bool),
        }

    def arm_statistics(self, n_arms: int) -> Tuple[np.ndarray, np.ndarray]:
        """Per-arm success and failure totals for Bernoulli bandit histories.

        Args:
            n_arms (int): Number of arms K.

        Returns:
            Tuple[np.ndarray, np.ndarray]: Summed rewards and summed (1 - reward).
        """
        arrays = self.arrays
        successes = np.bincount(
            arrays["action"], weights=arrays["reward"], minlength=n_arms
        )
        pulls = np.bincount(arrays["action"], minlength=n_arms).astype(float)
        return successes, pulls - successes


@dataclass(frozen=True)
class RegretRecord:
    algo: str
    task_dist_id: int
    task_id: int
    seed: int
    episode: int
    instant_regret: float
    reward: float

    def key(self) -> tuple:
        return (self.algo, self.task_dist_id, self.task_id, self.seed, self.episode)


@dataclass(frozen=True)
class ValidationResult:
    """Outcome of `validate_dataset`."""

    ok: bool
    errors: Tuple[str, ...] = field(default_factory=tuple)
    empty: bool = False
