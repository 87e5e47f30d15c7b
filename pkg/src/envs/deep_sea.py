from dataclasses import dataclass
from functools import lru_cache
from typing import Optional, Tuple

import numpy as np

from constants import DEEP_SEA_GOALS
from src.envs.base import BaseEnvironment
from src.errors import DimensionError, UnsupportedError
from src.model import EnvSignature, TaskKind, TaskParam

LEFT = 0
RIGHT = 1


@dataclass(frozen=True)
class DeepSeaSpec(BaseEnvironment):
    """M × M Deep Sea grid with a goal column drawn per task.

    The agent starts at (0, 0) and moves down one row per step, choosing left
    or right. Entering the bottom row at the goal column pays 1; every right
    move costs `move_cost`. State ids are ``row * M + col``; ids of the
    terminal row M are ``M * M + col``.

    Attributes:
        M (int): Grid side.
        goal_distribution (str): One of corner, right-quarter, right-half, uniform.
        move_cost (Optional[float]): Cost of a right move, 0.01 / M if None.
    """

    M: int
    goal_distribution: str = "corner"
    move_cost: Optional[float] = None

    task_kind = TaskKind.QTABLE

    def __post_init__(self):
        if self.M < 2:
            raise DimensionError(f"Deep Sea needs M ≥ 2, got {self.M}")
        if self.goal_distribution not in DEEP_SEA_GOALS:
            raise UnsupportedError(
                f"unknown goal distribution {self.goal_distribution!r}"
            )
        if self.move_cost is None:
            object.__setattr__(self, "move_cost", 0.01 / self.M)

    @property
    def signature(self) -> str:
        return str(EnvSignature("deepsea", {"M": self.M}))

    @property
    def n_states(self) -> int:
        return self.M * self.M

    @property
    def n_actions(self) -> int:
        return 2

    @property
    def horizon(self) -> int:
        return self.M

    @property
    def param_dim(self) -> int:
        return self.M * self.M * 2

    def goal_probs(self) -> np.ndarray:
        """Categorical distribution over goal columns."""
        probs = np.zeros(self.M)
        if self.goal_distribution == "corner":
            width = 1
        elif self.goal_distribution == "right-quarter":
            width = max(1, self.M // 4)
        elif self.goal_distribution == "right-half":
            width = max(1, self.M // 2)
        else:
            width = self.M
        probs[self.M - width :] = 1.0 / width
        return probs

    def state_id(self, row: int, col: int) -> int:
        return row * self.M + col

    def position(self, state: int) -> Tuple[int, int]:
        return divmod(int(state), self.M)

    def q_tables(self, thetas: np.ndarray) -> np.ndarray:
        thetas = np.asarray(thetas, dtype=float)
        return thetas.reshape(thetas.shape[0], self.n_states, 2)

    def pullback(self, grad_q: np.ndarray) -> np.ndarray:
        return np.asarray(grad_q, dtype=float).reshape(-1).copy()

    def initial_state(self, rng: np.random.Generator) -> int:
        return 0

    def step(
        self, task: TaskParam, state: int, action: int, rng: np.random.Generator
    ) -> Tuple[int, float, bool]:
        if task.goal is None:
            raise DimensionError("Deep Sea tasks must carry their goal column")
        (row, col), reward, done = deep_sea_step(
            self, self.position(state), action, task.goal
        )
        return self.state_id(row, col), reward, done

    def optimal_value(self, task: TaskParam, state: int = 0) -> float:
        return float(self.q_table(task.values)[state].max())


def deep_sea_step(
    spec: DeepSeaSpec, state: Tuple[int, int], action: int, goal: int
) -> Tuple[Tuple[int, int], float, bool]:
    """Apply one deterministic Deep Sea transition.

    Args:
        spec (DeepSeaSpec): Environment.
        state (Tuple[int, int]): Current (row, col).
        action (int): 0 for left, 1 for right.
        goal (int): Goal column of the current task.

    Returns:
        Tuple[Tuple[int, int], float, bool]: Next (row, col), reward, done.

    Raises:
        DimensionError: When stepping from the terminal row.
    """
    row, col = state
    if row >= spec.M:
        raise DimensionError(f"cannot step from terminal row {row}")
    if action not in (LEFT, RIGHT):
        raise DimensionError(f"action {action} ≥ |A|=2")

    next_col = min(max(col + (1 if action == RIGHT else -1), 0), spec.M - 1)
    next_row = row + 1
    done = next_row == spec.M
    reward = -spec.move_cost * (action == RIGHT)
    if done and next_col == goal:
        reward += 1.0
    return (next_row, next_col), reward, done


def solve_deep_sea_q(spec: DeepSeaSpec, goal: int) -> Tuple[TaskParam, float]:
    """Exact optimal Q-table by backward dynamic programming over rows.

    Args:
        spec (DeepSeaSpec): Environment.
        goal (int): Goal column.

    Returns:
        Tuple[TaskParam, float]: Q-table task vector (with its goal) and V* at (0, 0).
    """
    if not 0 <= goal < spec.M:
        raise DimensionError(f"goal column {goal} outside [0, {spec.M})")
    q = _solve(spec.M, spec.move_cost, goal)
    return TaskParam(q.reshape(-1), kind=TaskKind.QTABLE, goal=goal), float(
        q[0, 0].max()
    )


@lru_cache(maxsize=256)
def _solve(M: int, move_cost: float, goal: int) -> np.ndarray:
    q = np.zeros((M, M, 2))
    cols = np.arange(M)
    targets = {
        LEFT: np.clip(cols - 1, 0, M - 1),
        RIGHT: np.clip(cols + 1, 0, M - 1),
    }
    next_value = np.zeros(M)
    for row in range(M - 1, -1, -1):
        last = row == M - 1
        for action, target in targets.items():
            reward = -move_cost * (action == RIGHT) + (last & (target == goal))
            q[row, :, action] = reward + (0.0 if last else next_value[target])
        next_value = q[row].max(axis=1)
    q = q.reshape(M * M, 2)
    q.setflags(write=False)
    return q
