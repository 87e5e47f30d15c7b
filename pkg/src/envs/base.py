from abc import ABC, abstractmethod
from typing import Tuple

import numpy as np

from src.errors import DimensionError
from src.model import TaskKind, TaskParam


class BaseEnvironment(ABC):
    """Abstract base class for integer-indexed episodic environments.

    Every environment exposes its optimal Q-function as a table of shape
    (n_states, n_actions) computed from a task vector, plus the transpose of
    that map (`pullback`) so likelihood gradients can be carried back to the
    task parameters.
    """

    task_kind: TaskKind = TaskKind.BANDIT

    @property
    @abstractmethod
    def signature(self) -> str:
        """Identifier of the environment family, e.g. ``bandit:K=10``."""
        pass

    @property
    @abstractmethod
    def n_states(self) -> int:
        pass

    @property
    @abstractmethod
    def n_actions(self) -> int:
        pass

    @property
    @abstractmethod
    def horizon(self) -> int:
        pass

    @property
    @abstractmethod
    def param_dim(self) -> int:
        """Length of a task vector for this environment."""
        pass

    @abstractmethod
    def q_tables(self, thetas: np.ndarray) -> np.ndarray:
        """Map a batch of task vectors to Q-tables.

        Args:
            thetas (np.ndarray): Array of shape (S, param_dim).

        Returns:
            np.ndarray: Array of shape (S, n_states, n_actions).
        """
        pass

    @abstractmethod
    def pullback(self, grad_q: np.ndarray) -> np.ndarray:
        """Vector-Jacobian product of the Q-table map.

        Args:
            grad_q (np.ndarray): Gradient with respect to a Q-table,
                shape (n_states, n_actions).

        Returns:
            np.ndarray: Gradient with respect to the task vector.
        """
        pass

    @abstractmethod
    def initial_state(self, rng: np.random.Generator) -> int:
        pass

    @abstractmethod
    def step(
        self, task: TaskParam, state: int, action: int, rng: np.random.Generator
    ) -> Tuple[int, float, bool]:
        """Advance one step under `task`.

        Returns:
            Tuple[int, float, bool]: Next state id, reward and terminal flag.
        """
        pass

    @abstractmethod
    def optimal_value(self, task: TaskParam, state: int) -> float:
        """Expected return of the optimal policy from `state` under `task`."""
        pass

    def q_table(self, theta: np.ndarray) -> np.ndarray:
        theta = self.check_param(theta)
        return self.q_tables(theta[None, :])[0]

    def optimal_q(self, task: TaskParam) -> np.ndarray:
        """Optimal Q-table of a task (the expert's Q under the noisy-rational model)."""
        return self.q_table(task.values)

    def check_param(self, theta: np.ndarray) -> np.ndarray:
        theta = np.asarray(theta, dtype=float).reshape(-1)
        if theta.shape[0] != self.param_dim:
            raise DimensionError(
                f"{self.signature}: expected {self.param_dim} parameters, "
                f"got {theta.shape[0]}"
            )
        return theta
