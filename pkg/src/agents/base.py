from abc import ABC, abstractmethod
from typing import List

import numpy as np

from src.model import OnlineHistory, Transition


class BaseAgent(ABC):
    """Abstract base class for sequential decision agents.

    The harness drives every agent through the same loop: `begin_episode`,
    then `act` / `observe` once per step, then `end_episode`. Agents only
    ever see states and rewards, never the task.
    """

    name: str = "agent"

    def __init__(self):
        self.history = OnlineHistory()
        self._episode: List[Transition] = []

    def begin_episode(self, rng: np.random.Generator) -> None:
        """Prepare for a new episode (sample a task, pick an ensemble member, ...)."""
        self._episode = []

    @abstractmethod
    def act(self, state: int, rng: np.random.Generator) -> int:
        """Choose an action in `state`.

        Args:
            state (int): Current state id.
            rng (np.random.Generator): Random source of this agent.

        Returns:
            int: Action id.
        """
        pass

    def observe(self, transition: Transition) -> None:
        self._episode.append(transition)

    def end_episode(self, rng: np.random.Generator) -> None:
        """Fold the finished episode into the history."""
        self.history = self.history.extend(self._episode)
        self._episode = []

    @property
    def episodes_seen(self) -> int:
        return len(self.history)
