from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import Dict, Optional, Tuple

import numpy as np

from constants import QTABLE_REFERENCE_STD
from src.envs import BaseEnvironment, BernoulliBanditSpec
from src.errors import ConfigError, DimensionError


class BaseReferenceSampler(ABC):
    """Abstract base class for reference priors μ0 over task vectors."""

    dim: int

    @abstractmethod
    def sample(self, n: int, rng: np.random.Generator) -> np.ndarray:
        """Draw `n` task vectors as an array of shape (n, dim)."""
        pass

    @abstractmethod
    def log_density(self, theta: np.ndarray) -> Tuple[float, np.ndarray]:
        """Unnormalized log-density of μ0 and its gradient at `theta`."""
        pass

    @abstractmethod
    def to_dict(self) -> Dict:
        pass


@dataclass(frozen=True)
class UniformBoxReference(BaseReferenceSampler):
    """Uniform μ0 on [0, 1]^dim; the box is enforced by the sampler's parameterization."""

    dim: int

    def sample(self, n: int, rng: np.random.Generator) -> np.ndarray:
        return rng.random((n, self.dim))

    def log_density(self, theta: np.ndarray) -> Tuple[float, np.ndarray]:
        return 0.0, np.zeros(self.dim)

    def to_dict(self) -> Dict:
        return {"kind": "uniform-box", "dim": self.dim}


@dataclass(frozen=True)
class GaussianReference(BaseReferenceSampler):
    """Isotropic Gaussian μ0 = 𝒩(0, std² I)."""

    dim: int
    std: float = QTABLE_REFERENCE_STD

    def sample(self, n: int, rng: np.random.Generator) -> np.ndarray:
        return self.std * rng.standard_normal((n, self.dim))

    def log_density(self, theta: np.ndarray) -> Tuple[float, np.ndarray]:
        theta = np.asarray(theta, dtype=float)
        return -0.5 * float(theta @ theta) / self.std**2, -theta / self.std**2

    def to_dict(self) -> Dict:
        return {"kind": "gaussian", "dim": self.dim, "std": self.std}


@dataclass(frozen=True, eq=False)
class DiscreteReference(BaseReferenceSampler):
    """Finitely supported μ0, used for exact grid oracles."""

    points: np.ndarray
    probs: Optional[np.ndarray] = None

    def __post_init__(self):
        points = np.atleast_2d(np.asarray(self.points, dtype=float))
        probs = (
            np.full(points.shape[0], 1.0 / points.shape[0])
            if self.probs is None
            else np.asarray(self.probs, dtype=float)
        )
        if probs.shape != (points.shape[0],) or not np.isclose(probs.sum(), 1.0):
            raise DimensionError("reference probabilities must sum to 1 over points")
        object.__setattr__(self, "points", points)
        object.__setattr__(self, "probs", probs)

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    def sample(self, n: int, rng: np.random.Generator) -> np.ndarray:
        return self.points[rng.choice(self.points.shape[0], size=n, p=self.probs)]

    def log_density(self, theta: np.ndarray) -> Tuple[float, np.ndarray]:
        return 0.0, np.zeros(self.dim)

    def to_dict(self) -> Dict:
        return {
            "kind": "discrete",
            "points": self.points.tolist(),
            "probs": self.probs.tolist(),
        }


def default_reference(env: BaseEnvironment) -> BaseReferenceSampler:
    """Non-informative μ0 for an environment: uniform box for Bernoulli arms, Gaussian otherwise."""
    if isinstance(env, BernoulliBanditSpec):
        return UniformBoxReference(env.param_dim)
    return GaussianReference(env.param_dim)


def reference_from_dict(payload: Dict) -> BaseReferenceSampler:
    kind = payload.get("kind")
    if kind == "uniform-box":
        return UniformBoxReference(int(payload["dim"]))
    if kind == "gaussian":
        return GaussianReference(int(payload["dim"]), float(payload["std"]))
    if kind == "discrete":
        return DiscreteReference(np.array(payload["points"]), np.array(payload["probs"]))
    raise ConfigError(f"unknown reference prior kind {kind!r}")
