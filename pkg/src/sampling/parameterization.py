from abc import ABC, abstractmethod
from typing import Tuple

import numpy as np
from scipy.special import expit, log_expit, logit

BOX_CLIP = 1e-9


class BaseParameterization(ABC):
    """Bijection between an unconstrained chain space ξ and task space θ."""

    name: str

    @abstractmethod
    def forward(self, xi: np.ndarray) -> np.ndarray:
        """Map ξ to θ."""
        pass

    @abstractmethod
    def inverse(self, theta: np.ndarray) -> np.ndarray:
        """Map θ to ξ."""
        pass

    @abstractmethod
    def log_jacobian(self, xi: np.ndarray) -> Tuple[float, np.ndarray]:
        """ln |det ∂θ/∂ξ| and its gradient in ξ."""
        pass

    @abstractmethod
    def pullback(self, xi: np.ndarray, grad_theta: np.ndarray) -> np.ndarray:
        """Carry a θ-gradient to ξ."""
        pass


class Unconstrained(BaseParameterization):
    name = "unconstrained"

    def forward(self, xi: np.ndarray) -> np.ndarray:
        return np.asarray(xi, dtype=float)

    def inverse(self, theta: np.ndarray) -> np.ndarray:
        return np.asarray(theta, dtype=float)

    def log_jacobian(self, xi: np.ndarray) -> Tuple[float, np.ndarray]:
        return 0.0, np.zeros_like(np.asarray(xi, dtype=float))

    def pullback(self, xi: np.ndarray, grad_theta: np.ndarray) -> np.ndarray:
        return np.asarray(grad_theta, dtype=float)


class LogitBox(BaseParameterization):
    """θ = σ(ξ) element-wise, so a uniform density on [0, 1]^K becomes logistic in ξ."""

    name = "logit-box"

    def forward(self, xi: np.ndarray) -> np.ndarray:
        return expit(xi)

    def inverse(self, theta: np.ndarray) -> np.ndarray:
        return logit(np.clip(theta, BOX_CLIP, 1.0 - BOX_CLIP))

    def log_jacobian(self, xi: np.ndarray) -> Tuple[float, np.ndarray]:
        xi = np.asarray(xi, dtype=float)
        value = float(np.sum(log_expit(xi) + log_expit(-xi)))
        return value, 1.0 - 2.0 * expit(xi)

    def pullback(self, xi: np.ndarray, grad_theta: np.ndarray) -> np.ndarray:
        sigma = expit(xi)
        return np.asarray(grad_theta, dtype=float) * sigma * (1.0 - sigma)


def parameterization_from_name(name: str) -> BaseParameterization:
    return LogitBox() if name == LogitBox.name else Unconstrained()
