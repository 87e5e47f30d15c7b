from dataclasses import dataclass, field
from typing import Callable, List, Optional, Tuple, Union

import numpy as np

from constants import SGLD_STEP_SIZE_BANDIT, SGLD_STEPS, SGLD_TEMPERATURE
from src.errors import ConfigError, DimensionError, SamplerError
from src.model import TaskKind, TaskParam
from src.sampling.parameterization import BaseParameterization, Unconstrained
from src.utils import SeedLike, as_rng

PRIOR_SAMPLE = "prior-sample"

InitLike = Union[TaskParam, np.ndarray, str]


@dataclass(frozen=True)
class LogDensity:
    """Unnormalized target density over task vectors.

    Attributes:
        dim (int): Parameter dimension.
        eval (Callable): θ ↦ (log-density, gradient in θ).
        parameterization (BaseParameterization): Chain space of the sampler.
        kind (TaskKind): Kind of the returned task vectors.
        draw_init (Optional[Callable]): Draws a starting θ from the prior, used
            when a chain is initialized with ``"prior-sample"``.
    """

    dim: int
    eval: Callable[[np.ndarray], Tuple[float, np.ndarray]]
    parameterization: BaseParameterization = field(default_factory=Unconstrained)
    kind: TaskKind = TaskKind.QTABLE
    draw_init: Optional[Callable[[np.random.Generator], np.ndarray]] = None

    def in_chain_space(self, xi: np.ndarray) -> Tuple[float, np.ndarray]:
        """Log-density of ξ including the log-Jacobian, with its ξ-gradient."""
        theta = self.parameterization.forward(xi)
        value, grad = self.eval(theta)
        jac_value, jac_grad = self.parameterization.log_jacobian(xi)
        return value + jac_value, self.parameterization.pullback(xi, grad) + jac_grad


@dataclass(frozen=True)
class SgldConfig:
    """Langevin sampler settings.

    Attributes:
        step_size (float): η > 0.
        steps (int): Number of updates, 0 returns the initial state.
        thinning (int): Keep every `thinning`-th iterate.
        temperature (float): Noise scale multiplier, 1 for the true posterior.
        seed (SeedLike): Seed of the injected noise.
        init (InitLike): Starting θ, or ``"prior-sample"``.
    """

    step_size: float = SGLD_STEP_SIZE_BANDIT
    steps: int = SGLD_STEPS
    thinning: int = 1
    temperature: float = SGLD_TEMPERATURE
    seed: SeedLike = 0
    init: InitLike = PRIOR_SAMPLE

    def __post_init__(self):
        if self.step_size <= 0:
            raise ConfigError(f"SGLD step size must be positive, got {self.step_size}")
        if self.steps < 0:
            raise ConfigError(f"SGLD steps must be nonnegative, got {self.steps}")
        if self.thinning < 1:
            raise ConfigError(f"SGLD thinning must be at least 1, got {self.thinning}")
        if self.temperature < 0:
            raise ConfigError("SGLD temperature must be nonnegative")
        if isinstance(self.init, str) and self.init != PRIOR_SAMPLE:
            raise ConfigError(f"unknown SGLD init {self.init!r}")


def _initial_theta(target: LogDensity, init: InitLike, rng: np.random.Generator) -> np.ndarray:
    if isinstance(init, str):
        if target.draw_init is None:
            raise ConfigError("target has no prior to draw an initial state from")
        theta = target.draw_init(rng)
    elif isinstance(init, TaskParam):
        theta = init.values
    else:
        theta = init
    theta = np.asarray(theta, dtype=float).reshape(-1)
    if theta.shape[0] != target.dim:
        raise DimensionError(
            f"initial state has {theta.shape[0]} entries, target expects {target.dim}"
        )
    return theta


def sgld_sample(
    target: LogDensity, cfg: SgldConfig, rng: Optional[np.random.Generator] = None
) -> List[TaskParam]:
    """Run a Langevin chain ξ ← ξ + (η/2)·∇ log p(ξ) + √(η·T)·𝒩(0, I).

    Args:
        target (LogDensity): Density to sample.
        cfg (SgldConfig): Sampler settings.
        rng (Optional[np.random.Generator]): Noise source overriding `cfg.seed`.

    Returns:
        List[TaskParam]: Every `thinning`-th iterate mapped to θ-space, or the
            initial state alone when `steps` is 0.

    Raises:
        SamplerError: When the gradient becomes non-finite.
    """
    rng = rng if rng is not None else as_rng(cfg.seed)
    theta = _initial_theta(target, cfg.init, rng)
    if cfg.steps == 0:
        return [TaskParam(theta, kind=target.kind)]

    param = target.parameterization
    xi = param.inverse(theta)
    noise_scale = np.sqrt(cfg.step_size * cfg.temperature)
    half_step = 0.5 * cfg.step_size
    samples = []
    for step in range(1, cfg.steps + 1):
        _, grad = target.in_chain_space(xi)
        if not np.all(np.isfinite(grad)):
            raise SamplerError("non-finite log-density gradient", step)
        xi = xi + half_step * grad + noise_scale * rng.standard_normal(target.dim)
        if step % cfg.thinning == 0:
            samples.append(TaskParam(param.forward(xi), kind=target.kind))
    if not samples:
        samples.append(TaskParam(param.forward(xi), kind=target.kind))
    return samples
