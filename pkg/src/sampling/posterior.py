import dataclasses
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from src.envs import BernoulliBanditSpec, DeepSeaSpec, LinearBanditSpec
from src.errors import DimensionError, UnsupportedError
from src.maxent import GibbsPrior, reference_resample
from src.model import OnlineHistory, TaskKind, TaskParam
from src.sampling.parameterization import LogitBox, Unconstrained
from src.sampling.sgld import LogDensity, SgldConfig, sgld_sample


def _theta(theta) -> np.ndarray:
    values = theta.values if isinstance(theta, TaskParam) else theta
    return np.asarray(values, dtype=float).reshape(-1)


def bandit_log_posterior(
    theta, history: OnlineHistory, prior: GibbsPrior
) -> Tuple[float, np.ndarray]:
    """Bernoulli log-likelihood of the history plus the prior's log-density.

    Args:
        theta: Arm means strictly inside (0, 1).
        history (OnlineHistory): Pulls as (arm, reward) transitions.
        prior (GibbsPrior): Prior bound to a bandit environment.

    Returns:
        Tuple[float, np.ndarray]: Value and gradient in θ.

    Raises:
        DimensionError: When θ touches the boundary or has the wrong length.
    """
    theta = prior.env.check_param(_theta(theta))
    if np.any(theta <= 0.0) or np.any(theta >= 1.0):
        raise DimensionError("bandit posterior needs arm means strictly inside (0, 1)")
    successes, failures = history.arm_statistics(theta.shape[0])
    value = float(successes @ np.log(theta) + failures @ np.log1p(-theta))
    grad = successes / theta - failures / (1.0 - theta)
    prior_value, prior_grad = prior.log_pdf_and_grad(theta)
    return value + prior_value, grad + prior_grad


def td_log_likelihood(q_table: np.ndarray, history: OnlineHistory) -> Tuple[float, np.ndarray]:
    """−½ Σ squared Bellman residuals and its gradient with respect to the Q-table.

    Both occurrences of Q are differentiated; the max uses its argmax subgradient
    and terminal transitions have no bootstrap term.
    """
    if len(history.transitions) == 0:
        return 0.0, np.zeros_like(q_table)
    return bellman_residual_loss(q_table, history.arrays)


def bellman_residual_loss(q_table: np.ndarray, arrays: dict) -> Tuple[float, np.ndarray]:
    """TD log-likelihood of transition columns as produced by `OnlineHistory.arrays`."""
    grad_q = np.zeros_like(q_table)
    states, actions = arrays["state"], arrays["action"]
    live = ~arrays["done"]
    next_states = np.where(live, arrays["next_state"], 0)
    next_q = q_table[next_states]
    best = next_q.argmax(axis=1)
    bootstrap = np.where(live, next_q[np.arange(len(best)), best], 0.0)
    residuals = arrays["reward"] + bootstrap - q_table[states, actions]

    np.add.at(grad_q, (states, actions), residuals)
    np.add.at(grad_q, (next_states[live], best[live]), -residuals[live])
    return -0.5 * float(residuals @ residuals), grad_q


def mdp_log_posterior(
    theta, history: OnlineHistory, prior: GibbsPrior, beta_eff: Optional[float] = None
) -> Tuple[float, np.ndarray]:
    """Log-posterior of a Q-table: TD log-likelihood plus Σ_i α_i m_i(θ).

    Args:
        theta: Q-table task vector.
        history (OnlineHistory): Online transitions.
        prior (GibbsPrior): Prior bound to an MDP environment.
        beta_eff (Optional[float]): Overrides the prior's β-eff.

    Returns:
        Tuple[float, np.ndarray]: Value and gradient in θ.
    """
    env = prior.env
    theta = env.check_param(_theta(theta))
    if beta_eff is not None and beta_eff != prior.beta_eff:
        prior = dataclasses.replace(prior, beta_eff=beta_eff)
    value, grad_q = td_log_likelihood(env.q_table(theta), history)
    prior_value, prior_grad = prior.log_pdf_and_grad(theta)
    return value + prior_value, env.pullback(grad_q) + prior_grad


def linear_log_posterior(
    theta, history: OnlineHistory, prior: GibbsPrior
) -> Tuple[float, np.ndarray]:
    """Unit-variance Gaussian reward likelihood of a linear bandit plus the prior."""
    env = prior.env
    if not isinstance(env, LinearBanditSpec):
        raise UnsupportedError("linear posterior needs a linear bandit environment")
    theta = env.check_param(_theta(theta))
    value, grad = 0.0, np.zeros_like(theta)
    if len(history.transitions):
        arrays = history.arrays
        phi = env.features[arrays["state"], arrays["action"]]
        residuals = arrays["reward"] - phi @ theta
        value = -0.5 * float(residuals @ residuals)
        grad = phi.T @ residuals
    prior_value, prior_grad = prior.log_pdf_and_grad(theta)
    return value + prior_value, grad + prior_grad


def build_posterior(prior: GibbsPrior, history: OnlineHistory) -> LogDensity:
    """Sampler target for the prior's environment.

    Bernoulli bandits sample in logit space, where the Jacobian supplies the
    uniform reference density. Q-table and linear targets are unconstrained
    and add the Gaussian reference log-density.
    """
    env = prior.env

    def draw_init(rng: np.random.Generator) -> np.ndarray:
        return reference_resample(prior, 1, rng)[0]

    if isinstance(env, BernoulliBanditSpec):
        return LogDensity(
            dim=env.param_dim,
            eval=lambda theta: bandit_log_posterior(theta, history, prior),
            parameterization=LogitBox(),
            kind=TaskKind.BANDIT,
            draw_init=draw_init,
        )
    if isinstance(env, DeepSeaSpec):
        likelihood = mdp_log_posterior
        kind = TaskKind.QTABLE
    elif isinstance(env, LinearBanditSpec):
        likelihood = linear_log_posterior
        kind = TaskKind.LINEAR
    else:
        raise UnsupportedError(f"no posterior for environment {env.signature}")

    def evaluate(theta: np.ndarray) -> Tuple[float, np.ndarray]:
        value, grad = likelihood(theta, history, prior)
        ref_value, ref_grad = prior.reference.log_density(theta)
        return value + ref_value, grad + ref_grad

    return LogDensity(
        dim=env.param_dim,
        eval=evaluate,
        parameterization=Unconstrained(),
        kind=kind,
        draw_init=draw_init,
    )


@dataclass
class PosteriorChain:
    """Persistent SGLD chain warm-started from its previous sample.

    Attributes:
        prior (GibbsPrior): Prior of the posterior being tracked.
        cfg (SgldConfig): Per-call sampler budget; `cfg.init` seeds the first call.
        state (Optional[TaskParam]): Last sample, None before the first call.
    """

    prior: GibbsPrior
    cfg: SgldConfig
    state: Optional[TaskParam] = None

    def sample(self, history: OnlineHistory, rng: np.random.Generator) -> TaskParam:
        target = build_posterior(self.prior, history)
        init = self.state if self.state is not None else self.cfg.init
        samples = sgld_sample(target, dataclasses.replace(self.cfg, init=init), rng)
        self.state = samples[-1]
        return self.state


def posterior_sample(
    prior: GibbsPrior,
    history: OnlineHistory,
    cfg: SgldConfig,
    chain: Optional[PosteriorChain] = None,
    rng: Optional[np.random.Generator] = None,
) -> TaskParam:
    """Draw one approximate posterior sample.

    Args:
        prior (GibbsPrior): Prior bound to the environment.
        history (OnlineHistory): Online data so far.
        cfg (SgldConfig): Sampler settings.
        chain (Optional[PosteriorChain]): Persistent chain to continue; a
            fresh one is started if None.
        rng (Optional[np.random.Generator]): Noise source, `cfg.seed` if None.

    Returns:
        TaskParam: The last iterate of the chain.
    """
    chain = chain if chain is not None else PosteriorChain(prior=prior, cfg=cfg)
    rng = rng if rng is not None else np.random.default_rng(cfg.seed)
    return chain.sample(history, rng)
