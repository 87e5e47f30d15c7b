import json
import logging
import math
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import List, Optional, Tuple, Union

import numpy as np
import pandas as pd
from scipy.special import softmax

from constants import (
    BETA_EFF,
    DUAL_ITERATIONS,
    DUAL_STEP_SIZE,
    LAMBDA_STAR,
    REFERENCE_SAMPLES,
)
from src.envs import BaseEnvironment
from src.errors import DatasetError, DimensionError, UnsupportedError
from src.maxent.dual import demo_log_marginal_likelihood, dual_objective, maximize_dual
from src.maxent.features import CompiledDemos, build_feature_matrix, log_policy
from src.maxent.reference import (
    BaseReferenceSampler,
    default_reference,
    reference_from_dict,
)
from src.model import DemoDataset, TaskParam, dataset_digest
from src.utils import SeedLike, as_rng

logger = logging.getLogger(__name__)

ThetaLike = Union[TaskParam, np.ndarray]


@dataclass(frozen=True)
class FitOptions:
    """Budget of a prior fit.

    Attributes:
        n_samples (int): Reference samples S.
        iterations (int): Adam iterations on ln α.
        step_size (float): Adam step rate.
        seed (SeedLike): Seed of the reference draw.
        workers (int): Threads building the feature matrix.
    """

    n_samples: int = REFERENCE_SAMPLES
    iterations: int = DUAL_ITERATIONS
    step_size: float = DUAL_STEP_SIZE
    seed: SeedLike = 0
    workers: int = 1


@dataclass(frozen=True)
class FitReport:
    """Outcome of the dual optimization."""

    dual_value: float
    grad_norm: float
    dropped: int = 0
    log_marginal_likelihood: float = 0.0
    baseline_log_marginal_likelihood: float = 0.0
    trace: Tuple[Tuple[int, float, float], ...] = field(default_factory=tuple)

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(
            list(self.trace), columns=["iteration", "dual_value", "grad_norm"]
        )


@dataclass(frozen=True, eq=False)
class GibbsPrior:
    """Max-entropy expert prior with log-density Σ_i α_i m_i(θ) relative to μ0.

    Attributes:
        alpha (np.ndarray): Dual weights, one per demonstration.
        demos (DemoDataset): Demonstrations the features are built from.
        env (BaseEnvironment): Environment the task vectors parameterize.
        reference (BaseReferenceSampler): μ0.
        lambda_star (float): λ* used for the fit.
        beta (float): Expert β used to fit the weights.
        beta_eff (float): Finite β used for the differentiable log-density.
        report (Optional[FitReport]): Fit diagnostics, None for unfitted priors.
    """

    alpha: np.ndarray
    demos: DemoDataset
    env: BaseEnvironment
    reference: BaseReferenceSampler
    lambda_star: float = LAMBDA_STAR
    beta: float = math.inf
    beta_eff: float = BETA_EFF
    report: Optional[FitReport] = None

    def __post_init__(self):
        alpha = np.array(self.alpha, dtype=float).reshape(-1)
        if alpha.shape[0] != len(self.demos):
            raise DimensionError(
                f"{alpha.shape[0]} dual weights for {len(self.demos)} demonstrations"
            )
        if not np.all(np.isfinite(alpha)) or np.any(alpha < 0):
            raise DimensionError("dual weights must be finite and nonnegative")
        alpha.setflags(write=False)
        object.__setattr__(self, "alpha", alpha)

    @classmethod
    def empty(
        cls,
        env: BaseEnvironment,
        reference: Optional[BaseReferenceSampler] = None,
        beta_eff: float = BETA_EFF,
    ) -> "GibbsPrior":
        """The reference prior itself: no demonstrations, log-density 0."""
        return cls(
            alpha=np.zeros(0),
            demos=DemoDataset.empty(env.signature),
            env=env,
            reference=reference or default_reference(env),
            beta_eff=beta_eff,
        )

    @property
    def is_empty(self) -> bool:
        return not np.any(self.alpha > 0)

    @cached_property
    def _compiled(self) -> Tuple[CompiledDemos, np.ndarray]:
        compiled = CompiledDemos.from_demos(self.demos)
        weights = np.bincount(
            compiled.inverse, weights=self.alpha, minlength=compiled.n_unique
        )
        keep = weights > 0
        return (
            CompiledDemos(
                states=compiled.states[keep],
                actions=compiled.actions[keep],
                inverse=np.zeros(0, dtype=int),
            ),
            weights[keep],
        )

    def energies(self, thetas: np.ndarray, beta: Optional[float] = None) -> np.ndarray:
        """Σ_i α_i m_i(θ) for a batch of task vectors, shape (S,)."""
        thetas = np.atleast_2d(np.asarray(thetas, dtype=float))
        if self.is_empty:
            return np.zeros(thetas.shape[0])
        compiled, weights = self._compiled
        log_probs = log_policy(self.env.q_tables(thetas), self.beta_eff if beta is None else beta)
        return np.exp(compiled.log_likelihoods(log_probs)) @ weights

    def log_pdf_and_grad(self, theta: ThetaLike) -> Tuple[float, np.ndarray]:
        """Value and gradient of the unnormalized log-density at one θ.

        The gradient of each feature is m_i(θ)·Σ_h β_eff·(∇Q(s_h, a_h) −
        Σ_a p(a | s_h)·∇Q(s_h, a)), assembled on the Q-table and pulled back
        through the environment's parameter map.
        """
        values = _values(theta)
        theta_vec = self.env.check_param(values)
        if self.is_empty:
            return 0.0, np.zeros(self.env.param_dim)
        if math.isinf(self.beta_eff):
            raise UnsupportedError("the prior gradient needs a finite β-eff")

        compiled, weights = self._compiled
        q_table = self.env.q_table(theta_vec)
        log_probs = log_policy(q_table[None], self.beta_eff)[0]
        probs = np.exp(log_probs)
        features = np.exp(log_probs[compiled.states, compiled.actions].sum(axis=1))
        coefficients = weights * features

        grad_q = np.zeros_like(q_table)
        horizon = compiled.states.shape[1]
        step_coefficients = np.repeat(coefficients, horizon) * self.beta_eff
        states = compiled.states.reshape(-1)
        np.add.at(grad_q, (states, compiled.actions.reshape(-1)), step_coefficients)
        np.add.at(grad_q, states, -step_coefficients[:, None] * probs[states])
        return float(coefficients.sum()), self.env.pullback(grad_q)


def _values(theta: ThetaLike) -> np.ndarray:
    return theta.values if isinstance(theta, TaskParam) else np.asarray(theta, dtype=float)


def fit_prior(
    demos: DemoDataset,
    env: BaseEnvironment,
    reference: Optional[BaseReferenceSampler] = None,
    lambda_star: float = LAMBDA_STAR,
    beta: float = math.inf,
    beta_eff: float = BETA_EFF,
    opts: FitOptions = FitOptions(),
) -> GibbsPrior:
    """Fit the max-entropy expert prior to a set of demonstrations.

    Demonstrations whose feature is zero at every reference sample make the
    dual unbounded; they get α = 0 and are counted in the report.

    Args:
        demos (DemoDataset): Expert demonstrations, possibly empty.
        env (BaseEnvironment): Environment the demonstrations come from.
        reference (Optional[BaseReferenceSampler]): μ0, the environment's
            default if None.
        lambda_star (float): λ* ≥ 0.
        beta (float): Expert β used for the features.
        beta_eff (float): Finite β for the prior's log-density.
        opts (FitOptions): Sample and optimizer budget.

    Returns:
        GibbsPrior: The fitted prior.

    Raises:
        OptimizationError: If the dual becomes non-finite.
    """
    if lambda_star < 0:
        raise DimensionError(f"λ* must be nonnegative, got {lambda_star}")
    reference = reference or default_reference(env)
    n = len(demos)
    if n == 0 or lambda_star == 0:
        logger.info("No constraints to fit; the prior equals the reference")
        return GibbsPrior(
            alpha=np.zeros(n),
            demos=demos,
            env=env,
            reference=reference,
            lambda_star=lambda_star,
            beta=beta,
            beta_eff=beta_eff,
            report=FitReport(dual_value=0.0, grad_norm=0.0),
        )

    fm = build_feature_matrix(
        demos, env, reference, opts.n_samples, beta, opts.seed, opts.workers
    )
    keep = np.any(fm.values > 0, axis=0)
    dropped = int(n - keep.sum())
    if dropped:
        logger.warning(
            "%d of %d demonstrations are unexplained by every reference sample; "
            "their weights are fixed at 0",
            dropped,
            n,
        )

    alpha = np.zeros(n)
    trace: List[Tuple[int, float, float]] = []
    value, grad_norm = 0.0, 0.0
    if keep.any():
        kept = fm.columns(keep)
        alpha_kept, optimizer = maximize_dual(
            kept, lambda_star, opts.iterations, opts.step_size
        )
        alpha[keep] = alpha_kept
        trace = optimizer.trace
        value = dual_objective(alpha_kept, kept, lambda_star)
        grad_norm = trace[-1][2] if trace else 0.0

    report = FitReport(
        dual_value=value,
        grad_norm=grad_norm,
        dropped=dropped,
        log_marginal_likelihood=demo_log_marginal_likelihood(fm, alpha),
        baseline_log_marginal_likelihood=demo_log_marginal_likelihood(fm, np.zeros(n)),
        trace=tuple(trace),
    )
    logger.info(
        "Fitted prior on %d demos: dual %.6f, |grad| %.2e, Σα %.4f",
        n,
        value,
        grad_norm,
        alpha.sum(),
    )
    return GibbsPrior(
        alpha=alpha,
        demos=demos,
        env=env,
        reference=reference,
        lambda_star=lambda_star,
        beta=beta,
        beta_eff=beta_eff,
        report=report,
    )


def log_prior_pdf(prior: GibbsPrior, theta: ThetaLike) -> float:
    """Unnormalized log μ_ME(θ) = Σ_i α_i m_i(θ) with m evaluated at β-eff."""
    values = prior.env.check_param(_values(theta))
    return float(prior.energies(values[None])[0])


def grad_log_prior(prior: GibbsPrior, theta: ThetaLike) -> np.ndarray:
    """Analytic gradient of `log_prior_pdf`.

    Raises:
        UnsupportedError: When β-eff is infinite.
    """
    return prior.log_pdf_and_grad(theta)[1]


def gibbs_weights(
    prior: GibbsPrior, thetas: np.ndarray, beta: Optional[float] = None
) -> np.ndarray:
    """Self-normalized Gibbs weights of task vectors under the fit β by default."""
    return softmax(prior.energies(thetas, prior.beta if beta is None else beta))


def prior_normalization_check(
    prior: GibbsPrior,
    reference: Optional[BaseReferenceSampler] = None,
    n_samples: int = REFERENCE_SAMPLES,
    seed: SeedLike = 0,
) -> Tuple[float, float]:
    """Self-normalized weight total and effective sample ratio S_eff / S.

    Returns:
        Tuple[float, float]: Weight total (1 up to rounding) and S_eff / S.
    """
    if n_samples < 1:
        raise DimensionError("need at least one reference sample")
    reference = reference or prior.reference
    thetas = reference.sample(n_samples, as_rng(seed))
    weights = gibbs_weights(prior, thetas)
    total = float(weights.sum())
    s_eff = total**2 / float(np.sum(weights**2))
    return total, s_eff / n_samples


def reference_resample(
    prior: GibbsPrior,
    n: int,
    seed: SeedLike,
    pool_size: int = REFERENCE_SAMPLES,
) -> np.ndarray:
    """Approximate draws from the prior by importance-resampling μ0 samples.

    Args:
        prior (GibbsPrior): Fitted prior.
        n (int): Number of draws.
        seed (SeedLike): Seed or generator.
        pool_size (int): Reference samples in the resampling pool.

    Returns:
        np.ndarray: Array of shape (n, param_dim).
    """
    rng = as_rng(seed)
    pool = prior.reference.sample(pool_size, rng)
    weights = gibbs_weights(prior, pool)
    return pool[rng.choice(pool_size, size=n, p=weights)]


def _encode_beta(beta: float):
    return "inf" if math.isinf(beta) else beta


def save_prior(prior: GibbsPrior, path: Union[str, Path]) -> Path:
    """Write a fitted prior and, next to it, its fit trace as CSV."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    document = {
        "alpha": prior.alpha.tolist(),
        "lambda_star": prior.lambda_star,
        "beta": _encode_beta(prior.beta),
        "beta_eff": _encode_beta(prior.beta_eff),
        "env": prior.env.signature,
        "demo_hash": dataset_digest(prior.demos),
        "reference": prior.reference.to_dict(),
    }
    path.write_text(json.dumps(document, indent=2), encoding="utf-8")
    if prior.report is not None:
        prior.report.to_frame().to_csv(path.with_suffix(".fit.csv"), index=False)
    logger.info("Saved prior to %s", path)
    return path


def load_prior(
    path: Union[str, Path], demos: DemoDataset, env: BaseEnvironment
) -> GibbsPrior:
    """Load a prior saved by `save_prior`.

    Raises:
        DatasetError: If the demos or environment differ from the saved ones.
    """
    path = Path(path)
    try:
        document = json.loads(path.read_text(encoding="utf-8"))
        alpha = np.array(document["alpha"], dtype=float)
        signature = document["env"]
        digest = document["demo_hash"]
        reference = reference_from_dict(document["reference"])
    except (KeyError, TypeError, ValueError) as e:
        raise DatasetError(f"{path}: malformed prior file ({e})") from e

    if signature != env.signature:
        raise DatasetError(f"{path}: prior fit on {signature}, not {env.signature}")
    if digest != dataset_digest(demos):
        raise DatasetError(f"{path}: demonstrations differ from the fitted ones")
    return GibbsPrior(
        alpha=alpha,
        demos=demos,
        env=env,
        reference=reference,
        lambda_star=float(document["lambda_star"]),
        beta=float(document["beta"]),
        beta_eff=float(document["beta_eff"]),
    )
