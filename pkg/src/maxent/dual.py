import logging
from dataclasses import dataclass, field
from typing import Callable, List, Tuple

import numpy as np
from scipy.optimize import minimize
from scipy.special import logsumexp, softmax

from constants import ADAM_BETA1, ADAM_BETA2, ADAM_EPSILON
from src.errors import DimensionError, OptimizationError
from src.maxent.features import FeatureMatrix

logger = logging.getLogger(__name__)

WARMUP_ITERATIONS = 10
LOG_EVERY = 200


def _check(alpha: np.ndarray, fm: FeatureMatrix, lambda_star: float) -> np.ndarray:
    alpha = np.asarray(alpha, dtype=float).reshape(-1)
    if alpha.shape[0] != fm.n_demos:
        raise DimensionError(
            f"alpha has {alpha.shape[0]} entries, feature matrix has {fm.n_demos} columns"
        )
    if lambda_star < 0:
        raise DimensionError(f"λ* must be nonnegative, got {lambda_star}")
    return alpha


def gibbs_log_weights(fm: FeatureMatrix, alpha: np.ndarray) -> np.ndarray:
    """Normalized log importance weights ∝ exp(m_jᵀα) over reference samples."""
    energies = fm.values @ np.asarray(alpha, dtype=float)
    return energies - logsumexp(energies)


def dual_objective(alpha: np.ndarray, fm: FeatureMatrix, lambda_star: float) -> float:
    """Monte Carlo estimate of the concave max-entropy dual.

    −logsumexp_j(m_jᵀα − ln S) + (λ*/N)·Σ_i ln(N·α_i/λ*), with the second term
    taken as 0 when λ* = 0.

    Args:
        alpha (np.ndarray): Dual weights, length N.
        fm (FeatureMatrix): Features at reference samples.
        lambda_star (float): Data-fit multiplier λ* ≥ 0.

    Returns:
        float: Dual value, −∞ when some α_i ≤ 0 and λ* > 0.
    """
    alpha = _check(alpha, fm, lambda_star)
    n = fm.n_demos
    value = -float(logsumexp(fm.values @ alpha) - np.log(fm.n_samples))
    if lambda_star == 0 or n == 0:
        return value
    if np.any(alpha <= 0):
        return -np.inf
    return value + lambda_star / n * float(np.sum(np.log(n * alpha / lambda_star)))


def dual_gradient(alpha: np.ndarray, fm: FeatureMatrix, lambda_star: float) -> np.ndarray:
    """Gradient −Ê_w[m] + (λ*/N)/α of `dual_objective`.

    Raises:
        DimensionError: When some α_i ≤ 0.
    """
    alpha = _check(alpha, fm, lambda_star)
    if np.any(alpha <= 0):
        raise DimensionError("dual gradient needs strictly positive alpha")
    weights = softmax(fm.values @ alpha)
    grad = -(weights @ fm.values)
    if lambda_star > 0:
        grad = grad + lambda_star / fm.n_demos / alpha
    return grad


def demo_log_marginal_likelihood(fm: FeatureMatrix, alpha: np.ndarray) -> float:
    """Mean over demos of ln Ê_w[m_i] under the Gibbs weights of `alpha`.

    `alpha` = 0 gives the reference-prior value.
    """
    if fm.n_demos == 0:
        return 0.0
    alpha = np.asarray(alpha, dtype=float)
    log_w = gibbs_log_weights(fm, alpha)
    with np.errstate(divide="ignore"):
        per_demo = logsumexp(log_w[:, None] + fm.log_values, axis=0)
    return float(np.mean(per_demo))


@dataclass
class AdamAscent:
    """Adam with bias correction, maximizing an objective.

    An iterate that lowers the objective after the warm-up is rejected and
    halves the step size, so the accepted trace never decreases.

    Attributes:
        step_size (float): Base step rate.
        beta1 (float): Decay of the first-moment estimate.
        beta2 (float): Decay of the second-moment estimate.
        epsilon (float): Offset added to the root second moment.
    """

    step_size: float
    beta1: float = ADAM_BETA1
    beta2: float = ADAM_BETA2
    epsilon: float = ADAM_EPSILON
    warmup: int = WARMUP_ITERATIONS
    trace: List[Tuple[int, float, float]] = field(default_factory=list)

    def run(
        self,
        x0: np.ndarray,
        value_and_grad: Callable[[np.ndarray], Tuple[float, np.ndarray]],
        iterations: int,
        report: Callable[[np.ndarray, float], float] = None,
    ) -> Tuple[np.ndarray, float]:
        """Ascend from `x0`.

        Args:
            x0 (np.ndarray): Starting point.
            value_and_grad (Callable): Objective value and gradient at a point.
            iterations (int): Number of iterations.
            report (Callable): Maps (x, value) to the gradient norm recorded
                in the trace; the Adam gradient norm is used if None.

        Returns:
            Tuple[np.ndarray, float]: Final point and its objective value.

        Raises:
            OptimizationError: On a non-finite objective or gradient.
        """
        x = np.array(x0, dtype=float)
        m = np.zeros_like(x)
        v = np.zeros_like(x)
        value, grad = value_and_grad(x)
        step_size = self.step_size
        for t in range(1, iterations + 1):
            if not np.isfinite(value) or not np.all(np.isfinite(grad)):
                raise OptimizationError("non-finite dual objective", t - 1)
            m = self.beta1 * m + (1 - self.beta1) * grad
            v = self.beta2 * v + (1 - self.beta2) * grad**2
            rate = step_size * np.sqrt(1 - self.beta2**t) / (1 - self.beta1**t)
            candidate = x + rate * m / (np.sqrt(v) + self.epsilon)
            new_value, new_grad = value_and_grad(candidate)
            if not np.isfinite(new_value):
                raise OptimizationError("non-finite dual objective", t)
            if t > self.warmup and new_value < value:
                step_size *= 0.5
            else:
                x, value, grad = candidate, new_value, new_grad

            norm = report(x, value) if report else float(np.linalg.norm(grad))
            self.trace.append((t, value, norm))
            if t % LOG_EVERY == 0:
                logger.debug("iteration %d: dual %.6f, |grad| %.3e", t, value, norm)
        return x, value


def maximize_dual(
    fm: FeatureMatrix,
    lambda_star: float,
    iterations: int,
    step_size: float,
    polish: bool = True,
) -> Tuple[np.ndarray, AdamAscent]:
    """Maximize the dual over α > 0 by ascent on ξ = ln α.

    Adam runs for `iterations` steps; a quasi-Newton polish in ξ then drives the
    gradient to numerical zero and is kept only if it improves the dual.

    Args:
        fm (FeatureMatrix): Features with no all-zero columns.
        lambda_star (float): λ* > 0.
        iterations (int): Adam iterations.
        step_size (float): Adam step rate on ξ.
        polish (bool): Whether to run the quasi-Newton refinement.

    Returns:
        Tuple[np.ndarray, AdamAscent]: Fitted α and the optimizer with its trace.
    """
    n = fm.n_demos

    def value_and_grad(xi: np.ndarray) -> Tuple[float, np.ndarray]:
        alpha = np.exp(xi)
        value = dual_objective(alpha, fm, lambda_star)
        return value, dual_gradient(alpha, fm, lambda_star) * alpha

    def alpha_grad_norm(xi: np.ndarray, _: float) -> float:
        return float(np.linalg.norm(dual_gradient(np.exp(xi), fm, lambda_star)))

    xi0 = np.full(n, np.log(lambda_star / n))
    optimizer = AdamAscent(step_size=step_size)
    xi, value = optimizer.run(xi0, value_and_grad, iterations, report=alpha_grad_norm)

    if polish and n:

        def negative(z: np.ndarray) -> Tuple[float, np.ndarray]:
            val, grad = value_and_grad(z)
            return -val, -grad

        result = minimize(
            negative, xi, jac=True, method="L-BFGS-B", options={"gtol": 1e-12, "ftol": 1e-15}
        )
        if np.all(np.isfinite(result.x)) and -result.fun >= value:
            xi, value = result.x, -float(result.fun)
            optimizer.trace.append(
                (len(optimizer.trace) + 1, value, alpha_grad_norm(xi, value))
            )
    return np.exp(xi), optimizer
