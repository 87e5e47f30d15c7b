import logging
import math
import multiprocessing
from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import Iterator, List, Optional, Tuple

import numpy as np
from tqdm import tqdm

from constants import ENTROPY_MC_SAMPLES, ENTROPY_THRESHOLDS, VERSION
from src.agents import AgentConfig, BaseAgent, agent_factory_for
from src.config import ExperimentConfig
from src.envs import (
    BaseEnvironment,
    BernoulliBanditSpec,
    DeepSeaSpec,
    TaskDistribution,
    generate_demos,
    optimal_action_entropy,
    sample_beta_product_distribution,
    sample_task,
    solve_deep_sea_q,
)
from src.errors import ConfigError, DatasetError, PriorSimError
from src.maxent import GibbsPrior, fit_prior
from src.model import (
    DemoDataset,
    RegretRecord,
    TaskParam,
    Transition,
    read_demos,
    validate_dataset,
)
from src.processor.emit import RecordSpool
from src.processor.report import RegretReport, entropy_label
from src.utils import SeedLike, as_rng, make_rng

logger = logging.getLogger(__name__)

PRIOR_AGENTS = ("expert-ts", "expert-bootdqn")
MAX_BINNED_DRAWS = 200_000


@dataclass(frozen=True)
class DistributionContext:
    """Everything the cells of one task distribution share.

    Attributes:
        dist_id (int): Index of the distribution in the suite.
        dist (TaskDistribution): True task distribution μ*.
        env (BaseEnvironment): Environment the tasks live in.
        demos (DemoDataset): Expert demonstrations drawn from μ*.
        prior (Optional[GibbsPrior]): Prior fitted on `demos`, None if no agent needs it.
        entropy (float): Optimal-action entropy of μ* in nats.
        label (str): Human-readable name used for grouping.
    """

    dist_id: int
    dist: TaskDistribution
    env: BaseEnvironment
    demos: DemoDataset
    prior: Optional[GibbsPrior]
    entropy: float
    label: str


@dataclass(frozen=True)
class SuiteCell:
    """One (distribution, task, agent) run of T episodes."""

    context: DistributionContext
    task_id: int
    seed: int
    agent_index: int
    agent: AgentConfig
    task: TaskParam
    episodes: int
    agent_keys: Tuple[int, ...]
    env_keys: Tuple[int, ...]

    @property
    def key(self) -> Tuple[str, int, int, int]:
        return (self.agent.name, self.context.dist_id, self.task_id, self.seed)


def run_episodes(
    env: BaseEnvironment,
    task: TaskParam,
    agent: BaseAgent,
    episodes: int,
    agent_rng: np.random.Generator,
    env_rng: np.random.Generator,
) -> List[Tuple[float, float]]:
    """Drive an agent through `episodes` episodes of one task.

    Single-step environments are scored by expected regret, the optimal
    expected reward minus that of the chosen action. Multi-step environments
    are scored by V* minus the realized return.

    Args:
        env (BaseEnvironment): Environment.
        task (TaskParam): Task the environment steps under.
        agent (BaseAgent): Agent to run.
        episodes (int): Number of episodes T.
        agent_rng (np.random.Generator): Random source of the agent.
        env_rng (np.random.Generator): Random source of contexts and rewards.

    Returns:
        List[Tuple[float, float]]: (reward, instant regret) per episode.
    """
    results = []
    for _ in range(episodes):
        agent.begin_episode(agent_rng)
        state = first_state = env.initial_state(env_rng)
        first_action = None
        total = 0.0
        done = False
        while not done:
            action = agent.act(state, agent_rng)
            if first_action is None:
                first_action = action
            next_state, reward, done = env.step(task, state, action, env_rng)
            agent.observe(Transition(state, action, reward, next_state, done))
            total += reward
            state = next_state
        agent.end_episode(agent_rng)

        optimal = env.optimal_value(task, first_state)
        if env.horizon == 1:
            regret = optimal - env.expected_reward(task, first_state, first_action)
        else:
            regret = optimal - total
        results.append((float(total), float(regret)))
    return results


def run_cell(cell: SuiteCell) -> Tuple[SuiteCell, List[RegretRecord], Optional[str]]:
    """Run one cell; errors are logged and reported instead of raised."""
    context = cell.context
    try:
        agent_rng = make_rng(*cell.agent_keys)
        env_rng = make_rng(*cell.env_keys)
        factory = agent_factory_for(context.env, context.prior, context.demos, context.dist)
        agent = factory.create_agent(cell.agent, agent_rng)
        results = run_episodes(context.env, cell.task, agent, cell.episodes, agent_rng, env_rng)
    except Exception as e:
        logger.error("Cell %s failed: %s", cell.key, e)
        return cell, [], f"{type(e).__name__}: {e}"
    records = [
        RegretRecord(
            algo=cell.agent.name,
            task_dist_id=context.dist_id,
            task_id=cell.task_id,
            seed=cell.seed,
            episode=episode,
            instant_regret=regret,
            reward=reward,
        )
        for episode, (reward, regret) in enumerate(results, start=1)
    ]
    return cell, records, None


def sample_binned_distributions(
    K: int,
    per_bin: int,
    thresholds: Tuple[float, float] = ENTROPY_THRESHOLDS,
    seed: SeedLike = 0,
    mc_samples: int = ENTROPY_MC_SAMPLES,
    max_draws: int = MAX_BINNED_DRAWS,
) -> List[Tuple[TaskDistribution, float]]:
    """Draw beta-product distributions until each entropy bin holds `per_bin`.

    Args:
        K (int): Number of arms.
        per_bin (int): Distributions kept per bin.
        thresholds (Tuple[float, float]): Low and high entropy thresholds.
        seed (SeedLike): Seed or generator.
        mc_samples (int): Monte Carlo draws per entropy estimate.
        max_draws (int): Candidates tried before giving up.

    Returns:
        List[Tuple[TaskDistribution, float]]: Distributions with their entropy,
            ordered low, medium, high and by draw order within a bin.

    Raises:
        PriorSimError: If some bin is still short after `max_draws` candidates.
    """
    env = BernoulliBanditSpec(K)
    rng = as_rng(seed)
    bins = {"low": [], "medium": [], "high": []}
    for _ in range(max_draws):
        if all(len(kept) >= per_bin for kept in bins.values()):
            break
        dist = sample_beta_product_distribution(K, rng)
        value = optimal_action_entropy(env, dist, mc_samples, rng)
        kept = bins[entropy_label(value, thresholds)]
        if len(kept) < per_bin:
            kept.append((dist, value))
    short = {name: len(kept) for name, kept in bins.items() if len(kept) < per_bin}
    if short:
        raise PriorSimError(f"entropy bins still short after {max_draws} draws: {short}")
    return bins["low"] + bins["medium"] + bins["high"]


class BaseSuite(ABC):
    """Abstract base class for experiment suites."""

    def __init__(self, cfg: ExperimentConfig):
        """Initialize the suite with a validated configuration.

        Args:
            cfg (ExperimentConfig): Experiment settings.
        """
        self.cfg = cfg
        self.env = cfg.build_env()
        self.master = cfg.experiment.seed

    @abstractmethod
    def distributions(self) -> List[Tuple[TaskDistribution, BaseEnvironment, str, Optional[float]]]:
        """Task distributions of the suite.

        Returns:
            List[Tuple[TaskDistribution, BaseEnvironment, str, Optional[float]]]:
                Distribution, its environment, a label and its entropy if known.
        """
        pass

    @abstractmethod
    def cells(self, context: DistributionContext) -> Iterator[SuiteCell]:
        """Cells to run for one distribution."""
        pass

    def needs_prior(self) -> bool:
        return any(agent.kind in PRIOR_AGENTS for agent in self.cfg.agents)

    def load_demos(self, env: BaseEnvironment, dist: TaskDistribution, dist_id: int) -> DemoDataset:
        """Read the configured demo file, or roll out experts on μ*."""
        section = self.cfg.demos
        if section.file is None:
            return generate_demos(
                env, dist, section.beta, section.count, make_rng(self.master, dist_id)
            )
        demos = read_demos(section.file)
        result = validate_dataset(demos, env.signature)
        if not result.ok:
            raise DatasetError(f"{section.file}: " + "; ".join(result.errors[:5]))
        return demos

    def fit(self, demos: DemoDataset, env: BaseEnvironment, dist_id: int) -> GibbsPrior:
        """Fit the expert prior of one distribution with the configured budget."""
        section = self.cfg.prior
        return fit_prior(
            demos,
            env,
            lambda_star=section.lambda_star,
            beta=self.cfg.demos.beta,
            beta_eff=section.beta_eff,
            opts=section.fit_options(
                np.random.SeedSequence([self.master, dist_id, 0]),
                self.cfg.experiment.workers,
            ),
        )

    def prepare_distribution(
        self,
        dist_id: int,
        dist: TaskDistribution,
        env: BaseEnvironment,
        label: str,
        entropy: Optional[float],
    ) -> DistributionContext:
        """Generate demos, fit the prior and measure the entropy of one distribution."""
        demos = self.load_demos(env, dist, dist_id)
        prior = self.fit(demos, env, dist_id) if self.needs_prior() else None
        if entropy is None:
            entropy = optimal_action_entropy(
                env, dist, ENTROPY_MC_SAMPLES, make_rng(self.master, dist_id, 1)
            )
        logger.info("Distribution %d (%s): entropy %.3f nats", dist_id, label, entropy)
        return DistributionContext(dist_id, dist, env, demos, prior, float(entropy), label)

    def prepare(self) -> Tuple[List[DistributionContext], List[Tuple[DistributionContext, str]]]:
        """Prepare every distribution, one at a time.

        A distribution whose preparation fails is logged and skipped; its cells
        are reported as failed and the other distributions still run.

        Returns:
            Tuple[List[DistributionContext], List[Tuple[DistributionContext, str]]]:
                Prepared contexts, and placeholder contexts of the failed
                distributions with their error.
        """
        contexts, broken = [], []
        for dist_id, (dist, env, label, entropy) in enumerate(self.distributions()):
            try:
                contexts.append(self.prepare_distribution(dist_id, dist, env, label, entropy))
            except Exception as e:
                logger.error("Distribution %d (%s) failed: %s", dist_id, label, e)
                placeholder = DistributionContext(
                    dist_id, dist, env, DemoDataset.empty(env.signature), None, math.nan, label
                )
                broken.append((placeholder, f"{type(e).__name__}: {e}"))
        return contexts, broken

    def expected_records(self, n_distributions: int) -> int:
        return (
            len(self.cfg.agents)
            * n_distributions
            * self.runs_per_distribution()
            * self.cfg.experiment.episodes
        )

    @abstractmethod
    def runs_per_distribution(self) -> int:
        pass

    def run(self, progress: bool = True, spool: Optional[RecordSpool] = None) -> RegretReport:
        """Run every cell and collect the records in key order.

        Args:
            progress (bool): Whether to show a progress bar.
            spool (Optional[RecordSpool]): Where finished runs go instead of
                memory; the report then carries metadata only.

        Returns:
            RegretReport: Records plus metadata.
        """
        contexts, broken = self.prepare()
        cells = [cell for context in contexts for cell in self.cells(context)]
        failed = [(cell.key, error) for context, error in broken for cell in self.cells(context)]
        total = len(cells) + len(failed)
        workers = self.cfg.experiment.workers
        logger.info("Running %d cells on %d worker(s)", len(cells), workers)

        records: List[RegretRecord] = []
        keep = records.extend if spool is None else spool.add
        bar = tqdm(total=len(cells), desc=self.cfg.experiment.name, disable=not progress)
        if workers > 1:
            with multiprocessing.Pool(workers) as pool:
                for cell, cell_records, error in pool.imap_unordered(run_cell, cells):
                    keep(cell_records)
                    if error:
                        failed.append((cell.key, error))
                    bar.update()
        else:
            for cell in cells:
                cell, cell_records, error = run_cell(cell)
                keep(cell_records)
                if error:
                    failed.append((cell.key, error))
                bar.update()
        bar.close()

        records.sort(key=RegretRecord.key)
        expected = self.expected_records(len(contexts) + len(broken))
        if failed:
            logger.warning("%d of %d cells failed", len(failed), total)
        metadata = {
            "config_hash": self.cfg.digest(),
            "version": VERSION,
            "suite": self.cfg.experiment.suite,
            "episodes": self.cfg.experiment.episodes,
            "entropies": {c.dist_id: c.entropy for c in contexts},
            "labels": {
                c.dist_id: c.label
                for c in sorted(contexts + [b for b, _ in broken], key=lambda c: c.dist_id)
            },
            "expected_records": expected,
            "records_written": len(records) if spool is None else len(spool),
            "failed_cells": [
                {
                    "algo": key[0],
                    "task_dist_id": key[1],
                    "task_id": key[2],
                    "seed": key[3],
                    "error": error,
                }
                for key, error in sorted(failed)
            ],
        }
        return RegretReport(records=records, metadata=metadata)


class BanditSuite(BaseSuite):
    """Bayesian-regret benchmark on bandits: N_task tasks per distribution, one master seed."""

    def distributions(self) -> List[Tuple[TaskDistribution, BaseEnvironment, str, Optional[float]]]:
        tasks = self.cfg.tasks
        env = self.env
        if tasks.source == "random-beta":
            rng = make_rng(self.master)
            dists = [sample_beta_product_distribution(env.n_actions, rng) for _ in range(tasks.count)]
            return [(d, env, f"beta-{i}", None) for i, d in enumerate(dists)]
        if tasks.source == "binned":
            binned = sample_binned_distributions(
                env.n_actions, tasks.per_bin, tasks.thresholds, make_rng(self.master)
            )
            return [
                (d, env, entropy_label(value, tasks.thresholds), value) for d, value in binned
            ]
        if tasks.source == "beta-product":
            dist = TaskDistribution.beta_product(tasks.a, tasks.b)
        elif tasks.source == "point-mass":
            dist = TaskDistribution.point_mass(TaskParam(np.asarray(tasks.point), kind=env.task_kind))
        elif tasks.source == "gaussian":
            dist = TaskDistribution.gaussian(tasks.mean, tasks.std)
        else:
            raise ConfigError(f"tasks.source {tasks.source!r} does not apply to bandits")
        return [(dist, env, tasks.source, None)]

    def runs_per_distribution(self) -> int:
        return self.cfg.experiment.tasks_per_distribution

    def cells(self, context: DistributionContext) -> Iterator[SuiteCell]:
        for task_id in range(self.cfg.experiment.tasks_per_distribution):
            task = sample_task(context.dist, make_rng(self.master, context.dist_id, task_id, 0), context.env)
            for index, agent in enumerate(self.cfg.agents):
                yield SuiteCell(
                    context=context,
                    task_id=task_id,
                    seed=self.master,
                    agent_index=index,
                    agent=agent,
                    task=task,
                    episodes=self.cfg.experiment.episodes,
                    agent_keys=(self.master, context.dist_id, task_id, index + 1),
                    env_keys=(self.master, context.dist_id, task_id, 0, 1),
                )


class DeepSeaSuite(BaseSuite):
    """Deep Sea benchmark: one distribution per goal shape, a fresh goal per seed."""

    def distributions(self) -> List[Tuple[TaskDistribution, BaseEnvironment, str, Optional[float]]]:
        if self.cfg.tasks.source != "goals":
            raise ConfigError("a deepsea suite needs tasks.source: goals")
        result = []
        for name in self.cfg.tasks.goal_distributions:
            spec = DeepSeaSpec(self.env.M, goal_distribution=name, move_cost=self.env.move_cost)
            result.append((TaskDistribution.for_deep_sea(spec), spec, name, None))
        return result

    def runs_per_distribution(self) -> int:
        return self.cfg.experiment.seeds

    def cells(self, context: DistributionContext) -> Iterator[SuiteCell]:
        probs = np.asarray(context.dist.goal_probs)
        for seed in range(self.cfg.experiment.seeds):
            rng = make_rng(self.master, context.dist_id, seed, 0)
            goal = int(rng.choice(probs.size, p=probs))
            task, _ = solve_deep_sea_q(context.env, goal)
            for index, agent in enumerate(self.cfg.agents):
                yield SuiteCell(
                    context=context,
                    task_id=goal,
                    seed=seed,
                    agent_index=index,
                    agent=agent,
                    task=task,
                    episodes=self.cfg.experiment.episodes,
                    agent_keys=(self.master, context.dist_id, seed, index + 1),
                    env_keys=(self.master, context.dist_id, seed, 0, 1),
                )


def suite_for(cfg: ExperimentConfig) -> BaseSuite:
    """Pick the suite matching `experiment.suite`."""
    if cfg.experiment.suite == "deepsea":
        return DeepSeaSuite(cfg)
    return BanditSuite(cfg)


def run_bandit_suite(
    cfg: ExperimentConfig, progress: bool = True, spool: Optional[RecordSpool] = None
) -> RegretReport:
    if cfg.experiment.suite != "bandit":
        raise ConfigError(f"run_bandit_suite needs a bandit config, got {cfg.experiment.suite!r}")
    return BanditSuite(cfg).run(progress, spool)


def run_deepsea_suite(
    cfg: ExperimentConfig, progress: bool = True, spool: Optional[RecordSpool] = None
) -> RegretReport:
    if cfg.experiment.suite != "deepsea":
        raise ConfigError(f"run_deepsea_suite needs a deepsea config, got {cfg.experiment.suite!r}")
    return DeepSeaSuite(cfg).run(progress, spool)
