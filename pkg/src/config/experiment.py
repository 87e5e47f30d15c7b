import dataclasses
import logging
import math
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple, Union

import numpy as np
import yaml
from dotenv import load_dotenv

from constants import (
    BETA_EFF,
    DEEP_SEA_GOALS,
    DEFAULT_OUTPUT_DIR,
    DUAL_ITERATIONS,
    DUAL_STEP_SIZE,
    ENTROPY_THRESHOLDS,
    LAMBDA_STAR,
    REFERENCE_SAMPLES,
    SGLD_STEP_SIZE_BANDIT,
    SGLD_STEP_SIZE_MDP,
    SGLD_STEPS,
    SGLD_TEMPERATURE,
)
from src.agents import BANDIT_AGENTS, MDP_AGENTS, AgentConfig
from src.envs import BaseEnvironment, BernoulliBanditSpec, DeepSeaSpec, LinearBanditSpec
from src.errors import ConfigError, PriorSimError
from src.maxent import FitOptions
from src.sampling import SgldConfig
from src.utils import SeedLike, stable_digest

logger = logging.getLogger(__name__)

TASK_SOURCES = ("random-beta", "binned", "beta-product", "point-mass", "goals", "gaussian")


@dataclass(frozen=True)
class ExperimentSection:
    name: str = "experiment"
    suite: str = "bandit"
    seed: int = 0
    episodes: int = 100
    tasks_per_distribution: int = 1
    seeds: int = 1
    output_dir: str = DEFAULT_OUTPUT_DIR
    workers: int = 1
    spool_records: bool = False

    def __post_init__(self):
        if self.suite not in ("bandit", "deepsea"):
            raise ConfigError(f"experiment.suite must be bandit or deepsea, got {self.suite!r}")
        for name in ("episodes", "tasks_per_distribution", "seeds", "workers"):
            if getattr(self, name) < 1:
                raise ConfigError(f"experiment.{name} must be at least 1")


@dataclass(frozen=True)
class EnvSection:
    family: str = "bandit"
    K: int = 10
    M: int = 10
    move_cost: Optional[float] = None
    contexts: int = 4
    d: int = 3
    feature_seed: int = 0


@dataclass(frozen=True)
class TasksSection:
    """How task distributions are produced.

    `random-beta` draws `count` beta-product distributions, `binned` draws
    until each entropy bin holds `per_bin`, `beta-product` / `point-mass` /
    `gaussian` give a single explicit distribution, `goals` lists Deep Sea
    goal distributions.
    """

    source: str = "random-beta"
    count: int = 1
    per_bin: int = 1
    thresholds: Tuple[float, float] = ENTROPY_THRESHOLDS
    a: Tuple[float, ...] = ()
    b: Tuple[float, ...] = ()
    point: Tuple[float, ...] = ()
    mean: Tuple[float, ...] = ()
    std: float = 1.0
    goal_distributions: Tuple[str, ...] = ("corner",)

    def __post_init__(self):
        if self.source not in TASK_SOURCES:
            raise ConfigError(f"tasks.source must be one of {TASK_SOURCES}, got {self.source!r}")
        if self.count < 1 or self.per_bin < 1:
            raise ConfigError("tasks.count and tasks.per_bin must be at least 1")
        for goal in self.goal_distributions:
            if goal not in DEEP_SEA_GOALS:
                raise ConfigError(f"unknown goal distribution {goal!r}")
        for name in ("thresholds", "a", "b", "point", "mean", "goal_distributions"):
            object.__setattr__(self, name, tuple(getattr(self, name)))


@dataclass(frozen=True)
class DemosSection:
    count: int = 100
    beta: float = math.inf
    file: Optional[str] = None

    def __post_init__(self):
        object.__setattr__(self, "beta", float(self.beta))
        if self.count < 1:
            raise ConfigError("demos.count must be at least 1")
        if self.beta < 0:
            raise ConfigError("demos.beta must be nonnegative")
        if self.file is not None and not Path(self.file).exists():
            raise ConfigError(f"demos.file {self.file!r} does not exist")


@dataclass(frozen=True)
class PriorSection:
    lambda_star: float = LAMBDA_STAR
    beta_eff: float = BETA_EFF
    samples: int = REFERENCE_SAMPLES
    iterations: int = DUAL_ITERATIONS
    step_size: float = DUAL_STEP_SIZE

    def __post_init__(self):
        if self.lambda_star < 0:
            raise ConfigError("prior.lambda_star must be nonnegative")
        if not 0 <= self.beta_eff < math.inf:
            raise ConfigError("prior.beta_eff must be finite and nonnegative")
        if self.samples < 1 or self.iterations < 0 or self.step_size <= 0:
            raise ConfigError("prior.samples ≥ 1, iterations ≥ 0 and step_size > 0 required")

    def fit_options(self, seed: SeedLike, workers: int = 1) -> FitOptions:
        return FitOptions(
            n_samples=self.samples,
            iterations=self.iterations,
            step_size=self.step_size,
            seed=seed,
            workers=workers,
        )


@dataclass(frozen=True)
class SgldSection:
    step_size: Optional[float] = None
    steps: int = SGLD_STEPS
    thinning: int = 1
    temperature: float = SGLD_TEMPERATURE


@dataclass(frozen=True)
class ExperimentConfig:
    """Parsed experiment document."""

    experiment: ExperimentSection = field(default_factory=ExperimentSection)
    env: EnvSection = field(default_factory=EnvSection)
    tasks: TasksSection = field(default_factory=TasksSection)
    demos: DemosSection = field(default_factory=DemosSection)
    prior: PriorSection = field(default_factory=PriorSection)
    sgld: SgldSection = field(default_factory=SgldSection)
    agents: Tuple[AgentConfig, ...] = ()

    def __post_init__(self):
        if not self.agents:
            raise ConfigError("agents: at least one agent is required")
        allowed = BANDIT_AGENTS if self.experiment.suite == "bandit" else MDP_AGENTS
        for agent in self.agents:
            if agent.kind not in allowed:
                raise ConfigError(
                    f"agent {agent.kind!r} cannot run in a {self.experiment.suite} suite"
                )
        names = [agent.name for agent in self.agents]
        if len(set(names)) != len(names):
            raise ConfigError(f"agent labels must be unique, got {names}")
        suite_family = {"bandit": ("bandit", "linear"), "deepsea": ("deepsea",)}
        if self.env.family not in suite_family[self.experiment.suite]:
            raise ConfigError(
                f"env.family {self.env.family!r} does not match suite {self.experiment.suite!r}"
            )

    def build_env(self) -> BaseEnvironment:
        env = self.env
        try:
            if env.family == "bandit":
                return BernoulliBanditSpec(env.K)
            if env.family == "deepsea":
                return DeepSeaSpec(env.M, move_cost=env.move_cost)
            rng = np.random.default_rng(env.feature_seed)
            features = rng.standard_normal((env.contexts, env.K, env.d)) / math.sqrt(env.d)
            return LinearBanditSpec(features)
        except PriorSimError as e:
            raise ConfigError(f"env: {e}") from e

    def sgld_config(self) -> SgldConfig:
        return sgld_config(self.experiment, self.sgld)

    def with_overrides(
        self,
        seed: Optional[int] = None,
        workers: Optional[int] = None,
        output_dir: Optional[str] = None,
    ) -> "ExperimentConfig":
        """Copy with experiment fields replaced where a value is given."""
        changes = {
            key: value
            for key, value in (("seed", seed), ("workers", workers), ("output_dir", output_dir))
            if value is not None
        }
        if not changes:
            return self
        return dataclasses.replace(
            self, experiment=dataclasses.replace(self.experiment, **changes)
        )

    def to_dict(self) -> Dict[str, Any]:
        return dataclasses.asdict(self)

    def digest(self) -> str:
        """SHA-256 of the canonical JSON dump, excluding where results are written."""
        payload = self.to_dict()
        payload["experiment"].pop("output_dir")
        payload["experiment"].pop("workers")
        payload["experiment"].pop("spool_records")
        return stable_digest(payload)


def sgld_config(experiment: ExperimentSection, section: SgldSection) -> SgldConfig:
    """Sampler settings with the step size defaulting per suite."""
    step_size = section.step_size
    if step_size is None:
        step_size = SGLD_STEP_SIZE_MDP if experiment.suite == "deepsea" else SGLD_STEP_SIZE_BANDIT
    return SgldConfig(
        step_size=step_size,
        steps=section.steps,
        thinning=section.thinning,
        temperature=section.temperature,
    )


SECTIONS = {
    "experiment": ExperimentSection,
    "env": EnvSection,
    "tasks": TasksSection,
    "demos": DemosSection,
    "prior": PriorSection,
    "sgld": SgldSection,
}


def _build(cls, payload: Any, where: str):
    if payload is None:
        payload = {}
    if not isinstance(payload, dict):
        raise ConfigError(f"{where}: expected a mapping")
    known = {f.name for f in dataclasses.fields(cls)}
    unknown = sorted(set(payload) - known)
    if unknown:
        raise ConfigError(f"{where}: unknown keys {unknown}")
    try:
        return cls(**payload)
    except (TypeError, ValueError) as e:
        raise ConfigError(f"{where}: {e}") from e


def parse_config(document: Dict[str, Any]) -> ExperimentConfig:
    """Build an `ExperimentConfig` from a parsed YAML mapping.

    Args:
        document (Dict[str, Any]): Top-level mapping with the known sections.

    Returns:
        ExperimentConfig: The validated configuration.

    Raises:
        ConfigError: On unknown sections or keys and on invalid values.
    """
    if not isinstance(document, dict):
        raise ConfigError("config: expected a mapping at the top level")
    unknown = sorted(set(document) - set(SECTIONS) - {"agents"})
    if unknown:
        raise ConfigError(f"config: unknown sections {unknown}")

    sections = {name: _build(cls, document.get(name), name) for name, cls in SECTIONS.items()}
    sgld = sgld_config(sections["experiment"], sections["sgld"])

    agents: List[AgentConfig] = []
    for index, entry in enumerate(document.get("agents") or []):
        if isinstance(entry, str):
            entry = {"kind": entry}
        entry = dict(entry)
        entry.setdefault("sgld", sgld)
        if isinstance(entry["sgld"], dict):
            try:
                entry["sgld"] = dataclasses.replace(sgld, **entry["sgld"])
            except TypeError as e:
                raise ConfigError(f"agents[{index}].sgld: {e}") from e
        agents.append(_build(AgentConfig, entry, f"agents[{index}]"))
    return ExperimentConfig(agents=tuple(agents), **sections)


def apply_env_overrides(cfg: ExperimentConfig) -> ExperimentConfig:
    """Apply PRIORSIM_WORKERS and PRIORSIM_OUTPUT_DIR from the environment or a .env file."""
    load_dotenv()
    workers = os.getenv("PRIORSIM_WORKERS")
    output_dir = os.getenv("PRIORSIM_OUTPUT_DIR")
    try:
        workers = int(workers) if workers else None
    except ValueError as e:
        raise ConfigError(f"PRIORSIM_WORKERS must be an integer, got {workers!r}") from e
    return cfg.with_overrides(workers=workers, output_dir=output_dir or None)


def load_config(path: Union[str, Path], use_env: bool = True) -> ExperimentConfig:
    """Read a YAML experiment file.

    Args:
        path (Union[str, Path]): Config file.
        use_env (bool): Whether environment overrides apply.

    Returns:
        ExperimentConfig: The validated configuration.

    Raises:
        ConfigError: If the file is missing, unparsable or invalid.
    """
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file {str(path)!r} does not exist")
    try:
        document = yaml.safe_load(path.read_text(encoding="utf-8"))
    except yaml.YAMLError as e:
        raise ConfigError(f"{path}: {e}") from e
    cfg = parse_config(document)
    if use_env:
        cfg = apply_env_overrides(cfg)
    logger.info("Loaded config %s (%s)", path, cfg.digest()[:12])
    return cfg
