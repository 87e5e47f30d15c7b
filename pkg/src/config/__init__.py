from src.config.experiment import (
    DemosSection,
    EnvSection,
    ExperimentConfig,
    ExperimentSection,
    PriorSection,
    SgldSection,
    TasksSection,
    apply_env_overrides,
    load_config,
    parse_config,
    sgld_config,
)

__all__ = [
    "DemosSection",
    "EnvSection",
    "ExperimentConfig",
    "ExperimentSection",
    "PriorSection",
    "SgldSection",
    "TasksSection",
    "apply_env_overrides",
    "load_config",
    "parse_config",
    "sgld_config",
]
