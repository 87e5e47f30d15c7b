from src.model.domain import (
    DemoDataset,
    OnlineHistory,
    RegretRecord,
    TaskKind,
    TaskParam,
    Trajectory,
    Transition,
    ValidationResult,
)
from src.model.dataset import (
    EnvSignature,
    dataset_digest,
    read_demos,
    validate_dataset,
    write_demos,
)

__all__ = [
    "DemoDataset",
    "EnvSignature",
    "OnlineHistory",
    "RegretRecord",
    "TaskKind",
    "TaskParam",
    "Trajectory",
    "Transition",
    "ValidationResult",
    "dataset_digest",
    "read_demos",
    "validate_dataset",
    "write_demos",
]
