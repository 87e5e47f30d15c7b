from src.processor.emit import (
    BaseReportWriter,
    CsvReportWriter,
    JsonReportWriter,
    RecordSpool,
    emit,
    emit_spooled,
    read_records,
    summary_paths,
    writer_for,
)
from src.processor.report import (
    EntropyRegression,
    RegretReport,
    RunningSummary,
    aggregate,
    cumulative_regret,
    entropy_bin,
    entropy_label,
    episodes_to_threshold,
    final_regrets,
    mean_reward,
    regression_summary,
    regret_at,
    regret_vs_arms,
    regret_vs_entropy,
    sublinearity_ratio,
)

__all__ = [
    "BaseReportWriter",
    "CsvReportWriter",
    "EntropyRegression",
    "JsonReportWriter",
    "RecordSpool",
    "RegretReport",
    "RunningSummary",
    "aggregate",
    "cumulative_regret",
    "emit",
    "emit_spooled",
    "entropy_bin",
    "entropy_label",
    "episodes_to_threshold",
    "final_regrets",
    "mean_reward",
    "read_records",
    "regression_summary",
    "regret_at",
    "regret_vs_arms",
    "regret_vs_entropy",
    "sublinearity_ratio",
    "summary_paths",
    "writer_for",
]
