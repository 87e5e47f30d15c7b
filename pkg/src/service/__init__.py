from src.service.suites import (
    BanditSuite,
    BaseSuite,
    DeepSeaSuite,
    DistributionContext,
    SuiteCell,
    run_bandit_suite,
    run_cell,
    run_deepsea_suite,
    run_episodes,
    sample_binned_distributions,
    suite_for,
)

__all__ = [
    "BanditSuite",
    "BaseSuite",
    "DeepSeaSuite",
    "DistributionContext",
    "SuiteCell",
    "run_bandit_suite",
    "run_cell",
    "run_deepsea_suite",
    "run_episodes",
    "sample_binned_distributions",
    "suite_for",
]
