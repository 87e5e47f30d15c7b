import dataclasses
from pathlib import Path

import numpy as np
import pytest

from src.agents import AgentConfig, BaseAgent, RandomAgent
from src.config import TasksSection, load_config, parse_config
from src.envs import BernoulliBanditSpec, DeepSeaSpec, solve_deep_sea_q
from src.errors import ConfigError, OptimizationError, PriorSimError
from src.model import TaskParam
from src.processor import aggregate, episodes_to_threshold, sublinearity_ratio
from src.service import (
    BanditSuite,
    DeepSeaSuite,
    run_bandit_suite,
    run_deepsea_suite,
    run_episodes,
    sample_binned_distributions,
    suite_for,
)

CONFIG_DIR = Path(__file__).resolve().parent.parent / "configs"
SMALL_PRIOR = {"samples": 128, "iterations": 50}
SMALL_SGLD = {"step_size": 0.01, "steps": 5}


class FixedArmAgent(BaseAgent):
    def __init__(self, arm: int):
        super().__init__()
        self.arm = arm

    def act(self, state, rng):
        return self.arm


def bandit_config(tmp_path, agents, tasks=None, **experiment):
    return parse_config(
        {
            "experiment": {
                "suite": "bandit",
                "episodes": 20,
                "tasks_per_distribution": 2,
                "output_dir": str(tmp_path),
                **experiment,
            },
            "env": {"family": "bandit", "K": 2},
            "tasks": tasks or {"source": "random-beta", "count": 2},
            "demos": {"count": 20},
            "prior": SMALL_PRIOR,
            "sgld": SMALL_SGLD,
            "agents": agents,
        }
    )


def deepsea_config(tmp_path, agents, **experiment):
    return parse_config(
        {
            "experiment": {
                "suite": "deepsea",
                "episodes": 6,
                "seeds": 2,
                "output_dir": str(tmp_path),
                **experiment,
            },
            "env": {"family": "deepsea", "M": 4},
            "tasks": {"source": "goals", "goal_distributions": ["corner", "uniform"]},
            "demos": {"count": 10},
            "prior": SMALL_PRIOR,
            "sgld": {"steps": 5},
            "agents": agents,
        }
    )


class TestRunEpisodes:
    def test_point_mass_regret(self):
        env = BernoulliBanditSpec(2)
        task = TaskParam([1.0, 0.0])
        rng = np.random.default_rng(0)
        best = run_episodes(env, task, FixedArmAgent(0), 30, rng, np.random.default_rng(1))
        worst = run_episodes(env, task, FixedArmAgent(1), 30, rng, np.random.default_rng(1))
        assert sum(regret for _, regret in best) == 0.0
        assert sum(regret for _, regret in worst) == 30.0

    def test_bandit_regret_is_expected(self):
        env = BernoulliBanditSpec(3)
        task = TaskParam([0.2, 0.7, 0.5])
        results = run_episodes(
            env, task, FixedArmAgent(2), 10, np.random.default_rng(0), np.random.default_rng(0)
        )
        assert all(regret == pytest.approx(0.2) for _, regret in results)
        assert all(reward in (0.0, 1.0) for reward, _ in results)

    def test_deep_sea_regret_is_value_gap(self):
        env = DeepSeaSpec(5)
        task, value = solve_deep_sea_q(env, 4)
        results = run_episodes(
            env, task, RandomAgent(2), 20, np.random.default_rng(0), np.random.default_rng(1)
        )
        for reward, regret in results:
            assert reward + regret == pytest.approx(value)

    def test_random_agent_rarely_reaches_the_corner(self):
        env = DeepSeaSpec(10)
        task, _ = solve_deep_sea_q(env, 9)
        results = run_episodes(
            env, task, RandomAgent(2), 300, np.random.default_rng(3), np.random.default_rng(4)
        )
        assert np.mean([reward for reward, _ in results]) < 0.1


class TestSampleBinnedDistributions:
    def test_fills_every_bin_in_order(self):
        binned = sample_binned_distributions(
            3, 1, thresholds=(0.7, 0.95), seed=0, mc_samples=500, max_draws=2000
        )
        entropies = [value for _, value in binned]
        assert len(binned) == 3
        assert entropies[0] < 0.7 <= entropies[1] <= 0.95 < entropies[2]

    def test_gives_up(self):
        with pytest.raises(PriorSimError):
            sample_binned_distributions(3, 2, seed=0, mc_samples=100, max_draws=1)


class TestBanditSuite:
    def test_point_mass_cloning_has_zero_regret(self, tmp_path):
        cfg = bandit_config(
            tmp_path, ["bc"], tasks={"source": "point-mass", "point": [1.0, 0.0]}
        )
        report = run_bandit_suite(cfg, progress=False)
        assert len(report) == 2 * 20
        assert all(r.instant_regret == 0.0 for r in report.records)
        assert report.entropies == {0: 0.0}

    def test_records_and_metadata(self, tmp_path):
        cfg = bandit_config(tmp_path, ["expert-ts", "naive-ucb", "oracle-ts", "random"])
        report = BanditSuite(cfg).run(progress=False)
        assert len(report) == report.metadata["expected_records"] == 4 * 2 * 2 * 20
        assert report.metadata["failed_cells"] == []
        assert report.metadata["config_hash"] == cfg.digest()
        keys = [r.key() for r in report.records]
        assert keys == sorted(keys)
        assert len(set(keys)) == len(keys)
        for r in report.records:
            assert 0.0 <= r.instant_regret <= 1.0

    def test_same_records_for_any_worker_count(self, tmp_path):
        agents = ["expert-ts", "naive-ucb", "bc", "random"]
        one = BanditSuite(bandit_config(tmp_path, agents, workers=1)).run(progress=False)
        two = BanditSuite(bandit_config(tmp_path, agents, workers=2)).run(progress=False)
        assert one.records == two.records

    def test_failed_cells_are_reported(self, tmp_path):
        cfg = bandit_config(
            tmp_path, ["oracle-ts", "random"], tasks={"source": "point-mass", "point": [0.6, 0.4]}
        )
        report = run_bandit_suite(cfg, progress=False)
        assert len(report) == 2 * 20
        assert {r.algo for r in report.records} == {"random"}
        failed = report.metadata["failed_cells"]
        assert [f["algo"] for f in failed] == ["oracle-ts", "oracle-ts"]
        assert "UnsupportedError" in failed[0]["error"]

    def test_failed_distribution_does_not_stop_the_others(self, tmp_path, monkeypatch):
        fit = BanditSuite.fit

        def fit_or_fail(suite, demos, env, dist_id):
            if dist_id == 1:
                raise OptimizationError("dual objective is not finite", 3)
            return fit(suite, demos, env, dist_id)

        monkeypatch.setattr(BanditSuite, "fit", fit_or_fail)
        report = BanditSuite(bandit_config(tmp_path, ["expert-ts", "random"])).run(progress=False)

        assert {r.task_dist_id for r in report.records} == {0}
        assert len(report) == report.metadata["records_written"] == 2 * 2 * 20
        assert report.metadata["expected_records"] == 2 * 2 * 2 * 20
        failed = report.metadata["failed_cells"]
        assert sorted((f["algo"], f["task_id"]) for f in failed) == [
            ("expert-ts", 0), ("expert-ts", 1), ("random", 0), ("random", 1)
        ]
        assert all(f["task_dist_id"] == 1 for f in failed)
        assert all(f["error"].startswith("OptimizationError") for f in failed)
        assert list(report.entropies) == [0]
        assert set(report.labels) == {0, 1}

    def test_wrong_suite(self, tmp_path):
        cfg = deepsea_config(tmp_path, ["random"])
        with pytest.raises(ConfigError):
            run_bandit_suite(cfg, progress=False)


class TestDeepSeaSuite:
    def test_runs_and_labels(self, tmp_path):
        cfg = deepsea_config(
            tmp_path,
            [{"kind": "naive-bootdqn", "ensemble_size": 2, "gradient_steps": 2}, "random"],
        )
        report = run_deepsea_suite(cfg, progress=False)
        assert len(report) == report.metadata["expected_records"] == 2 * 2 * 2 * 6
        assert report.labels == {0: "corner", 1: "uniform"}
        assert report.entropies[0] == 0.0
        assert report.entropies[1] == pytest.approx(np.log(4))
        corner = [r for r in report.records if r.task_dist_id == 0]
        assert {r.task_id for r in corner} == {3}
        assert {r.seed for r in report.records} == {0, 1}

    def test_prior_agent(self, tmp_path):
        cfg = deepsea_config(
            tmp_path, [{"kind": "expert-bootdqn", "ensemble_size": 2, "gradient_steps": 1}]
        )
        suite = suite_for(cfg)
        assert isinstance(suite, DeepSeaSuite)
        report = suite.run(progress=False)
        assert report.metadata["failed_cells"] == []
        assert len(report) == 2 * 2 * 6

    def test_needs_goal_distributions(self, tmp_path):
        cfg = deepsea_config(tmp_path, ["random"])
        cfg = dataclasses.replace(cfg, tasks=TasksSection(source="random-beta"))
        with pytest.raises(ConfigError):
            DeepSeaSuite(cfg).distributions()


def scaled_binned_config(tmp_path, per_bin=4, **experiment):
    cfg = load_config(CONFIG_DIR / "bandit_binned.yaml", use_env=False)
    experiment = {"tasks_per_distribution": 8, "output_dir": str(tmp_path), **experiment}
    return dataclasses.replace(
        cfg,
        experiment=dataclasses.replace(cfg.experiment, **experiment),
        tasks=dataclasses.replace(cfg.tasks, per_bin=per_bin),
        agents=tuple(AgentConfig(kind) for kind in ("expert-ts", "naive-ts", "oracle-ts")),
    )


@pytest.mark.slow
class TestScaledBinnedBandits:
    @pytest.fixture(scope="class")
    def report(self, tmp_path_factory):
        cfg = scaled_binned_config(tmp_path_factory.mktemp("binned"), workers=4)
        return run_bandit_suite(cfg, progress=False)

    @staticmethod
    def final_by_bin(report):
        summary = aggregate(report, "entropy")
        final = summary[summary["episode"] == summary["episode"].max()]
        return final.set_index(["group", "algo"])["mean_cum_regret"]

    def test_expert_prior_beats_naive_in_every_bin(self, report):
        final = self.final_by_bin(report)
        for group in ("low", "medium", "high"):
            assert final[(group, "expert-ts")] <= final[(group, "naive-ts")]

    def test_gap_is_largest_at_low_entropy(self, report):
        final = self.final_by_bin(report)
        gaps = {g: final[(g, "naive-ts")] - final[(g, "expert-ts")] for g in ("low", "medium", "high")}
        assert gaps["low"] > gaps["medium"]
        assert gaps["low"] > gaps["high"]

    def test_regret_grows_sublinearly(self, report):
        assert sublinearity_ratio(report, "expert-ts", 150, 300) < 1.8
        assert sublinearity_ratio(report, "oracle-ts", 150, 300) < 1.8

    def test_records_do_not_depend_on_workers(self, tmp_path):
        cfg = scaled_binned_config(tmp_path, per_bin=1, episodes=20, tasks_per_distribution=2)
        one = run_bandit_suite(cfg.with_overrides(workers=1), progress=False)
        two = run_bandit_suite(cfg.with_overrides(workers=2), progress=False)
        assert one.records == two.records


@pytest.mark.slow
def test_expert_ensemble_reaches_the_goal_first(tmp_path):
    cfg = load_config(CONFIG_DIR / "deepsea_m10.yaml", use_env=False)
    cfg = dataclasses.replace(
        cfg,
        experiment=dataclasses.replace(
            cfg.experiment, episodes=150, seeds=3, workers=2, output_dir=str(tmp_path)
        ),
        tasks=dataclasses.replace(cfg.tasks, goal_distributions=("corner",)),
    )
    report = run_deepsea_suite(cfg, progress=False)
    expert = episodes_to_threshold(report, 0.8, "expert-bootdqn")
    naive = episodes_to_threshold(report, 0.8, "naive-bootdqn")
    assert expert is not None and expert <= 50
    assert naive is None or expert < naive
