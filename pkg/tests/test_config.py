import math
from pathlib import Path

import pytest

from constants import SGLD_STEP_SIZE_BANDIT, SGLD_STEP_SIZE_MDP
from src.config import ExperimentConfig, load_config, parse_config
from src.envs import BernoulliBanditSpec, DeepSeaSpec, LinearBanditSpec
from src.errors import ConfigError

CONFIG_DIR = Path(__file__).resolve().parent.parent / "configs"


def bandit_document(**sections):
    document = {
        "experiment": {"suite": "bandit", "episodes": 10},
        "env": {"family": "bandit", "K": 3},
        "agents": ["naive-ucb", "random"],
    }
    document.update(sections)
    return document


class TestParseConfig:
    def test_minimal_bandit(self):
        cfg = parse_config(bandit_document())
        assert [agent.name for agent in cfg.agents] == ["naive-ucb", "random"]
        assert cfg.demos.beta == math.inf
        assert isinstance(cfg.build_env(), BernoulliBanditSpec)
        assert cfg.sgld_config().step_size == SGLD_STEP_SIZE_BANDIT

    def test_deepsea_defaults(self):
        cfg = parse_config(
            {
                "experiment": {"suite": "deepsea"},
                "env": {"family": "deepsea", "M": 6},
                "tasks": {"source": "goals", "goal_distributions": ["corner", "uniform"]},
                "agents": [{"kind": "naive-bootdqn", "ensemble_size": 2}],
            }
        )
        env = cfg.build_env()
        assert isinstance(env, DeepSeaSpec)
        assert env.move_cost == pytest.approx(0.01 / 6)
        assert cfg.agents[0].ensemble_size == 2
        assert cfg.agents[0].sgld.step_size == SGLD_STEP_SIZE_MDP
        assert cfg.tasks.goal_distributions == ("corner", "uniform")

    def test_linear_bandit_env(self):
        cfg = parse_config(bandit_document(env={"family": "linear", "K": 4, "d": 2, "contexts": 3}))
        env = cfg.build_env()
        assert isinstance(env, LinearBanditSpec)
        assert env.features.shape == (3, 4, 2)

    def test_agent_sgld_override(self):
        cfg = parse_config(
            bandit_document(agents=[{"kind": "naive-ts", "sgld": {"steps": 7}}], sgld={"steps": 40})
        )
        assert cfg.agents[0].sgld.steps == 7

    def test_original_kind_names_load(self):
        cfg = parse_config(bandit_document(agents=["experior-ts", "naive-ts"]))
        assert [agent.kind for agent in cfg.agents] == ["expert-ts", "naive-ts"]
        deepsea = parse_config(
            {
                "experiment": {"suite": "deepsea"},
                "env": {"family": "deepsea", "M": 4},
                "tasks": {"source": "goals", "goal_distributions": ["corner"]},
                "agents": [{"kind": "experior-bootdqn", "ensemble_size": 2}],
            }
        )
        assert deepsea.agents[0].name == "expert-bootdqn"

    def test_agent_label(self):
        cfg = parse_config(bandit_document(agents=[{"kind": "naive-ucb", "label": "ucb1"}]))
        assert cfg.agents[0].name == "ucb1"

    @pytest.mark.parametrize(
        "document",
        [
            bandit_document(agents=[]),
            bandit_document(agents=["naive-bootdqn"]),
            bandit_document(agents=["naive-ucb", "naive-ucb"]),
            bandit_document(env={"family": "deepsea"}),
            bandit_document(experiment={"suite": "grid"}),
            bandit_document(experiment={"episodes": 0}),
            bandit_document(tasks={"source": "catalog"}),
            bandit_document(tasks={"goal_distributions": ["left"]}),
            bandit_document(demos={"count": 0}),
            bandit_document(demos={"beta": -1}),
            bandit_document(prior={"lambda_star": -1.0}),
            bandit_document(prior={"beta_eff": float("inf")}),
            bandit_document(prior={"epsilon": 0.1}),
            bandit_document(agents=[{"kind": "naive-ts", "sgld": {"burn_in": 5}}]),
            bandit_document(reporting={"plots": True}),
        ],
    )
    def test_invalid(self, document):
        with pytest.raises(ConfigError):
            parse_config(document)

    def test_top_level_must_be_a_mapping(self):
        with pytest.raises(ConfigError):
            parse_config(["agents"])


class TestOverridesAndDigest:
    def test_overrides(self):
        cfg = parse_config(bandit_document())
        changed = cfg.with_overrides(seed=5, workers=3, output_dir="out")
        assert (changed.experiment.seed, changed.experiment.workers) == (5, 3)
        assert changed.experiment.output_dir == "out"
        assert cfg.with_overrides() is cfg

    def test_digest_ignores_where_results_go(self):
        cfg = parse_config(bandit_document())
        assert cfg.digest() == cfg.with_overrides(workers=4, output_dir="elsewhere").digest()
        assert cfg.digest() != cfg.with_overrides(seed=1).digest()


class TestLoadConfig:
    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError):
            load_config(tmp_path / "absent.yaml")

    def test_bad_yaml(self, tmp_path):
        path = tmp_path / "bad.yaml"
        path.write_text("experiment: [unclosed", encoding="utf-8")
        with pytest.raises(ConfigError):
            load_config(path)

    def test_environment_overrides(self, tmp_path, monkeypatch):
        monkeypatch.setenv("PRIORSIM_WORKERS", "3")
        monkeypatch.setenv("PRIORSIM_OUTPUT_DIR", str(tmp_path / "env-out"))
        cfg = load_config(CONFIG_DIR / "smoke_bandit.yaml")
        assert cfg.experiment.workers == 3
        assert cfg.experiment.output_dir == str(tmp_path / "env-out")

    def test_bad_worker_override(self, monkeypatch):
        monkeypatch.setenv("PRIORSIM_WORKERS", "many")
        with pytest.raises(ConfigError):
            load_config(CONFIG_DIR / "smoke_bandit.yaml")

    @pytest.mark.parametrize("name", sorted(p.name for p in CONFIG_DIR.glob("*.yaml")))
    def test_shipped_configs_parse(self, name, monkeypatch):
        monkeypatch.delenv("PRIORSIM_WORKERS", raising=False)
        monkeypatch.delenv("PRIORSIM_OUTPUT_DIR", raising=False)
        cfg = load_config(CONFIG_DIR / name, use_env=False)
        assert isinstance(cfg, ExperimentConfig)
        cfg.build_env()
