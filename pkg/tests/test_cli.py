import pandas as pd
import pytest
import yaml

from src.main import cli
from src.processor import read_records

BANDIT_CONFIG = {
    "experiment": {"name": "cli-bandit", "suite": "bandit", "episodes": 5, "tasks_per_distribution": 2},
    "env": {"family": "bandit", "K": 3},
    "tasks": {"source": "random-beta", "count": 2},
    "demos": {"count": 10},
    "prior": {"samples": 64, "iterations": 20},
    "sgld": {"steps": 3},
    "agents": ["expert-ts", "naive-ucb", "random"],
}


@pytest.fixture
def config_path(tmp_path, monkeypatch):
    monkeypatch.delenv("PRIORSIM_WORKERS", raising=False)
    monkeypatch.delenv("PRIORSIM_OUTPUT_DIR", raising=False)
    path = tmp_path / "bandit.yaml"
    path.write_text(yaml.safe_dump(BANDIT_CONFIG), encoding="utf-8")
    return path


def test_help_exits_cleanly():
    assert cli(["report", "--help"]) == 0


def test_missing_config_flag():
    assert cli(["run-bandit"]) == 1


def test_unknown_command():
    assert cli(["plot"]) == 1


def test_missing_config_file(tmp_path):
    assert cli(["run-bandit", "--config", str(tmp_path / "absent.yaml")]) == 1


def test_suite_mismatch(config_path, tmp_path):
    assert cli(["run-deepsea", "--config", str(config_path), "--out", str(tmp_path / "out")]) == 1


def test_negative_workers(config_path):
    assert cli(["run-bandit", "--config", str(config_path), "--workers", "0"]) == 1


def test_missing_records_file(tmp_path):
    assert cli(["report", "--records", str(tmp_path / "records.csv")]) == 2


def test_run_bandit_then_report(config_path, tmp_path, capsys):
    out = tmp_path / "out"
    assert cli(["run-bandit", "--config", str(config_path), "--out", str(out), "--seed", "3"]) == 0
    records = (out / "records.csv").read_text().splitlines()
    assert records[0] == "algo,task_dist_id,task_id,seed,episode,reward,instant_regret"
    assert len(records) == 1 + 3 * 2 * 2 * 5
    assert (out / "summary.csv").read_text().startswith("algo,group,episode,mean_cum_regret,stderr")
    assert (out / "records.json").is_file()

    assert cli(["report", "--records", str(out / "records.csv"), "--group-by", "distribution"]) == 0
    assert (out / "summary-distribution.csv").is_file()
    printed = capsys.readouterr().out
    assert "naive-ucb" in printed


def test_gen_demos_and_fit_prior(config_path, tmp_path, capsys):
    out = tmp_path / "priors"
    assert cli(["gen-demos", "--config", str(config_path), "--out", str(out)]) == 0
    assert sorted(p.name for p in out.glob("demos-*.jsonl")) == ["demos-0.jsonl", "demos-1.jsonl"]
    assert cli(["fit-prior", "--config", str(config_path), "--out", str(out)]) == 0
    assert (out / "prior-0.json").is_file()
    assert (out / "prior-1.fit.csv").is_file()
    assert "Σα" in capsys.readouterr().out


def test_unexpected_error_is_a_runtime_failure(config_path, tmp_path, monkeypatch):
    def broken(cfg, suite):
        raise ValueError("operands could not be broadcast together")

    monkeypatch.setattr("src.main.run_suite", broken)
    assert cli(["run-bandit", "--config", str(config_path), "--out", str(tmp_path / "out")]) == 2


def test_spooled_run_writes_the_same_files(config_path, tmp_path):
    plain, spooled = tmp_path / "plain", tmp_path / "spooled"
    assert cli(["run-bandit", "--config", str(config_path), "--out", str(plain)]) == 0

    document = yaml.safe_load(config_path.read_text(encoding="utf-8"))
    document["experiment"]["spool_records"] = True
    spooled_config = tmp_path / "spooled.yaml"
    spooled_config.write_text(yaml.safe_dump(document), encoding="utf-8")
    assert cli(["run-bandit", "--config", str(spooled_config), "--out", str(spooled)]) == 0

    assert (spooled / "records.csv").read_text() == (plain / "records.csv").read_text()
    assert not (spooled / ".parts").exists()
    pd.testing.assert_frame_equal(
        pd.read_csv(spooled / "summary.csv"), pd.read_csv(plain / "summary.csv")
    )
    assert len(read_records(spooled / "records.json")) == 3 * 2 * 2 * 5
