import json

import numpy as np
import pytest

from src.errors import DatasetError, DimensionError
from src.model import (
    DemoDataset,
    EnvSignature,
    OnlineHistory,
    RegretRecord,
    TaskKind,
    TaskParam,
    Trajectory,
    Transition,
    dataset_digest,
    read_demos,
    validate_dataset,
    write_demos,
)


def bandit_demos(actions, K=10):
    return DemoDataset(
        trajectories=tuple(Trajectory(steps=((0, a),)) for a in actions),
        env_signature=f"bandit:K={K}",
    )


class TestTaskParam:
    def test_bandit_means_must_lie_in_unit_interval(self):
        with pytest.raises(DimensionError):
            TaskParam(np.array([0.5, 1.2]))

    def test_qtable_entries_are_unbounded(self):
        theta = TaskParam(np.array([-3.0, 7.5]), kind=TaskKind.QTABLE)
        assert len(theta) == 2

    def test_non_finite_rejected(self):
        with pytest.raises(DimensionError):
            TaskParam(np.array([np.nan, 0.1]), kind=TaskKind.LINEAR)

    def test_values_are_read_only(self):
        theta = TaskParam([0.2, 0.4])
        with pytest.raises(ValueError):
            theta.values[0] = 0.3

    def test_equality_and_hash(self):
        a = TaskParam([0.2, 0.4])
        b = TaskParam(np.array([0.2, 0.4]))
        assert a == b
        assert hash(a) == hash(b)
        assert a != TaskParam([0.2, 0.4], kind=TaskKind.QTABLE)


class TestValidateDataset:
    def test_empty_dataset_is_ok_and_flagged(self):
        result = validate_dataset(DemoDataset.empty("bandit:K=3"), "bandit:K=3")
        assert result.ok
        assert result.empty

    def test_out_of_range_action(self):
        result = validate_dataset(bandit_demos([3], K=2), "bandit:K=2")
        assert not result.ok
        assert any("action 3 ≥ K=2" in error for error in result.errors)
        assert result.errors[0].startswith("trajectory 0")

    def test_large_valid_dataset(self):
        rng = np.random.default_rng(0)
        result = validate_dataset(bandit_demos(rng.integers(10, size=500)), "bandit:K=10")
        assert result.ok
        assert not result.empty

    def test_mismatched_signature(self):
        result = validate_dataset(bandit_demos([0]), "bandit:K=5")
        assert not result.ok
        assert "env signature" in result.errors[0]

    def test_heterogeneous_horizons(self):
        demos = DemoDataset(
            trajectories=(
                Trajectory(steps=((0, 1), (2, 1)), terminal=5),
                Trajectory(steps=((0, 1),), terminal=3),
            ),
            env_signature="deepsea:M=2",
        )
        result = validate_dataset(demos, "deepsea:M=2")
        assert not result.ok
        assert any("trajectory 1" in error for error in result.errors)


class TestDemoFile:
    def test_round_trip(self, tmp_path):
        demos = DemoDataset(
            trajectories=(
                Trajectory(steps=((0, 1), (3, 1)), terminal=5),
                Trajectory(steps=((0, 0), (2, 0)), terminal=4),
            ),
            env_signature="deepsea:M=2",
        )
        path = write_demos(demos, tmp_path / "demos.jsonl")
        assert read_demos(path) == demos
        assert dataset_digest(read_demos(path)) == dataset_digest(demos)

    def test_header_format(self, tmp_path):
        path = write_demos(bandit_demos([1, 2], K=3), tmp_path / "demos.jsonl")
        lines = path.read_text().splitlines()
        assert json.loads(lines[0]) == {"env": "bandit:K=3", "horizon": 1}
        assert json.loads(lines[1]) == {"steps": [[0, 1]]}

    def test_malformed_line(self, tmp_path):
        path = tmp_path / "bad.jsonl"
        path.write_text('{"env": "bandit:K=2", "horizon": 1}\n{"stops": []}\n')
        with pytest.raises(DatasetError, match=r"bad.jsonl:2:"):
            read_demos(path)

    def test_error_names_the_line_after_blank_lines(self, tmp_path):
        path = tmp_path / "gaps.jsonl"
        path.write_text('{"env": "bandit:K=2", "horizon": 1}\n\n{"steps": [[0, 1]]}\n\n{"steps": 3}\n')
        with pytest.raises(DatasetError, match=r"gaps.jsonl:5:"):
            read_demos(path)

    def test_missing_header(self, tmp_path):
        path = tmp_path / "empty.jsonl"
        path.write_text("")
        with pytest.raises(DatasetError):
            read_demos(path)


class TestEnvSignature:
    def test_parse_and_format(self):
        signature = EnvSignature.parse("deepsea:M=4")
        assert signature.n_states == 16
        assert signature.n_actions == 2
        assert signature.horizon == 4
        assert str(signature) == "deepsea:M=4"

    def test_unknown_family(self):
        with pytest.raises(DatasetError):
            EnvSignature.parse("gridworld:N=3")


class TestOnlineHistory:
    def test_arm_statistics(self):
        history = OnlineHistory().extend([Transition(0, 1, 1.0, 0, True)])
        history = history.extend([Transition(0, 1, 0.0, 0, True)])
        history = history.extend([Transition(0, 0, 1.0, 0, True)])
        successes, failures = history.arm_statistics(3)
        np.testing.assert_array_equal(successes, [1.0, 1.0, 0.0])
        np.testing.assert_array_equal(failures, [0.0, 1.0, 0.0])
        assert len(history) == 3

    def test_extend_does_not_mutate(self):
        history = OnlineHistory()
        history.extend([Transition(0, 0, 1.0, 0, True)])
        assert len(history) == 0

    def test_rewards_must_be_finite(self):
        with pytest.raises(DimensionError):
            OnlineHistory(episodes=((Transition(0, 0, float("inf"), 0, True),),))


class TestRegretRecord:
    def test_key_orders_by_run_then_episode(self):
        a = RegretRecord("ts", 0, 1, 0, 2, 0.1, 1.0)
        b = RegretRecord("ts", 0, 1, 0, 10, 0.1, 1.0)
        c = RegretRecord("ts", 0, 0, 0, 50, 0.1, 1.0)
        assert sorted([b, a, c], key=RegretRecord.key) == [c, a, b]
