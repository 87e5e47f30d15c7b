import hashlib
import json
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Union

from src.errors import DatasetError
from src.model.domain import DemoDataset, Trajectory, ValidationResult

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class EnvSignature:
    """Parsed environment identifier such as ``bandit:K=10`` or ``deepsea:M=30``."""

    kind: str
    params: Dict[str, int]

    @classmethod
    def parse(cls, signature: str) -> "EnvSignature":
        """Parse a signature string.

        Args:
            signature (str): Text of the form ``kind:key=value,key=value``.

        Returns:
            EnvSignature: The parsed signature.

        Raises:
            DatasetError: If the text cannot be parsed.
        """
        try:
            kind, _, body = signature.partition(":")
            params = {}
            for item in filter(None, body.split(",")):
                key, value = item.split("=")
                params[key.strip()] = int(value)
        except ValueError as e:
            raise DatasetError(f"malformed env signature {signature!r}") from e
        if kind not in ("bandit", "deepsea", "linear"):
            raise DatasetError(f"unknown environment family {kind!r}")
        return cls(kind=kind, params=params)

    def __str__(self) -> str:
        body = ",".join(f"{k}={v}" for k, v in self.params.items())
        return f"{self.kind}:{body}"

    @property
    def n_states(self) -> int:
        if self.kind == "bandit":
            return 1
        if self.kind == "deepsea":
            return self.params["M"] ** 2
        return self.params["contexts"]

    @property
    def n_actions(self) -> int:
        return 2 if self.kind == "deepsea" else self.params["K"]

    @property
    def horizon(self) -> int:
        return self.params["M"] if self.kind == "deepsea" else 1

    @property
    def n_terminal_ids(self) -> int:
        """Upper bound (exclusive) on ids allowed in the terminal field."""
        if self.kind == "deepsea":
            return (self.params["M"] + 1) * self.params["M"]
        return self.n_states


def validate_dataset(demos: DemoDataset, env_signature: str) -> ValidationResult:
    """Check a demonstration dataset against an environment signature.

    Args:
        demos (DemoDataset): Dataset to check.
        env_signature (str): Signature of the environment the demos must fit.

    Returns:
        ValidationResult: ``ok`` when every invariant holds, otherwise the list
            of violations, each prefixed with the trajectory index.
    """
    if len(demos) == 0:
        return ValidationResult(ok=True, errors=(), empty=True)

    errors: List[str] = []
    if demos.env_signature != env_signature:
        errors.append(
            f"dataset: env signature {demos.env_signature!r} != {env_signature!r}"
        )

    try:
        signature = EnvSignature.parse(env_signature)
    except DatasetError as e:
        return ValidationResult(ok=False, errors=tuple(errors + [str(e)]))

    n_states = signature.n_states
    n_actions = signature.n_actions
    expected_horizon = signature.horizon
    first_horizon = demos[0].horizon

    for index, trajectory in enumerate(demos):
        if trajectory.horizon < 1:
            errors.append(f"trajectory {index}: empty trajectory")
            continue
        if trajectory.horizon != first_horizon:
            errors.append(
                f"trajectory {index}: horizon {trajectory.horizon} != {first_horizon}"
            )
        if trajectory.horizon != expected_horizon:
            errors.append(
                f"trajectory {index}: horizon {trajectory.horizon} "
                f"does not match environment horizon {expected_horizon}"
            )
        for step, (state, action) in enumerate(trajectory.steps):
            if not 0 <= state < n_states:
                errors.append(
                    f"trajectory {index} step {step}: state {state} out of range"
                )
            if not 0 <= action < n_actions:
                label = "K" if signature.kind != "deepsea" else "|A|"
                errors.append(
                    f"trajectory {index} step {step}: "
                    f"action {action} ≥ {label}={n_actions}"
                )
        terminal = trajectory.terminal
        if terminal is not None and not 0 <= terminal < signature.n_terminal_ids:
            errors.append(f"trajectory {index}: terminal state {terminal} out of range")

    return ValidationResult(ok=not errors, errors=tuple(errors))


def write_demos(demos: DemoDataset, path: Union[str, Path]) -> Path:
    """Write a dataset as line-oriented JSON: one header line, one line per trajectory.

    Args:
        demos (DemoDataset): Dataset to write.
        path (Union[str, Path]): Destination file.

    Returns:
        Path: The written file.
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8") as f:
        header = {"env": demos.env_signature, "horizon": demos.horizon}
        f.write(json.dumps(header) + "\n")
        for trajectory in demos:
            line = {"steps": [list(step) for step in trajectory.steps]}
            if trajectory.terminal is not None:
                line["terminal"] = trajectory.terminal
            f.write(json.dumps(line) + "\n")
    logger.info("Wrote %d demonstrations to %s", len(demos), path)
    return path


def read_demos(path: Union[str, Path]) -> DemoDataset:
    """Read a dataset written by `write_demos`.

    Args:
        path (Union[str, Path]): Demo file.

    Returns:
        DemoDataset: The parsed dataset.

    Raises:
        DatasetError: On a missing header or a malformed line.
    """
    path = Path(path)
    with path.open("r", encoding="utf-8") as f:
        lines = [(n, line) for n, line in enumerate(f.read().splitlines(), start=1) if line.strip()]
    if not lines:
        raise DatasetError(f"{path}: missing header line")

    trajectories = []
    number = lines[0][0]
    try:
        signature = json.loads(lines[0][1])["env"]
        for number, line in lines[1:]:
            record = json.loads(line)
            trajectories.append(
                Trajectory(
                    steps=tuple(tuple(step) for step in record["steps"]),
                    terminal=record.get("terminal"),
                )
            )
    except (KeyError, TypeError, ValueError) as e:
        raise DatasetError(f"{path}:{number}: malformed demo line ({e})") from e

    return DemoDataset(trajectories=tuple(trajectories), env_signature=signature)


def dataset_digest(demos: DemoDataset) -> str:
    """SHA-256 over the canonical line encoding of a dataset."""
    digest = hashlib.sha256(demos.env_signature.encode("utf-8"))
    for trajectory in demos:
        digest.update(json.dumps([trajectory.steps, trajectory.terminal]).encode())
    return digest.hexdigest()
