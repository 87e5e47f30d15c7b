import math
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Mapping, Optional, Tuple

import numpy as np
import pandas as pd
from scipy import stats

from constants import ENTROPY_THRESHOLDS, RECORD_COLUMNS, SUMMARY_COLUMNS
from src.errors import DimensionError, PriorSimError
from src.model import RegretRecord

LOW, MEDIUM, HIGH = "low", "medium", "high"
SMOOTHING_WINDOW = 20


@dataclass
class RegretReport:
    """Per-episode regret records plus run metadata.

    Metadata keys used downstream: ``config_hash``, ``version``,
    ``entropies`` (distribution id → nats), ``labels`` (distribution id → name),
    ``expected_records`` and ``failed_cells``.
    """

    records: List[RegretRecord] = field(default_factory=list)
    metadata: Dict = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.records)

    def to_frame(self) -> pd.DataFrame:
        rows = [
            (r.algo, r.task_dist_id, r.task_id, r.seed, r.episode, r.reward, r.instant_regret)
            for r in sorted(self.records, key=RegretRecord.key)
        ]
        frame = pd.DataFrame(rows, columns=list(RECORD_COLUMNS))
        return frame.astype(
            {"task_dist_id": int, "task_id": int, "seed": int, "episode": int,
             "reward": float, "instant_regret": float}
        )

    @classmethod
    def from_frame(cls, frame: pd.DataFrame, metadata: Optional[Dict] = None) -> "RegretReport":
        missing = [c for c in RECORD_COLUMNS if c not in frame.columns]
        if missing:
            raise PriorSimError(f"record table lacks columns {missing}")
        records = [
            RegretRecord(
                algo=str(row.algo),
                task_dist_id=int(row.task_dist_id),
                task_id=int(row.task_id),
                seed=int(row.seed),
                episode=int(row.episode),
                instant_regret=float(row.instant_regret),
                reward=float(row.reward),
            )
            for row in frame.itertuples(index=False)
        ]
        return cls(records=records, metadata=dict(metadata or {}))

    @property
    def entropies(self) -> Dict[int, float]:
        return {int(k): float(v) for k, v in self.metadata.get("entropies", {}).items()}

    @property
    def labels(self) -> Dict[int, str]:
        return {int(k): str(v) for k, v in self.metadata.get("labels", {}).items()}


def entropy_label(entropy: float, thresholds: Tuple[float, float] = ENTROPY_THRESHOLDS) -> str:
    """Bin an optimal-action entropy: below the first threshold is low, above the second high."""
    low, high = thresholds
    if entropy < low:
        return LOW
    if entropy > high:
        return HIGH
    return MEDIUM


def entropy_bin(
    report: RegretReport, thresholds: Tuple[float, float] = ENTROPY_THRESHOLDS
) -> Dict[int, str]:
    """Entropy bin of every task distribution in the report's metadata.

    Raises:
        PriorSimError: If the report carries no entropies.
    """
    entropies = report.entropies
    if not entropies:
        raise PriorSimError("report metadata has no distribution entropies")
    return {dist: entropy_label(value, thresholds) for dist, value in entropies.items()}


def cumulative_regret(frame: pd.DataFrame) -> pd.DataFrame:
    """Add `cum_regret`, the running sum of instant regret per run."""
    frame = frame.sort_values(["algo", "task_dist_id", "task_id", "seed", "episode"])
    runs = frame.groupby(["algo", "task_dist_id", "task_id", "seed"], sort=True)
    return frame.assign(cum_regret=runs["instant_regret"].cumsum())


def _groups(
    report: RegretReport, group_by: str, dists: Optional[Iterable[int]] = None
) -> Mapping[int, str]:
    if dists is None:
        dists = {r.task_dist_id for r in report.records}
    dists = sorted(dists)
    if group_by == "all":
        return {d: "all" for d in dists}
    if group_by == "entropy":
        bins = entropy_bin(report)
        return {d: bins[d] for d in dists}
    if group_by == "label":
        labels = report.labels
        return {d: labels.get(d, str(d)) for d in dists}
    if group_by == "distribution":
        return {d: str(d) for d in dists}
    raise DimensionError(f"unknown grouping {group_by!r}")


def aggregate(report: RegretReport, group_by: str = "all") -> pd.DataFrame:
    """Mean cumulative regret with its standard error per algorithm, group and episode.

    Cumulative regret is averaged over tasks and seeds within a distribution,
    then over the distributions of a group. The standard error is taken across
    distributions when a group has several, otherwise across its runs.

    Args:
        report (RegretReport): Records to summarize.
        group_by (str): ``all``, ``entropy``, ``label`` or ``distribution``.

    Returns:
        pd.DataFrame: Columns ``algo,group,episode,mean_cum_regret,stderr``.

    Raises:
        PriorSimError: On an empty report.
    """
    if not report.records:
        raise PriorSimError("cannot aggregate an empty report")
    frame = cumulative_regret(report.to_frame())
    frame["group"] = frame["task_dist_id"].map(_groups(report, group_by))

    per_dist = (
        frame.groupby(["algo", "group", "task_dist_id", "episode"], sort=True)["cum_regret"]
        .agg(["mean", "count"])
        .reset_index()
    )
    rows = []
    for (algo, group, episode), block in per_dist.groupby(["algo", "group", "episode"], sort=True):
        if len(block) > 1:
            values = block["mean"].to_numpy()
        else:
            dist = block["task_dist_id"].iloc[0]
            mask = (
                (frame["algo"] == algo)
                & (frame["task_dist_id"] == dist)
                & (frame["episode"] == episode)
            )
            values = frame.loc[mask, "cum_regret"].to_numpy()
        stderr = float(stats.sem(values)) if len(values) > 1 else 0.0
        rows.append((algo, group, int(episode), float(values.mean()), stderr))
    return pd.DataFrame(rows, columns=list(SUMMARY_COLUMNS))


class RunningSummary:
    """Cumulative-regret sums per (algorithm, distribution), filled one run at a time.

    Holds three arrays of length T per pair instead of the records themselves,
    and summarizes to the same table as `aggregate`.
    """

    def __init__(self):
        self._sums: Dict[Tuple[str, int], np.ndarray] = {}
        self._squares: Dict[Tuple[str, int], np.ndarray] = {}
        self._counts: Dict[Tuple[str, int], int] = {}

    def __len__(self) -> int:
        return sum(self._counts.values())

    def add(self, run: List[RegretRecord]) -> None:
        """Add the records of one run, a single (algo, distribution, task, seed).

        Raises:
            DimensionError: If the run's length differs from earlier runs of the pair.
        """
        if not run:
            return
        run = sorted(run, key=RegretRecord.key)
        curve = np.cumsum([r.instant_regret for r in run])
        key = (run[0].algo, run[0].task_dist_id)
        if key not in self._sums:
            self._sums[key] = np.zeros_like(curve)
            self._squares[key] = np.zeros_like(curve)
            self._counts[key] = 0
        if self._sums[key].shape != curve.shape:
            raise DimensionError(
                f"run of {key} has {curve.size} episodes, earlier runs {self._sums[key].size}"
            )
        self._sums[key] += curve
        self._squares[key] += curve**2
        self._counts[key] += 1

    def aggregate(self, metadata: Optional[Dict] = None, group_by: str = "all") -> pd.DataFrame:
        """The `aggregate` table of every run added so far.

        Args:
            metadata (Optional[Dict]): Report metadata with entropies and labels.
            group_by (str): One of ``all``, ``entropy``, ``label`` or ``distribution``.

        Returns:
            pd.DataFrame: Columns ``algo,group,episode,mean_cum_regret,stderr``.
        """
        if not self._counts:
            return pd.DataFrame(columns=list(SUMMARY_COLUMNS))
        groups = _groups(
            RegretReport(metadata=dict(metadata or {})),
            group_by,
            {dist for _, dist in self._sums},
        )
        members: Dict[Tuple[str, str], List[int]] = {}
        for algo, dist in self._sums:
            members.setdefault((algo, groups[dist]), []).append(dist)

        rows = []
        for (algo, group), dists in sorted(members.items()):
            if len(dists) > 1:
                means = np.stack([self._sums[(algo, d)] / self._counts[(algo, d)] for d in dists])
                mean, stderr = means.mean(axis=0), stats.sem(means, axis=0)
            else:
                key = (algo, dists[0])
                n, total = self._counts[key], self._sums[key]
                mean = total / n
                if n > 1:
                    variance = np.maximum(self._squares[key] - total**2 / n, 0.0) / (n - 1)
                    stderr = np.sqrt(variance / n)
                else:
                    stderr = np.zeros_like(mean)
            for episode, (m, s) in enumerate(zip(mean, stderr), start=1):
                rows.append((algo, group, episode, float(m), float(s)))
        return pd.DataFrame(rows, columns=list(SUMMARY_COLUMNS))


def final_regrets(report: RegretReport, algo: Optional[str] = None) -> pd.DataFrame:
    """Mean final cumulative regret per (algo, distribution)."""
    frame = cumulative_regret(report.to_frame())
    if algo is not None:
        frame = frame[frame["algo"] == algo]
    last = frame.groupby(["algo", "task_dist_id", "task_id", "seed"]).tail(1)
    return last.groupby(["algo", "task_dist_id"])["cum_regret"].mean().reset_index()


@dataclass(frozen=True)
class EntropyRegression:
    """Relation of final regret to entropy across distributions."""

    slope: float
    intercept: float
    pearson: float
    spearman: float
    degenerate: bool = False


def regression_summary(entropies: Iterable[float], regrets: Iterable[float]) -> EntropyRegression:
    """Least-squares line and correlations of regret against entropy.

    Constant regrets give slope 0 with undefined correlations flagged as
    degenerate.

    Raises:
        DimensionError: With fewer than 3 points or constant entropies.
    """
    x = np.asarray(list(entropies), dtype=float)
    y = np.asarray(list(regrets), dtype=float)
    if x.shape != y.shape or x.size < 3:
        raise DimensionError("need at least 3 (entropy, regret) pairs")
    if np.ptp(x) == 0:
        raise DimensionError("entropies have zero variance")
    if np.ptp(y) == 0:
        return EntropyRegression(0.0, float(y[0]), math.nan, math.nan, degenerate=True)
    fit = stats.linregress(x, y)
    rho = stats.spearmanr(x, y).statistic
    return EntropyRegression(float(fit.slope), float(fit.intercept), float(fit.rvalue), float(rho))


def regret_vs_entropy(report: RegretReport, algo: Optional[str] = None) -> EntropyRegression:
    """Regress mean final cumulative regret on distribution entropy.

    Args:
        report (RegretReport): Report with entropy metadata.
        algo (Optional[str]): Algorithm to use; required if several are present.
    """
    finals = final_regrets(report, algo)
    if finals["algo"].nunique() != 1:
        raise DimensionError("pick one algorithm for the entropy regression")
    entropies = report.entropies
    missing = sorted(set(int(d) for d in finals["task_dist_id"]) - set(entropies))
    if missing:
        raise DimensionError(f"no entropy recorded for distributions {missing}")
    return regression_summary(
        [entropies[int(d)] for d in finals["task_dist_id"]], finals["cum_regret"]
    )


def regret_at(report: RegretReport, episode: int, algo: str) -> float:
    """Mean cumulative regret of `algo` at `episode`, averaged over distributions."""
    frame = cumulative_regret(report.to_frame())
    frame = frame[(frame["algo"] == algo) & (frame["episode"] == episode)]
    if frame.empty:
        raise DimensionError(f"no records for {algo!r} at episode {episode}")
    return float(frame.groupby("task_dist_id")["cum_regret"].mean().mean())


def sublinearity_ratio(report: RegretReport, algo: str, short: int, long: int) -> float:
    """Ratio of cumulative regret at episode `long` to that at episode `short`."""
    return regret_at(report, long, algo) / regret_at(report, short, algo)


def regret_vs_arms(reports: Mapping[int, RegretReport], algo: str) -> pd.DataFrame:
    """Final mean cumulative regret of `algo` for each number of arms K."""
    rows = []
    for K in sorted(reports):
        report = reports[K]
        last = max(r.episode for r in report.records)
        rows.append((K, regret_at(report, last, algo)))
    return pd.DataFrame(rows, columns=["K", "final_cum_regret"])


def episodes_to_threshold(
    report: RegretReport,
    fraction: float,
    algo: str,
    task_dist_id: Optional[int] = None,
    window: int = SMOOTHING_WINDOW,
) -> Optional[int]:
    """First episode whose smoothed mean reward reaches `fraction` of V*.

    Rewards are averaged over seeds, then smoothed with a trailing window;
    V* per record is reward plus instant regret.

    Returns:
        Optional[int]: The episode, or None if the threshold is never reached.
    """
    frame = report.to_frame()
    frame = frame[frame["algo"] == algo]
    if task_dist_id is not None:
        frame = frame[frame["task_dist_id"] == task_dist_id]
    if frame.empty:
        raise DimensionError(f"no records for {algo!r}")
    frame = frame.assign(optimal=frame["reward"] + frame["instant_regret"])
    per_episode = frame.groupby("episode")[["reward", "optimal"]].mean()
    smoothed = per_episode["reward"].rolling(window, min_periods=1).mean()
    reached = smoothed >= fraction * per_episode["optimal"]
    hits = per_episode.index[reached.to_numpy()]
    return int(hits[0]) if len(hits) else None


def mean_reward(report: RegretReport, algo: str, first: int, last: int, task_dist_id: Optional[int] = None) -> float:
    """Mean per-episode reward of `algo` over episodes first..last inclusive."""
    frame = report.to_frame()
    mask = (frame["algo"] == algo) & frame["episode"].between(first, last)
    if task_dist_id is not None:
        mask &= frame["task_dist_id"] == task_dist_id
    return float(frame.loc[mask, "reward"].mean())
