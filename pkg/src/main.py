import argparse
import logging
import os
import sys
from pathlib import Path
from typing import List, Optional

from dotenv import load_dotenv

from src.config import ExperimentConfig, load_config
from src.errors import ConfigError, DimensionError, PriorSimError
from src.maxent import save_prior
from src.model import write_demos
from src.processor import (
    RecordSpool,
    aggregate,
    emit,
    emit_spooled,
    read_records,
    regret_vs_entropy,
)
from src.service import run_bandit_suite, run_deepsea_suite, suite_for

logger = logging.getLogger("src.main")

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_RUNTIME = 2
LOG_FORMAT = "%(asctime)s %(levelname)s %(name)s: %(message)s"


class UsageError(Exception):
    pass


class ArgumentParser(argparse.ArgumentParser):
    """Parser whose usage errors raise instead of exiting with status 2."""

    def error(self, message: str):
        raise UsageError(f"{self.prog}: error: {message}")


def configure_logging() -> None:
    """Configure the root logger from PRIORSIM_LOG_LEVEL."""
    load_dotenv()
    level = os.getenv("PRIORSIM_LOG_LEVEL", "INFO").upper()
    logging.basicConfig(level=getattr(logging, level, logging.INFO), format=LOG_FORMAT)


def build_parser() -> ArgumentParser:
    parser = ArgumentParser(
        prog="prior-sim",
        description="Expert-prior posterior sampling simulator.",
    )
    commands = parser.add_subparsers(dest="command", required=True, parser_class=ArgumentParser)

    def add_run_flags(sub: ArgumentParser) -> None:
        sub.add_argument("--config", required=True, help="YAML experiment config")
        sub.add_argument("--seed", type=int, help="master seed, overrides the config")
        sub.add_argument("--workers", type=int, help="worker processes, overrides the config")
        sub.add_argument("--out", help="output directory, overrides the config")

    add_run_flags(commands.add_parser("gen-demos", help="generate expert demonstrations"))
    add_run_flags(commands.add_parser("fit-prior", help="fit the max-entropy expert prior"))
    add_run_flags(commands.add_parser("run-bandit", help="run the bandit regret suite"))
    add_run_flags(commands.add_parser("run-deepsea", help="run the Deep Sea suite"))

    report = commands.add_parser("report", help="summarize a records file")
    report.add_argument("--records", required=True, help="records.csv or records.json")
    report.add_argument(
        "--group-by",
        default="all",
        choices=("all", "entropy", "label", "distribution"),
        help="grouping of the summary table",
    )
    report.add_argument("--out", help="directory for the summary CSV")
    return parser


def load(args: argparse.Namespace) -> ExperimentConfig:
    cfg = load_config(args.config)
    if args.workers is not None and args.workers < 1:
        raise ConfigError("--workers must be at least 1")
    return cfg.with_overrides(seed=args.seed, workers=args.workers, output_dir=args.out)


def gen_demos(cfg: ExperimentConfig) -> None:
    """Write one demonstration file per task distribution."""
    suite = suite_for(cfg)
    out_dir = Path(cfg.experiment.output_dir)
    for dist_id, (dist, env, label, _) in enumerate(suite.distributions()):
        demos = suite.load_demos(env, dist, dist_id)
        path = write_demos(demos, out_dir / f"demos-{dist_id}.jsonl")
        print(f"{label}: {len(demos)} demonstrations -> {path}")


def fit_priors(cfg: ExperimentConfig) -> None:
    """Fit and save one prior per task distribution."""
    suite = suite_for(cfg)
    out_dir = Path(cfg.experiment.output_dir)
    for dist_id, (dist, env, label, _) in enumerate(suite.distributions()):
        demos = suite.load_demos(env, dist, dist_id)
        prior = suite.fit(demos, env, dist_id)
        path = save_prior(prior, out_dir / f"prior-{dist_id}.json")
        print(f"{label}: Σα = {prior.alpha.sum():.4f}, dual = {prior.report.dual_value:.6f} -> {path}")


def run_suite(cfg: ExperimentConfig, suite: str) -> None:
    if cfg.experiment.suite != suite:
        raise ConfigError(f"--config describes a {cfg.experiment.suite} suite, not {suite}")
    if suite == "bandit":
        run, group_by = run_bandit_suite, "entropy"
    else:
        run, group_by = run_deepsea_suite, "label"
    out_dir = cfg.experiment.output_dir
    if cfg.experiment.spool_records:
        spool = RecordSpool(out_dir)
        report = run(cfg, spool=spool)
        emit_spooled(spool, report.metadata, group_by)
    else:
        report = run(cfg)
        emit(report, out_dir, group_by=group_by)
    failed = report.metadata.get("failed_cells", [])
    print(f"{report.metadata['records_written']} records written to {out_dir}")
    if failed:
        raise PriorSimError(f"{len(failed)} cells failed; see the log and records.json")


def summarize(args: argparse.Namespace) -> None:
    report = read_records(args.records)
    summary = aggregate(report, args.group_by)
    out_dir = Path(args.out) if args.out else Path(args.records).parent
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / f"summary-{args.group_by}.csv"
    summary.to_csv(path, index=False, lineterminator="\n")
    final = summary.sort_values("episode").groupby(["algo", "group"]).tail(1)
    print(final.to_string(index=False))
    if report.entropies:
        for algo in sorted({record.algo for record in report.records}):
            try:
                fit = regret_vs_entropy(report, algo)
            except DimensionError as e:
                logger.info("No entropy regression for %s: %s", algo, e)
                continue
            flag = " (degenerate)" if fit.degenerate else ""
            print(
                f"{algo}: slope {fit.slope:.4f}, pearson {fit.pearson:.3f}, "
                f"spearman {fit.spearman:.3f}{flag}"
            )
    logger.info("Wrote %s", path)


def cli(argv: Optional[List[str]] = None) -> int:
    """Run the command line and return its exit code.

    Returns:
        int: 0 on success, 1 on usage or configuration errors, 2 on runtime errors.
    """
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as e:
        print(e, file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as e:
        return EXIT_OK if e.code in (0, None) else EXIT_USAGE

    configure_logging()
    try:
        if args.command == "report":
            summarize(args)
            return EXIT_OK
        cfg = load(args)
        if args.command == "gen-demos":
            gen_demos(cfg)
        elif args.command == "fit-prior":
            fit_priors(cfg)
        else:
            run_suite(cfg, "bandit" if args.command == "run-bandit" else "deepsea")
    except ConfigError as e:
        print(f"prior-sim: config error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except (PriorSimError, OSError) as e:
        print(f"prior-sim: {e}", file=sys.stderr)
        return EXIT_RUNTIME
    except Exception as e:
        logger.exception("Unexpected failure in %s", args.command)
        print(f"prior-sim: unexpected {type(e).__name__}: {e}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(cli())
