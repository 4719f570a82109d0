"""
Command-line front end.

    matching-cache run --config scenario.yaml --out results.csv
    matching-cache verify --max-size 4 --trials 1000 --seed 0
    matching-cache figures results.csv --out figures/
"""

import argparse
import logging
import sys
from pathlib import Path
from typing import Callable, List, Optional, Union

import pandas as pd

from .cache_sim import (
    ExperimentRunner,
    read_results_csv,
    summarize_results,
    write_results_csv,
)
from .config import ConfigManager, ScenarioConfig
from .exceptions import (
    ConfigError,
    MalformedResultsError,
    NonTerminationError,
    TopologyError,
    UnstableMatchingError,
)
from .matching import ChoiceRule
from .types import PreferenceOrder
from .utils import format_experiment_report, save_json
from .verification import ORACLE_LIMIT, VerificationSuite

logger = logging.getLogger(__name__)

EXIT_SUCCESS = 0
EXIT_FAILURE = 1
EXIT_VIOLATION = 2

LOG_FORMAT = "%(asctime)s - %(levelname)s - %(name)s - %(message)s"

PathLike = Union[str, Path]


def load_config(config_path: Optional[PathLike]) -> ScenarioConfig:
    """Defaults when no path is given, then environment overrides."""
    manager = ConfigManager(Path(config_path) if config_path else None)
    if config_path:
        manager.load_from_file(Path(config_path))
    return manager.load_from_env()


def cmd_run(
    config_path: Optional[PathLike],
    output_path: PathLike,
    audit_path: Optional[PathLike] = None,
    seeds: Optional[List[int]] = None,
) -> int:
    """
    Run the experiment sweep and write the result CSV.

    Args:
        config_path: Scenario file, or None for the defaults
        output_path: Result CSV path
        audit_path: Optional JSON path for the replicate audit log
        seeds: Seed replicates replacing experiment.seeds from the config

    Returns:
        Process exit code
    """
    try:
        config = load_config(config_path)
        if seeds:
            config.experiment.seeds = list(seeds)
            config.validate()
    except (FileNotFoundError, ConfigError) as e:
        logger.error("%s", e)
        return EXIT_FAILURE

    runner = ExperimentRunner(config)
    try:
        results = runner.run()
    except (UnstableMatchingError, NonTerminationError) as e:
        logger.error("matching property violated: %s", e)
        return EXIT_VIOLATION
    except (TopologyError, ConfigError) as e:
        logger.error("%s", e)
        return EXIT_FAILURE

    try:
        write_results_csv(results, output_path)
        if audit_path:
            save_json(runner.get_audit_log(), audit_path)
    except OSError as e:
        logger.error("cannot write results: %s", e)
        return EXIT_FAILURE

    print(
        f"popularity={config.popularity.mode.value} "
        f"requests={config.experiment.request_mode.value} "
        f"seeds={len(config.experiment.seeds)} rows={len(results)}"
    )
    print(format_experiment_report(summarize_results(results).to_dict("records")))
    logger.info("wrote %d rows to %s", len(results), output_path)
    return EXIT_SUCCESS


def cmd_verify(
    max_size: int = ORACLE_LIMIT,
    trials: int = 1000,
    seed: int = 0,
    counterexample_path: Optional[PathLike] = None,
    receiver_choice_factory: Optional[Callable[[PreferenceOrder], ChoiceRule]] = None,
) -> int:
    """
    Check the matching properties on random instances.

    receiver_choice_factory swaps the receivers' choice rules inside the
    engine and exists to exercise the failure path.
    """
    try:
        suite = VerificationSuite(max_size, receiver_choice_factory)
        summary = suite.run(trials, seed)
    except ValueError as e:
        logger.error("%s", e)
        return EXIT_FAILURE

    print(
        f"trials={summary.trials} passed={summary.passed} failed={summary.failed} "
        f"oracle_checked={summary.oracle_checked}"
    )
    if summary.ok:
        return EXIT_SUCCESS

    logger.error("counterexample: %s", summary.counterexample)
    if counterexample_path:
        save_json(summary.counterexample, counterexample_path)
    return EXIT_VIOLATION


def _wide(summary: pd.DataFrame, ma_column: str, ra_column: str) -> pd.DataFrame:
    """One row per request count, MA and RA columns for every beta."""
    columns = {}
    for beta, group in summary.groupby("beta", sort=True):
        series = group.set_index("requests")
        columns[f"ma_b{beta:g}"] = series[ma_column]
        columns[f"ra_b{beta:g}"] = series[ra_column]
    return pd.DataFrame(columns).sort_index().rename_axis("requests").reset_index()


def cmd_figures(csv_path: PathLike, output_dir: PathLike) -> int:
    """Write plot-ready satisfaction and download-time tables."""
    try:
        summary = summarize_results(read_results_csv(csv_path))
    except FileNotFoundError:
        logger.error("results file not found: %s", csv_path)
        return EXIT_FAILURE
    except MalformedResultsError as e:
        logger.error("%s", e)
        return EXIT_FAILURE

    output_dir = Path(output_dir)
    output_dir.mkdir(parents=True, exist_ok=True)
    _wide(summary, "sat_ma", "sat_ra").to_csv(
        output_dir / "satisfaction.csv", index=False, float_format="%.6g"
    )
    _wide(summary, "time_ma", "time_ra").to_csv(
        output_dir / "download_time.csv", index=False, float_format="%.6g"
    )
    logger.info("wrote figure data for %d beta value(s) to %s", summary["beta"].nunique(), output_dir)
    return EXIT_SUCCESS


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="matching-cache",
        description="Proactive caching at small base stations with a many-to-many matching game",
    )
    verbosity = parser.add_mutually_exclusive_group()
    verbosity.add_argument("--verbose", "-v", action="store_true", help="Debug logging")
    verbosity.add_argument("--quiet", "-q", action="store_true", help="Warnings and errors only")
    subparsers = parser.add_subparsers(dest="command", required=True)

    run = subparsers.add_parser("run", help="Run the beta x request sweep")
    run.add_argument("--config", type=Path, help="Scenario config (YAML or JSON)")
    run.add_argument("--out", type=Path, default=Path("results.csv"), help="Result CSV")
    run.add_argument("--audit", type=Path, help="Write the replicate audit log as JSON")
    run.add_argument(
        "--seed",
        type=int,
        action="append",
        dest="seeds",
        help="Seed replicate (repeatable); replaces experiment.seeds",
    )

    verify = subparsers.add_parser("verify", help="Check stability on random instances")
    verify.add_argument("--max-size", type=int, default=ORACLE_LIMIT, help="Agents per side")
    verify.add_argument("--trials", type=int, default=1000)
    verify.add_argument("--seed", type=int, default=0)
    verify.add_argument("--out", type=Path, help="Where to write a counterexample")

    figures = subparsers.add_parser("figures", help="Plot-ready data from a result CSV")
    figures.add_argument("csv", type=Path, help="Result CSV written by 'run'")
    figures.add_argument("--out", type=Path, default=Path("figures"), help="Output directory")
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)

    level = logging.INFO
    if args.verbose:
        level = logging.DEBUG
    elif args.quiet:
        level = logging.WARNING
    logging.basicConfig(level=level, format=LOG_FORMAT)

    if args.command == "run":
        return cmd_run(args.config, args.out, args.audit, args.seeds)
    if args.command == "verify":
        return cmd_verify(args.max_size, args.trials, args.seed, args.out)
    return cmd_figures(args.csv, args.out)


if __name__ == "__main__":
    sys.exit(main())
