#!/usr/bin/env python3
"""
Main script for the ansatz search pipeline.
Generates data, runs template baselines and Bayesian circuit searches (ideal,
noisy, multi-objective) and compares finished runs.
"""

import sys
import argparse
import logging
from logzero import logger
from src.config_manager import ConfigError
from src.experiment_manager import ExperimentManager, load_run_config

# Fix logging for Windows consoles
def setup_console_logging():
    """Configure the root logger to prevent Unicode errors in Windows console."""
    # Replace Unicode characters with ASCII equivalents for console output
    class AsciiFormatter(logging.Formatter):
        def format(self, record):
            msg = super().format(record)
            return (msg.replace('✅', '[OK]')
                      .replace('❌', '[ERROR]')
                      .replace('±', '+/-'))

    console = logging.StreamHandler()
    console.setFormatter(AsciiFormatter('%(levelname)s %(message)s'))
    logging.getLogger().addHandler(console)

    for handler in logging.getLogger().handlers[:]:
        if isinstance(handler, logging.StreamHandler) and handler != console:
            logging.getLogger().removeHandler(handler)


def add_common_arguments(parser):
    """Flags shared by every subcommand."""
    parser.add_argument('--config', type=str, help='Run configuration file (JSON or YAML)')
    parser.add_argument('--out', type=str, help='Output directory of the run')
    parser.add_argument('--force', action='store_true', help='Overwrite existing artifacts')
    parser.add_argument('--verbose', action='store_true', help='Debug logging')


def add_search_arguments(parser, with_mode=False):
    """Flags of the commands that train classifiers."""
    parser.add_argument('--seed', type=int, help='Master seed')
    parser.add_argument('--dataset', type=str, help='iris, synthetic or a dataset CSV path')
    parser.add_argument('--trials', type=int, help='Number of search trials')
    parser.add_argument('--backend', type=str, help='Backend snapshot JSON path')
    parser.add_argument('--parallelism', type=int, help='Concurrent evaluations')
    parser.add_argument('--resume', action='store_true', help='Continue from an existing trials.jsonl')
    if with_mode:
        parser.add_argument('--mode', choices=['ideal', 'noisy', 'multi_objective'], help='Execution mode')


def run_command(args):
    """
    Build the run configuration from defaults, --config and flags, then run.

    Returns:
        bool: True if successful, False otherwise
    """
    flags = {
        "out": args.out,
        "force": args.force or None,
        "dataset": getattr(args, 'dataset', None),
        "trials": getattr(args, 'trials', None),
        "backend": getattr(args, 'backend', None),
        "parallelism": getattr(args, 'parallelism', None),
        "resume": getattr(args, 'resume', False) or None,
        "mode": getattr(args, 'mode', None),
        "rescore_noisy": getattr(args, 'rescore_noisy', False) or None,
    }
    seed = getattr(args, 'seed', None)
    flags["data_seed" if args.command == 'gen-data' else "master_seed"] = seed
    try:
        run_config = load_run_config(args.command, args.config, **flags)
    except ConfigError as e:
        logger.error(f"❌ {str(e)}")
        return False

    manager = ExperimentManager(run_config)
    return manager.run(getattr(args, 'runs', None))


def main():
    """Main function with argument parsing for different tasks."""
    setup_console_logging()

    parser = argparse.ArgumentParser(description="Hardware-aware ansatz search for variational quantum classifiers")
    subparsers = parser.add_subparsers(dest='command', help='Command to run')

    gen_parser = subparsers.add_parser('gen-data', help='Write the synthetic dataset as synthetic.csv')
    add_common_arguments(gen_parser)
    gen_parser.add_argument('--seed', type=int, help='Generator seed')

    baseline_parser = subparsers.add_parser('baseline', help='Evaluate the template ansatze')
    add_common_arguments(baseline_parser)
    add_search_arguments(baseline_parser, with_mode=True)

    search_parser = subparsers.add_parser('search', help='Bayesian search for an ansatz')
    add_common_arguments(search_parser)
    add_search_arguments(search_parser, with_mode=True)

    noisy_parser = subparsers.add_parser('search-noisy', help='Search with noisy evaluation (search --mode noisy)')
    add_common_arguments(noisy_parser)
    add_search_arguments(noisy_parser)

    mo_parser = subparsers.add_parser('search-mo', help='Accuracy vs. complexity search')
    add_common_arguments(mo_parser)
    add_search_arguments(mo_parser)
    mo_parser.add_argument('--rescore-noisy', action='store_true',
                           help='Re-score every Pareto member in the noisy environment')

    report_parser = subparsers.add_parser('report', help='Compare finished runs')
    add_common_arguments(report_parser)
    report_parser.add_argument('runs', nargs='+', help='Run directories')

    args = parser.parse_args()
    if args.command is None:
        parser.print_help()
        sys.exit(1)

    if args.verbose:
        logger.setLevel(logging.DEBUG)
    else:
        logger.setLevel(logging.INFO)

    success = run_command(args)

    # Exit with appropriate status code
    sys.exit(0 if success else 1)

if __name__ == "__main__":
    main()
