"""
``mflqr solve|simulate|sweep|verify <config> [--out DIR] [--seed N] [--runs N] [--threads N] [--k N] [-v]``

Exit codes: 0 on success, 1 when a verification check fails, 2 on config or I/O errors.
"""

import argparse
import sys

from mflqr.commands import cmd_simulate, cmd_solve, cmd_sweep, cmd_verify
from mflqr.exceptions import MfLqrException
from mflqr.experiment import parse_config
from mflqr.logger import configure_verbosity, logger

EXIT_OK = 0
EXIT_VERIFY_FAILED = 1
EXIT_ERROR = 2

COMMANDS = {
    "solve": (cmd_solve, "Write the gain schedule of every λ."),
    "simulate": (cmd_simulate, "Write per-time ensemble statistics of every λ."),
    "sweep": (cmd_sweep, "Write time-averaged ensemble statistics against λ."),
    "verify": (cmd_verify, "Run the self checks on small instances."),
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("config", help="experiment TOML file")
    common.add_argument("--out", help="output directory (overrides [output] directory)")
    common.add_argument("--seed", type=int, help="base seed of the ensembles")
    common.add_argument("--runs", type=int, help="number of rollouts per ensemble")
    common.add_argument("--threads", type=int, help="worker threads for the rollouts")
    common.add_argument("--k", type=int, help="number of subsystems (overrides [system] k)")
    common.add_argument(
        "-v", "--verbose", action="count", default=0, help="-v for INFO logs, -vv for DEBUG, -vvv for TRACE"
    )

    parser = argparse.ArgumentParser(prog="mflqr", description="Risk-aware mean-field coupled LQR experiments.")
    subparsers = parser.add_subparsers(dest="command", required=True)
    for name, (_, help_text) in COMMANDS.items():
        subparsers.add_parser(name, parents=[common], help=help_text)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    configure_verbosity(args.verbose)
    command, _ = COMMANDS[args.command]
    try:
        config = parse_config(args.config).override(
            seed=args.seed, runs=args.runs, out=args.out, threads=args.threads, k=args.k
        )
        outcome = command(config)
    except (MfLqrException, OSError) as e:
        logger.debug("Command '{}' failed: {!r}", args.command, e)
        print(f"mflqr {args.command}: {e}", file=sys.stderr)
        return EXIT_ERROR

    if args.command == "verify":
        for result in outcome:
            print(result)
        failed = [result for result in outcome if not result.passed]
        if failed:
            print(f"{len(failed)} of {len(outcome)} checks failed.", file=sys.stderr)
            return EXIT_VERIFY_FAILED
        print(f"All {len(outcome)} checks passed.")
        return EXIT_OK

    for path in outcome:
        print(path)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
