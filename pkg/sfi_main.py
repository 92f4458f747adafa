"""
SFI Toolchain - Command-Line Entry Point

Compiles component-aware IR to a sandboxed RISC machine and checks, on
execution logs, that every component stays in its own data memory, jumps
only within its own code or through imported entry points, and always
returns to the instruction after its call.

This is the main entry point. It handles global flags and logging, and maps
errors onto the exit-code contract (0 pass, 1 property failure, 2 usage or
format error). Each pipeline step is implemented as a separate module in
the `commands/` directory.
"""

import argparse
import logging
import sys

from pydantic import ValidationError

from commands import (
    attack_memory, check_log, compile_ir, disasm_object, fuzz_programs, run_object,
    trace_calls,
)
from helpers.cli_helpers import EXIT_PROPERTY_FAILURE, EXIT_USAGE
from helpers.errors import ProgramInvalidError, ToolchainError


# ============================================
# Command Registration
# ============================================

COMMANDS = [compile_ir, run_object, check_log, trace_calls, fuzz_programs, attack_memory, disasm_object]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sfi_main.py",
        description="Software fault isolation compiler, simulator and invariant checkers",
    )
    parser.add_argument("-v", "--verbose", action="count", default=0,
                        help="-v for progress messages, -vv for debugging output")
    subparsers = parser.add_subparsers(dest="command", required=True)
    for command in COMMANDS:
        command.register(subparsers)
    return parser


# ============================================
# Logging
# ============================================

def configure_logging(verbosity: int) -> None:
    level = {0: logging.WARNING, 1: logging.INFO}.get(verbosity, logging.DEBUG)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)


# ============================================
# Main
# ============================================

def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    configure_logging(args.verbose)
    try:
        return args.handler(args)
    except ProgramInvalidError as exc:
        for error in exc.errors:
            print(f"❌ {error}", file=sys.stderr)
        return EXIT_PROPERTY_FAILURE
    except (ToolchainError, ValidationError, OSError) as exc:
        print(f"❌ {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
