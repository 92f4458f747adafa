"""
Shared plumbing for the command modules: exit codes, file I/O and the
flag groups several subcommands expose.
"""

import argparse
import os
import sys
from pathlib import Path

from helpers.backend_helpers import Mutation
from helpers.generator_helpers import GenConfig, GenMode

EXIT_OK = 0
EXIT_PROPERTY_FAILURE = 1
EXIT_USAGE = 2


def read_text(path: str) -> str:
    if path == "-":
        return sys.stdin.read()
    return Path(path).read_text(encoding="utf-8")


def write_text(path: str | None, text: str) -> None:
    """Write to `path`, or to stdout when it is None or '-'."""
    if path in (None, "-"):
        sys.stdout.write(text)
        return
    Path(path).write_text(text, encoding="utf-8")


def positive_int(value: str) -> int:
    number = int(value, 0)
    if number < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {value}")
    return number


def add_generator_arguments(parser: argparse.ArgumentParser, default_mode: GenMode) -> None:
    parser.add_argument("--tests", type=positive_int, default=100, help="Number of generated programs")
    parser.add_argument("--seed", type=lambda v: int(v, 0), default=0, help="Master seed")
    parser.add_argument("--mode", choices=[m.value for m in GenMode], default=default_mode.value)
    parser.add_argument("--fuel", type=positive_int, default=10000, help="IR step budget per test")
    parser.add_argument("--jobs", type=positive_int, default=os.cpu_count() or 1,
                        help="Worker processes (default: one per CPU)")
    parser.add_argument("--only", type=lambda v: int(v, 0), default=None, metavar="INDEX",
                        help="Run a single test index (for reproducing a failure)")
    parser.add_argument("--report", default=None, metavar="PATH", help="Write the JSON report here")


def gen_config_from_args(args: argparse.Namespace) -> GenConfig:
    return GenConfig(seed=args.seed, mode=GenMode(args.mode), fuel=args.fuel)


def mutation_choice(value: str) -> Mutation:
    try:
        return Mutation(value)
    except ValueError:
        raise argparse.ArgumentTypeError(
            f"unknown mutation {value!r}; choose from {', '.join(m.value for m in Mutation)}") from None


def print_report_summary(report) -> None:
    """One-screen summary of a FuzzReport, with a check mark or cross."""
    mark = "✅" if report.clean else "❌"
    print(f"{mark} {report.experiment} ({report.mode.value}, seed {report.seed}): {report.tests} test(s), "
          f"{report.discards} discarded")
    print("   violations: " + ", ".join(f"invariant {n}: {count}" for n, count in sorted(report.violations.items())))
    if report.experiment == "fuzz":
        print(f"   trace mismatches: {report.trace_mismatches}, static failures: {report.static_failures}, "
              f"IR undefined behavior: {report.ir_undefined}")
    for failure in report.failures:
        print(f"   test {failure.index}: {'; '.join(failure.reasons)}")
        print(f"      rerun: {failure.repro}")
