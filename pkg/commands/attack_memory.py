"""Step 6: corrupt data memory during execution and recheck the invariants."""

from helpers.cli_helpers import (
    EXIT_OK, EXIT_PROPERTY_FAILURE, add_generator_arguments, gen_config_from_args,
    positive_int, print_report_summary, write_text,
)
from helpers.format_helpers import dump_report
from helpers.fuzz_helpers import inject_attack
from helpers.generator_helpers import GenMode


def register(subparsers) -> None:
    parser = subparsers.add_parser("attack", help="Inject random data-memory corruption and check the invariants")
    add_generator_arguments(parser, GenMode.WILD)
    parser.add_argument("--flips", type=positive_int, default=3, help="Corrupted words per run")
    parser.set_defaults(handler=cmd_attack)


def cmd_attack(args) -> int:
    report = inject_attack(gen_config_from_args(args), args.tests, args.flips, jobs=args.jobs, only=args.only)
    print_report_summary(report)
    if args.report:
        write_text(args.report, dump_report(report))
    return EXIT_OK if report.clean else EXIT_PROPERTY_FAILURE
