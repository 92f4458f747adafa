"""Step 5: randomized property testing of the whole toolchain."""

from helpers.cli_helpers import (
    EXIT_OK, EXIT_PROPERTY_FAILURE, add_generator_arguments, gen_config_from_args,
    mutation_choice, print_report_summary, write_text,
)
from helpers.format_helpers import dump_report
from helpers.fuzz_helpers import run_pipeline
from helpers.generator_helpers import GenMode


def register(subparsers) -> None:
    parser = subparsers.add_parser("fuzz", help="Generate, compile, run and check random programs")
    add_generator_arguments(parser, GenMode.WELL_BEHAVED)
    parser.add_argument("--no-shrink", action="store_true", help="Report failing programs unshrunk")
    parser.add_argument("--mutation", type=mutation_choice, default=None,
                        help="Seed a compiler fault to confirm the checkers catch it")
    parser.set_defaults(handler=cmd_fuzz)


def cmd_fuzz(args) -> int:
    report = run_pipeline(gen_config_from_args(args), args.tests, mutation=args.mutation,
                          jobs=args.jobs, do_shrink=not args.no_shrink, only=args.only)
    print_report_summary(report)
    if args.report:
        write_text(args.report, dump_report(report))
    return EXIT_OK if report.clean else EXIT_PROPERTY_FAILURE
