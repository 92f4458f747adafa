"""Step 3: check an execution log against the isolation invariants."""

from helpers.checker_helpers import CHECKERS, INVARIANT_NAMES, CheckReport
from helpers.cli_helpers import EXIT_OK, EXIT_PROPERTY_FAILURE, write_text
from helpers.format_helpers import dump_report, read_log, read_object

MAX_LISTED = 20


def register(subparsers) -> None:
    parser = subparsers.add_parser("check", help="Check a log against invariants 1 (store), 2 (jump), 3 (stack)")
    parser.add_argument("object", help="Object file the log was produced from")
    parser.add_argument("log", help="Execution log")
    parser.add_argument("--invariant", choices=["1", "2", "3", "all"], default="all")
    parser.add_argument("--report", default=None, metavar="PATH", help="Write the JSON report here")
    parser.set_defaults(handler=cmd_check)


def cmd_check(args) -> int:
    obj = read_object(args.object)
    _, log = read_log(args.log)
    selected = sorted(CHECKERS) if args.invariant == "all" else [int(args.invariant)]
    report = CheckReport(verdicts=[CHECKERS[n](log, obj.meta) for n in selected])

    for verdict in report.verdicts:
        name = INVARIANT_NAMES[verdict.invariant]
        if verdict.passed:
            print(f"✅ invariant {verdict.invariant} ({name}): {verdict.events_checked} events checked")
            continue
        print(f"❌ invariant {verdict.invariant} ({name}): {len(verdict.violations)} violation(s)")
        for violation in verdict.violations[:MAX_LISTED]:
            print(f"   step {violation.step} pc {violation.pc:#x} event {violation.event_index}: {violation.detail}")

    if args.report:
        write_text(args.report, dump_report(report))
    return EXIT_OK if report.passed else EXIT_PROPERTY_FAILURE
