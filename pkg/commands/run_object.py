"""Step 2: run an object on the simulator and write its execution log."""

from helpers.cli_helpers import EXIT_OK, EXIT_PROPERTY_FAILURE, positive_int, write_text
from helpers.format_helpers import dump_log, read_object
from helpers.machine_helpers import RunStatus, run


def register(subparsers) -> None:
    parser = subparsers.add_parser("run", help="Simulate an object and record its execution log")
    parser.add_argument("object", help="Object file")
    parser.add_argument("--fuel", type=positive_int, default=100000, help="Maximum instructions to execute")
    parser.add_argument("-o", "--output", default="-", help="Log file to write (default: stdout)")
    parser.set_defaults(handler=cmd_run)


def cmd_run(args) -> int:
    obj = read_object(args.object)
    outcome = run(obj, args.fuel)
    write_text(args.output, dump_log(outcome))
    if args.output != "-":
        mark = "❌" if outcome.status is RunStatus.STUCK else "✅"
        detail = f" ({outcome.stuck_reason} at step {outcome.stuck_step})" if outcome.stuck_reason else ""
        print(f"{mark} {outcome.status.value}{detail} after {outcome.final.steps} steps, "
              f"{len(outcome.log)} events, r3 = {outcome.final.regs[3]:#x} -> {args.output}")
    return EXIT_PROPERTY_FAILURE if outcome.status is RunStatus.STUCK else EXIT_OK
