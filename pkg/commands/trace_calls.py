"""Step 4: derive the cross-component Call/Ret trace of a run."""

from helpers.cli_helpers import EXIT_OK, EXIT_PROPERTY_FAILURE, positive_int, read_text, write_text
from helpers.format_helpers import format_trace, read_log, read_object
from helpers.ir_helpers import interpret
from helpers.ir_text_helpers import parse_program
from helpers.machine_helpers import RunStatus
from helpers.trace_helpers import compare_traces, derive_trace


def register(subparsers) -> None:
    parser = subparsers.add_parser("trace", help="Print the Call/Ret trace of an execution log")
    parser.add_argument("object", help="Object file the log was produced from")
    parser.add_argument("log", help="Execution log")
    parser.add_argument("-o", "--output", default="-", help="Trace file to write (default: stdout)")
    parser.add_argument("--ir", default=None, metavar="PROGRAM",
                        help="Also interpret this IR program and compare the two traces")
    parser.add_argument("--fuel", type=positive_int, default=10000, help="IR step budget for --ir")
    parser.set_defaults(handler=cmd_trace)


def cmd_trace(args) -> int:
    obj = read_object(args.object)
    header, log = read_log(args.log)
    trace = derive_trace(log, obj.meta)
    write_text(args.output, format_trace(trace))
    if args.ir is None:
        return EXIT_OK

    ir = interpret(parse_program(read_text(args.ir), source=args.ir), args.fuel)
    mismatch = compare_traces(ir.status, ir.trace, RunStatus(header.status), trace)
    if mismatch:
        print(f"❌ {mismatch}")
        return EXIT_PROPERTY_FAILURE
    print(f"✅ traces agree ({len(ir.trace)} IR events, {len(trace)} machine events)")
    return EXIT_OK
