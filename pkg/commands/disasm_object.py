"""Step 7: pretty-print an object's code with bundles and trusted ranges."""

from helpers.backend_helpers import disassemble
from helpers.cli_helpers import EXIT_OK, write_text
from helpers.format_helpers import read_object


def register(subparsers) -> None:
    parser = subparsers.add_parser("disasm", help="Disassemble an object file")
    parser.add_argument("object", help="Object file")
    parser.add_argument("-o", "--output", default="-", help="Listing to write (default: stdout)")
    parser.set_defaults(handler=cmd_disasm)


def cmd_disasm(args) -> int:
    write_text(args.output, disassemble(read_object(args.object)))
    return EXIT_OK
