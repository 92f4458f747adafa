"""Step 1: compile IR text into an object file."""

from helpers.backend_helpers import compile_program
from helpers.cli_helpers import EXIT_OK, EXIT_PROPERTY_FAILURE, positive_int, read_text, write_text
from helpers.format_helpers import dump_object
from helpers.ir_helpers import validate
from helpers.ir_text_helpers import parse_program
from helpers.isa_helpers import BitConfig


def register(subparsers) -> None:
    parser = subparsers.add_parser("compile", help="Compile an IR program to a sandboxed object")
    parser.add_argument("input", help="IR text file ('-' for stdin)")
    parser.add_argument("-o", "--output", default="-", help="Object file to write (default: stdout)")
    defaults = BitConfig()
    parser.add_argument("--offset-bits", type=positive_int, default=defaults.offset_bits)
    parser.add_argument("--component-bits", type=positive_int, default=defaults.component_bits)
    parser.add_argument("--bundle-bits", type=positive_int, default=defaults.bundle_bits)
    parser.set_defaults(handler=cmd_compile)


def cmd_compile(args) -> int:
    source = "<stdin>" if args.input == "-" else args.input
    program = parse_program(read_text(args.input), source=source)
    errors = validate(program)
    if errors:
        for error in errors:
            print(f"❌ {error}")
        return EXIT_PROPERTY_FAILURE

    cfg = BitConfig(offset_bits=args.offset_bits, component_bits=args.component_bits,
                    bundle_bits=args.bundle_bits)
    obj = compile_program(program, cfg)
    write_text(args.output, dump_object(obj))
    if args.output != "-":
        words = sum(len(section.words) for section in obj.code)
        print(f"✅ Compiled {len(program.components)} component(s), {words} code words -> {args.output}")
    return EXIT_OK
