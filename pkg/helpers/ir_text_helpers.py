"""
IR Text Format

Line-oriented syntax, one instruction per line, `#` starts a comment:

    ir 1
    main 1 0
    component 1
      export 0
      import 2 0
      block 0 size 4 init 0x1 0x2
      proc 0
        const 0x2a r3
        const ptr 0 2 r20
        const label loop r22
        add r1 r2 r3
        call 2 0
        label loop
        return
      end
    end

Instructions: nop | halt | return | const <word> rD | const ptr <block>
<offset> rD | const label <name> rD | mov rS rD | <binop> rA rB rD |
load rP rD | store rP rS | bnz rS <name> | jump rT | jal <name> |
call <component> <procedure> | label <name>. Binops are add, sub, mul, eq,
leq, and, or, shl. `print_program` emits the canonical form, and
`parse_program(print_program(p)) == p`.
"""

import re

from helpers.errors import FormatVersionError, ParseError
from helpers.ir_helpers import (
    DataBlock, IBinOp, ICall, IConst, IHalt, IJal, IJump, ILabel, ILoad, IMov,
    INop, IReturn, IRComponent, IRProgram, IStore, IBnz, LabelConst, PtrConst,
    WordConst,
)
from helpers.isa_helpers import BinOpKind

IR_FORMAT_VERSION = 1

_TOKEN = re.compile(r"\S+")
_LABEL_NAME = re.compile(r"[A-Za-z_][A-Za-z0-9_]*$")
_BINOPS = {op.value: op for op in BinOpKind}


# ============================================
# Printing
# ============================================

def _print_instr(instr) -> str:
    match instr:
        case IConst(value=WordConst(value=v), rd=rd):
            return f"const {v:#x} r{rd}"
        case IConst(value=PtrConst(block=b, offset=off), rd=rd):
            return f"const ptr {b} {off} r{rd}"
        case IConst(value=LabelConst(label=name), rd=rd):
            return f"const label {name} r{rd}"
        case IMov(rs=rs, rd=rd):
            return f"mov r{rs} r{rd}"
        case IBinOp(binop=op, rs1=a, rs2=b, rd=rd):
            return f"{op.value} r{a} r{b} r{rd}"
        case ILoad(rp=rp, rd=rd):
            return f"load r{rp} r{rd}"
        case IStore(rp=rp, rs=rs):
            return f"store r{rp} r{rs}"
        case IBnz(rs=rs, label=name):
            return f"bnz r{rs} {name}"
        case IJump(rt=rt):
            return f"jump r{rt}"
        case IJal(label=name):
            return f"jal {name}"
        case ICall(component=comp, procedure=proc):
            return f"call {comp} {proc}"
        case ILabel(label=name):
            return f"label {name}"
    return instr.op


def print_program(program: IRProgram) -> str:
    """Render a program in canonical IR text."""
    lines = [f"ir {IR_FORMAT_VERSION}", f"main {program.main[0]} {program.main[1]}"]
    for comp in program.components:
        lines.append(f"component {comp.id}")
        if comp.exports:
            lines.append("  export " + " ".join(str(p) for p in sorted(comp.exports)))
        for ic, ip in sorted(comp.imports):
            lines.append(f"  import {ic} {ip}")
        for b, block in sorted(comp.data_blocks.items()):
            init = "".join(f" {w:#x}" for w in block.init)
            lines.append(f"  block {b} size {block.size}" + (f" init{init}" if block.init else ""))
        for p, code in sorted(comp.procedures.items()):
            lines.append(f"  proc {p}")
            lines.extend(f"    {_print_instr(instr)}" for instr in code)
            lines.append("  end")
        lines.append("end")
    return "\n".join(lines) + "\n"


# ============================================
# Parsing
# ============================================

class _Line:
    """Tokens of one source line with their columns."""

    def __init__(self, number: int, text: str, source: str):
        self.number = number
        self.source = source
        matches = list(_TOKEN.finditer(text.split("#", 1)[0]))
        self.tokens = [m.group() for m in matches]
        self.columns = [m.start() + 1 for m in matches]

    def error(self, message: str, position: int = 0) -> ParseError:
        column = self.columns[position] if position < len(self.columns) else (
            self.columns[-1] + len(self.tokens[-1]) if self.tokens else 1)
        return ParseError(message, self.number, column, self.source)

    def expect_count(self, count: int) -> None:
        if len(self.tokens) != count:
            raise self.error(f"{self.tokens[0]} takes {count - 1} operands, got {len(self.tokens) - 1}")

    def integer(self, position: int) -> int:
        if position >= len(self.tokens):
            raise self.error("missing integer operand", position)
        try:
            value = int(self.tokens[position], 0)
        except ValueError:
            raise self.error(f"expected an integer, got {self.tokens[position]!r}", position) from None
        if value < 0:
            raise self.error("integers must be non-negative", position)
        return value

    def register(self, position: int) -> int:
        token = self.tokens[position]
        if not re.fullmatch(r"r\d+", token) or int(token[1:]) >= 32:
            raise self.error(f"expected a register, got {token!r}", position)
        return int(token[1:])

    def label(self, position: int) -> str:
        token = self.tokens[position]
        if not _LABEL_NAME.match(token):
            raise self.error(f"invalid label name {token!r}", position)
        return token


def _parse_instr(line: _Line):
    head = line.tokens[0]
    if head in _BINOPS:
        line.expect_count(4)
        return IBinOp(binop=_BINOPS[head], rs1=line.register(1), rs2=line.register(2), rd=line.register(3))
    match head:
        case "nop":
            line.expect_count(1)
            return INop()
        case "halt":
            line.expect_count(1)
            return IHalt()
        case "return":
            line.expect_count(1)
            return IReturn()
        case "const":
            if len(line.tokens) > 1 and line.tokens[1] == "ptr":
                line.expect_count(5)
                return IConst(value=PtrConst(block=line.integer(2), offset=line.integer(3)), rd=line.register(4))
            if len(line.tokens) > 1 and line.tokens[1] == "label":
                line.expect_count(4)
                return IConst(value=LabelConst(label=line.label(2)), rd=line.register(3))
            line.expect_count(3)
            return IConst(value=WordConst(value=line.integer(1)), rd=line.register(2))
        case "mov":
            line.expect_count(3)
            return IMov(rs=line.register(1), rd=line.register(2))
        case "load":
            line.expect_count(3)
            return ILoad(rp=line.register(1), rd=line.register(2))
        case "store":
            line.expect_count(3)
            return IStore(rp=line.register(1), rs=line.register(2))
        case "bnz":
            line.expect_count(3)
            return IBnz(rs=line.register(1), label=line.label(2))
        case "jump":
            line.expect_count(2)
            return IJump(rt=line.register(1))
        case "jal":
            line.expect_count(2)
            return IJal(label=line.label(1))
        case "call":
            line.expect_count(3)
            return ICall(component=line.integer(1), procedure=line.integer(2))
        case "label":
            line.expect_count(2)
            return ILabel(label=line.label(1))
    raise line.error(f"unknown instruction {head!r}")


def parse_program(text: str, source: str = "<input>") -> IRProgram:
    """
    Parse IR text into a program (no well-formedness checks).

    Args:
        text: IR source
        source: Name used in error positions

    Returns:
        The parsed IRProgram

    Raises:
        ParseError: On syntax errors, with line and column
        FormatVersionError: If the `ir` header names another version
    """
    lines = [_Line(n, raw, source) for n, raw in enumerate(text.splitlines(), start=1)]
    lines = [line for line in lines if line.tokens]
    if not lines or lines[0].tokens[0] != "ir":
        raise ParseError("missing `ir <version>` header", lines[0].number if lines else 1, source=source)
    header = lines[0]
    header.expect_count(2)
    if header.integer(1) != IR_FORMAT_VERSION:
        raise FormatVersionError(f"IR format version {header.tokens[1]} is not supported "
                                 f"(expected {IR_FORMAT_VERSION})")

    main = None
    components: list[IRComponent] = []
    comp: IRComponent | None = None
    proc: list | None = None

    for line in lines[1:]:
        head = line.tokens[0]
        if proc is not None:
            if head == "end":
                line.expect_count(1)
                proc = None
            else:
                proc.append(_parse_instr(line))
            continue
        if comp is not None:
            match head:
                case "end":
                    line.expect_count(1)
                    components.append(comp)
                    comp = None
                case "export":
                    comp.exports.update(line.integer(i) for i in range(1, len(line.tokens)))
                case "import":
                    line.expect_count(3)
                    comp.imports.add((line.integer(1), line.integer(2)))
                case "block":
                    if len(line.tokens) < 4 or line.tokens[2] != "size":
                        raise line.error("expected `block <id> size <n> [init <words>...]`")
                    init: list[int] = []
                    if len(line.tokens) > 4:
                        if line.tokens[4] != "init":
                            raise line.error("expected `init`", 4)
                        init = [line.integer(i) for i in range(5, len(line.tokens))]
                    size = line.integer(3)
                    if size < 1:
                        raise line.error("block size must be at least 1", 3)
                    number = line.integer(1)
                    if number in comp.data_blocks:
                        raise line.error(f"block {number} defined twice", 1)
                    comp.data_blocks[number] = DataBlock(size=size, init=init)
                case "proc":
                    line.expect_count(2)
                    number = line.integer(1)
                    if number in comp.procedures:
                        raise line.error(f"procedure {number} defined twice", 1)
                    proc = comp.procedures.setdefault(number, [])
                case _:
                    raise line.error(f"unexpected {head!r} inside a component")
            continue
        match head:
            case "main":
                line.expect_count(3)
                main = (line.integer(1), line.integer(2))
            case "component":
                line.expect_count(2)
                comp = IRComponent(id=line.integer(1))
            case _:
                raise line.error(f"unexpected {head!r} at top level")

    if proc is not None or comp is not None:
        raise ParseError("unterminated block: missing `end`", lines[-1].number + 1, source=source)
    if main is None:
        raise ParseError("missing `main <component> <procedure>`", 1, source=source)
    return IRProgram(components=components, main=main)
