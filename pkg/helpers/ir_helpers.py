"""
Component-Aware Intermediate Language

This module provides:
1. The IR program model (components, interfaces, procedures, data blocks)
2. Static well-formedness validation
3. A reference interpreter producing cross-component Call/Ret traces

Addresses are symbolic at this level: pointers are (component, block, offset)
triples and code values name a procedure and an instruction index.
"""

import enum
import logging
from typing import Annotated, Literal, NamedTuple, Union

from pydantic import BaseModel, ConfigDict, Field

from helpers.errors import FuelError
from helpers.isa_helpers import DEFAULT_CONFIG, BinOpKind, BitConfig, eval_binop

logger = logging.getLogger(__name__)


# ============================================
# Conventions
# ============================================

ARG_REGISTER = 3
LINK_REGISTER = 24
NUM_IR_REGISTERS = 25

IRReg = Annotated[int, Field(ge=0, lt=32)]


# ============================================
# Pydantic Models for the Program
# ============================================

class WordConst(BaseModel):
    model_config = ConfigDict(frozen=True)
    kind: Literal["word"] = "word"
    value: int = Field(ge=0)


class PtrConst(BaseModel):
    """Pointer to `offset` words into an own data block."""
    model_config = ConfigDict(frozen=True)
    kind: Literal["ptr"] = "ptr"
    block: int = Field(ge=0)
    offset: int = Field(ge=0)


class LabelConst(BaseModel):
    """Address of a label in the enclosing procedure."""
    model_config = ConfigDict(frozen=True)
    kind: Literal["label"] = "label"
    label: str


IRConstant = Annotated[Union[WordConst, PtrConst, LabelConst], Field(discriminator="kind")]


class _IRInstr(BaseModel):
    model_config = ConfigDict(frozen=True)


class INop(_IRInstr):
    op: Literal["nop"] = "nop"


class IConst(_IRInstr):
    op: Literal["const"] = "const"
    value: IRConstant
    rd: IRReg


class IMov(_IRInstr):
    op: Literal["mov"] = "mov"
    rs: IRReg
    rd: IRReg


class IBinOp(_IRInstr):
    op: Literal["binop"] = "binop"
    binop: BinOpKind
    rs1: IRReg
    rs2: IRReg
    rd: IRReg


class ILoad(_IRInstr):
    op: Literal["load"] = "load"
    rp: IRReg
    rd: IRReg


class IStore(_IRInstr):
    op: Literal["store"] = "store"
    rp: IRReg
    rs: IRReg


class IBnz(_IRInstr):
    op: Literal["bnz"] = "bnz"
    rs: IRReg
    label: str


class IJump(_IRInstr):
    op: Literal["jump"] = "jump"
    rt: IRReg


class IJal(_IRInstr):
    """Jump to a local label, leaving the return point in the link register."""
    op: Literal["jal"] = "jal"
    label: str


class ICall(_IRInstr):
    """Abstract call through the callee's interface."""
    op: Literal["call"] = "call"
    component: int
    procedure: int


class IReturn(_IRInstr):
    op: Literal["return"] = "return"


class IHalt(_IRInstr):
    op: Literal["halt"] = "halt"


class ILabel(_IRInstr):
    op: Literal["label"] = "label"
    label: str


IRInstr = Annotated[
    Union[INop, IConst, IMov, IBinOp, ILoad, IStore, IBnz, IJump, IJal,
          ICall, IReturn, IHalt, ILabel],
    Field(discriminator="op"),
]


class DataBlock(BaseModel):
    """A statically allocated block; words past `init` start at zero."""
    size: int = Field(ge=1, description="Block size in words")
    init: list[int] = Field(default_factory=list, description="Initial words")


class IRComponent(BaseModel):
    """A unit of code and data exposing procedures through its interface."""
    id: int
    exports: set[int] = Field(default_factory=set)
    imports: set[tuple[int, int]] = Field(default_factory=set)
    procedures: dict[int, list[IRInstr]] = Field(default_factory=dict)
    data_blocks: dict[int, DataBlock] = Field(default_factory=dict)


class IRProgram(BaseModel):
    components: list[IRComponent]
    main: tuple[int, int] = Field(description="(component id, procedure id) of the entry procedure")

    def component(self, component_id: int) -> IRComponent:
        for comp in self.components:
            if comp.id == component_id:
                return comp
        raise KeyError(component_id)

    def instruction_count(self) -> int:
        return sum(len(code) for comp in self.components for code in comp.procedures.values())


# ============================================
# Traces and Outcomes
# ============================================

class Call(BaseModel):
    model_config = ConfigDict(frozen=True)
    kind: Literal["call"] = "call"
    caller: int
    procedure: int
    arg: int
    callee: int

    def __str__(self) -> str:
        return f"Call(c{self.caller}, p{self.procedure}, {self.arg}, c{self.callee})"


class Ret(BaseModel):
    model_config = ConfigDict(frozen=True)
    kind: Literal["ret"] = "ret"
    returner: int
    value: int
    returnee: int

    def __str__(self) -> str:
        return f"Ret(c{self.returner}, {self.value}, c{self.returnee})"


TraceEvent = Annotated[Union[Call, Ret], Field(discriminator="kind")]


def is_well_bracketed(trace: list[TraceEvent]) -> bool:
    """Every Ret answers the most recent unmatched Call."""
    pending: list[Call] = []
    for event in trace:
        if isinstance(event, Call):
            pending.append(event)
            continue
        if not pending:
            return False
        call = pending.pop()
        if (event.returner, event.returnee) != (call.callee, call.caller):
            return False
    return True


class IRStatus(str, enum.Enum):
    HALTED = "halted"
    OUT_OF_FUEL = "out_of_fuel"
    UNDEFINED_BEHAVIOR = "undefined_behavior"


class UBReason(str, enum.Enum):
    STORE_NON_POINTER = "StoreNonPointer"
    STORE_OUT_OF_BOUNDS = "StoreOutOfBounds"
    STORE_OTHER_COMPONENT = "StoreOtherComponent"
    LOAD_NON_POINTER = "LoadNonPointer"
    LOAD_OUT_OF_BOUNDS = "LoadOutOfBounds"
    LOAD_OTHER_COMPONENT = "LoadOtherComponent"
    JUMP_NON_CODE = "JumpNonCode"
    JUMP_OTHER_COMPONENT = "JumpOtherComponent"
    BRANCH_ON_NON_INT = "BranchOnNonInt"
    POINTER_ARITHMETIC = "PointerArithmetic"
    POINTER_LEAK = "PointerLeak"
    UNDEFINED_ARGUMENT = "UndefinedArgument"


class IROutcome(BaseModel):
    status: IRStatus
    steps: int
    trace: list[TraceEvent] = Field(default_factory=list)
    ub_reason: UBReason | None = None
    ub_step: int | None = None
    r3: int | None = Field(None, description="Final r3 when it holds an integer")


# ============================================
# Runtime Values
# ============================================

class Ptr(NamedTuple):
    component: int
    block: int
    offset: int


class CodeRef(NamedTuple):
    component: int
    procedure: int
    index: int


class _Undef:
    def __repr__(self) -> str:
        return "Undef"


UNDEF = _Undef()


# ============================================
# Validation
# ============================================

class WellFormednessError(BaseModel):
    kind: str
    component: int
    procedure: int | None = None
    index: int | None = None
    message: str

    def __str__(self) -> str:
        where = f"c{self.component}"
        if self.procedure is not None:
            where += f".p{self.procedure}"
        if self.index is not None:
            where += f"[{self.index}]"
        return f"{self.kind}@{where}: {self.message}"


_REGISTER_FIELDS = ("rd", "rs", "rs1", "rs2", "rp", "rt")


def instruction_registers(instr) -> list[int]:
    return [getattr(instr, name) for name in _REGISTER_FIELDS if name in type(instr).model_fields]


def procedure_labels(code: list) -> dict[str, int]:
    """Label name -> index of its ILabel (first definition wins)."""
    labels: dict[str, int] = {}
    for index, instr in enumerate(code):
        if isinstance(instr, ILabel):
            labels.setdefault(instr.label, index)
    return labels


def validate(program: IRProgram) -> list[WellFormednessError]:
    """
    Check the static rules of the IR.

    Args:
        program: The program to check

    Returns:
        All violations found; an empty list means the program is well formed
    """
    errors: list[WellFormednessError] = []

    def err(kind, comp, message, proc=None, index=None):
        errors.append(WellFormednessError(kind=kind, component=comp, procedure=proc,
                                          index=index, message=message))

    by_id: dict[int, IRComponent] = {}
    for comp in program.components:
        if comp.id <= 0:
            err("ReservedComponent", comp.id, "component ids start at 1; 0 is the runtime")
        if comp.id in by_id:
            err("DuplicateComponent", comp.id, "component id defined twice")
        by_id.setdefault(comp.id, comp)

    main_c, main_p = program.main
    if main_c not in by_id:
        err("UnknownMain", main_c, "main component does not exist")
    elif main_p not in by_id[main_c].procedures or main_p not in by_id[main_c].exports:
        err("MainNotExported", main_c, "main procedure must exist and be exported", proc=main_p)

    for comp in program.components:
        for p in sorted(comp.exports - comp.procedures.keys()):
            err("UnknownExport", comp.id, "exported procedure is not defined", proc=p)
        for ic, ip in sorted(comp.imports):
            if ic == comp.id:
                err("SelfImport", comp.id, f"imports its own procedure p{ip}")
            elif ic not in by_id or ip not in by_id[ic].exports:
                err("ImportNotExported", comp.id, f"imports c{ic}.p{ip}, which is not exported")
        for b, block in sorted(comp.data_blocks.items()):
            if len(block.init) > block.size:
                err("BlockInitTooLong", comp.id, f"block {b} initializes {len(block.init)} of {block.size} words")

        for p, code in sorted(comp.procedures.items()):
            seen: set[str] = set()
            for index, instr in enumerate(code):
                if isinstance(instr, ILabel):
                    if instr.label in seen:
                        err("DuplicateLabel", comp.id, f"label {instr.label} defined twice", p, index)
                    seen.add(instr.label)
            for index, instr in enumerate(code):
                for r in instruction_registers(instr):
                    if r >= NUM_IR_REGISTERS:
                        err("ReservedRegister", comp.id, f"r{r} is reserved for the SFI runtime", p, index)
                label = None
                if isinstance(instr, (IBnz, IJal)):
                    label = instr.label
                elif isinstance(instr, IConst) and isinstance(instr.value, LabelConst):
                    label = instr.value.label
                if label is not None and label not in seen:
                    err("UndefinedLabel", comp.id, f"label {label} is not defined", p, index)
                if isinstance(instr, IConst) and isinstance(instr.value, PtrConst):
                    if instr.value.block not in comp.data_blocks:
                        err("UnknownBlock", comp.id, f"block {instr.value.block} is not defined", p, index)
                if isinstance(instr, ICall):
                    target = (instr.component, instr.procedure)
                    if instr.component == comp.id:
                        if instr.procedure not in comp.procedures:
                            err("UnknownProcedure", comp.id, f"p{instr.procedure} is not defined", p, index)
                    elif target not in comp.imports:
                        err("CallNotImported", comp.id,
                            f"call to c{instr.component}.p{instr.procedure} is not imported", p, index)
    return errors


# ============================================
# Interpreter
# ============================================

def _wrap_offset(offset: int, cfg: BitConfig) -> int:
    half = 1 << (cfg.word_bits - 1)
    return ((offset + half) & cfg.word_mask) - half


def _binop(op: BinOpKind, a, b, cfg: BitConfig):
    """IR value semantics of a binary operation; returns a UBReason on UB."""
    if a is UNDEF or b is UNDEF:
        return UNDEF
    if isinstance(a, int) and isinstance(b, int):
        return eval_binop(op, a, b, cfg)
    if isinstance(a, Ptr) and isinstance(b, int) and op in (BinOpKind.ADD, BinOpKind.SUB):
        delta = b if op is BinOpKind.ADD else -b
        return a._replace(offset=_wrap_offset(a.offset + delta, cfg))
    if isinstance(a, int) and isinstance(b, Ptr) and op is BinOpKind.ADD:
        return b._replace(offset=_wrap_offset(b.offset + a, cfg))
    return UBReason.POINTER_ARITHMETIC


def _boundary_value(value) -> int | UBReason:
    if value is UNDEF:
        return UBReason.UNDEFINED_ARGUMENT
    if not isinstance(value, int):
        return UBReason.POINTER_LEAK
    return value


def interpret(program: IRProgram, fuel: int, cfg: BitConfig = DEFAULT_CONFIG) -> IROutcome:
    """
    Run a validated program on the reference semantics.

    Args:
        program: A program for which validate() returns no errors
        fuel: Maximum number of instructions to execute
        cfg: Word width used for integer arithmetic

    Returns:
        IROutcome with the trace collected up to halt, fuel exhaustion or the
        first undefined behavior

    Raises:
        FuelError: If fuel < 1
    """
    if fuel < 1:
        raise FuelError(f"fuel must be at least 1, got {fuel}")

    comps = {comp.id: comp for comp in program.components}
    labels = {
        (comp.id, p): procedure_labels(code)
        for comp in program.components for p, code in comp.procedures.items()
    }
    memory = {
        (comp.id, b): list(block.init) + [0] * (block.size - len(block.init))
        for comp in program.components for b, block in comp.data_blocks.items()
    }
    regs: list = [UNDEF] * NUM_IR_REGISTERS
    trace: list[TraceEvent] = []
    stack: list[tuple[int, int, int]] = []
    c, p = program.main
    code = comps[c].procedures[p]
    index = 0
    steps = 0

    def finish(status: IRStatus, reason: UBReason | None = None) -> IROutcome:
        r3 = regs[ARG_REGISTER]
        return IROutcome(
            status=status, steps=steps, trace=trace, ub_reason=reason,
            ub_step=steps if reason is not None else None,
            r3=r3 if isinstance(r3, int) else None,
        )

    def memory_access(pointer, store: bool) -> tuple | UBReason:
        if not isinstance(pointer, Ptr):
            return UBReason.STORE_NON_POINTER if store else UBReason.LOAD_NON_POINTER
        if pointer.component != c:
            return UBReason.STORE_OTHER_COMPONENT if store else UBReason.LOAD_OTHER_COMPONENT
        cell = memory[(pointer.component, pointer.block)]
        if not 0 <= pointer.offset < len(cell):
            return UBReason.STORE_OUT_OF_BOUNDS if store else UBReason.LOAD_OUT_OF_BOUNDS
        return cell, pointer.offset

    while steps < fuel:
        if index >= len(code):
            return finish(IRStatus.HALTED)
        instr = code[index]
        index += 1

        match instr:
            case IConst(value=WordConst(value=v), rd=rd):
                regs[rd] = v & cfg.word_mask
            case IConst(value=PtrConst(block=b, offset=off), rd=rd):
                regs[rd] = Ptr(c, b, _wrap_offset(off, cfg))
            case IConst(value=LabelConst(label=name), rd=rd):
                regs[rd] = CodeRef(c, p, labels[(c, p)][name])
            case IMov(rs=rs, rd=rd):
                regs[rd] = regs[rs]
            case IBinOp(binop=op, rs1=rs1, rs2=rs2, rd=rd):
                result = _binop(op, regs[rs1], regs[rs2], cfg)
                if isinstance(result, UBReason):
                    return finish(IRStatus.UNDEFINED_BEHAVIOR, result)
                regs[rd] = result
            case ILoad(rp=rp, rd=rd):
                access = memory_access(regs[rp], store=False)
                if isinstance(access, UBReason):
                    return finish(IRStatus.UNDEFINED_BEHAVIOR, access)
                cell, off = access
                regs[rd] = cell[off]
            case IStore(rp=rp, rs=rs):
                access = memory_access(regs[rp], store=True)
                if isinstance(access, UBReason):
                    return finish(IRStatus.UNDEFINED_BEHAVIOR, access)
                assert regs[rp].component == c, "IR store escaped its component"
                cell, off = access
                cell[off] = regs[rs]
            case IBnz(rs=rs, label=name):
                cond = regs[rs]
                if not isinstance(cond, int):
                    return finish(IRStatus.UNDEFINED_BEHAVIOR, UBReason.BRANCH_ON_NON_INT)
                if cond != 0:
                    index = labels[(c, p)][name]
            case IJump(rt=rt):
                target = regs[rt]
                if not isinstance(target, CodeRef):
                    return finish(IRStatus.UNDEFINED_BEHAVIOR, UBReason.JUMP_NON_CODE)
                if target.component != c:
                    return finish(IRStatus.UNDEFINED_BEHAVIOR, UBReason.JUMP_OTHER_COMPONENT)
                p, index = target.procedure, target.index
                code = comps[c].procedures[p]
            case IJal(label=name):
                regs[LINK_REGISTER] = CodeRef(c, p, index)
                index = labels[(c, p)][name]
            case ICall(component=callee, procedure=proc):
                if callee != c:
                    arg = _boundary_value(regs[ARG_REGISTER])
                    if isinstance(arg, UBReason):
                        return finish(IRStatus.UNDEFINED_BEHAVIOR, arg)
                    trace.append(Call(caller=c, procedure=proc, arg=arg, callee=callee))
                stack.append((c, p, index))
                c, p, index = callee, proc, 0
                code = comps[c].procedures[p]
            case IReturn():
                if not stack:
                    steps += 1
                    return finish(IRStatus.HALTED)
                caller, proc, ret_index = stack.pop()
                if caller != c:
                    value = _boundary_value(regs[ARG_REGISTER])
                    if isinstance(value, UBReason):
                        return finish(IRStatus.UNDEFINED_BEHAVIOR, value)
                    trace.append(Ret(returner=c, value=value, returnee=caller))
                c, p, index = caller, proc, ret_index
                code = comps[c].procedures[p]
            case IHalt():
                steps += 1
                return finish(IRStatus.HALTED)
        steps += 1

    logger.debug("IR run out of fuel after %d steps", steps)
    return finish(IRStatus.OUT_OF_FUEL)
