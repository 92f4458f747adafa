"""
SFI Compiler Backend

This module lowers a validated IR program to a MachineObject:
1. Memory layout into parity-typed slots (odd = data, even = code)
2. Label, entry-point and block address resolution
3. SFI instrumentation of stores and computed jumps
4. Protected-stack entry, return and post-call sequences
5. Bundle alignment, Halt-guarded entry points and startup code

It also provides the static self-check over compiled output and a
disassembler that annotates bundles and trusted ranges.
"""

import bisect
import enum
import logging
from dataclasses import dataclass, field
from functools import cached_property
from typing import Annotated, Callable, Literal

from pydantic import (
    BaseModel, BeforeValidator, Field, PlainSerializer, field_serializer,
    field_validator,
)

from helpers.errors import LayoutError, ProgramInvalidError
from helpers.ir_helpers import (
    IBinOp, IBnz, ICall, IConst, IHalt, IJal, IJump, ILabel, ILoad, IMov,
    INop, IReturn, IRProgram, IStore, LINK_REGISTER, LabelConst, PtrConst,
    WordConst, validate,
)
from helpers.isa_helpers import (
    DEFAULT_CONFIG, HALT, NOP, R_MASK_CODE, R_MASK_DATA, R_RA, R_SFI,
    R_SP_PROT, R_TAG_CODE, R_TAG_DATA, RESERVED_REGISTERS, BinOp, BinOpKind,
    BitConfig, Bnz, Const, Halt, Instruction, Jal, Jump, Load, Mov, Store,
    decode_address, encode_address, is_bundle_aligned, jump_mask_constants,
    parse_instruction, render_instruction, store_mask_constants,
)

logger = logging.getLogger(__name__)


# ============================================
# Constants
# ============================================

OBJECT_FORMAT_VERSION = 1
RUNTIME_COMPONENT = 0
STARTUP_LENGTH = 5
ENTRY_GROUP_LENGTH = 6  # Halt guard + five-word entry sequence


class Mutation(str, enum.Enum):
    """Seeded compiler faults used to prove the checkers can fail."""
    WRONG_STORE_MASK = "wrong-store-mask"
    MISSING_OR = "missing-or"
    ALIGNED_ENTRY = "aligned-entry"
    MISSING_HALT_GUARD = "missing-halt-guard"
    SKIPPED_TAG_RESTORE = "skipped-tag-restore"
    CORRUPTED_POP = "corrupted-pop"


class TrustedKind(str, enum.Enum):
    ENTRY_PUSH = "EntryPush"
    RETURN_POP = "ReturnPop"
    POST_CALL_RESTORE = "PostCallRestore"
    STARTUP = "Startup"


def _parse_word(value):
    return int(value, 0) if isinstance(value, str) else value


HexWord = Annotated[
    int,
    BeforeValidator(_parse_word),
    PlainSerializer(lambda v: f"{v:#x}", return_type=str, when_used="json"),
]


# ============================================
# Pydantic Models for the Object
# ============================================

class TrustedRange(BaseModel):
    begin: HexWord
    end: HexWord = Field(description="Exclusive end address")
    kind: TrustedKind

    def __contains__(self, address: int) -> bool:
        return self.begin <= address < self.end


class EntryPoint(BaseModel):
    component: int
    procedure: int
    address: HexWord


class BlockPlacement(BaseModel):
    component: int
    block: int
    slot: int
    base: int
    size: int


class CodeExtent(BaseModel):
    component: int
    slot: int
    length: int


class ProcedureRange(BaseModel):
    component: int
    procedure: int
    begin: HexWord
    end: HexWord


class LayoutMeta(BaseModel):
    """Everything the checkers and the disassembler need to know about a layout."""
    cfg: BitConfig
    main: tuple[int, int]
    entry_points: list[EntryPoint]
    trusted_ranges: list[TrustedRange]
    block_map: list[BlockPlacement]
    code_extents: list[CodeExtent]
    procedure_ranges: list[ProcedureRange]
    imports: dict[int, list[tuple[int, int]]]
    registers: dict[str, int] = Field(default_factory=lambda: dict(RESERVED_REGISTERS))
    protected_stack_base: HexWord
    halt_anchor: HexWord
    startup: HexWord = 0
    unmapped_load_value: int = Field(0, description="Value read from never-written addresses")

    @cached_property
    def entry_by_address(self) -> dict[int, tuple[int, int]]:
        return {e.address: (e.component, e.procedure) for e in self.entry_points}

    @cached_property
    def entry_address(self) -> dict[tuple[int, int], int]:
        return {(e.component, e.procedure): e.address for e in self.entry_points}

    @cached_property
    def import_sets(self) -> dict[int, set[tuple[int, int]]]:
        return {c: set(pairs) for c, pairs in self.imports.items()}

    @cached_property
    def trusted_by_address(self) -> dict[int, TrustedRange]:
        return {a: r for r in self.trusted_ranges for a in range(r.begin, r.end)}

    @cached_property
    def code_words(self) -> frozenset[int]:
        return frozenset(encode_address(e.component, e.slot, 0, self.cfg) + offset
                         for e in self.code_extents for offset in range(e.length))

    @cached_property
    def sorted_procedures(self) -> list[ProcedureRange]:
        return sorted(self.procedure_ranges, key=lambda r: r.begin)

    @cached_property
    def procedure_begins(self) -> list[int]:
        return [r.begin for r in self.sorted_procedures]

    def trusted_range(self, address: int) -> TrustedRange | None:
        return self.trusted_by_address.get(address)

    def is_code_word(self, address: int) -> bool:
        """True when `address` holds a laid-out instruction."""
        return address in self.code_words

    def procedure_at(self, address: int) -> ProcedureRange | None:
        """The procedure whose laid-out words include `address`."""
        index = bisect.bisect_right(self.procedure_begins, address) - 1
        if index >= 0 and address < self.sorted_procedures[index].end:
            return self.sorted_procedures[index]
        return None


class CodeSlot(BaseModel):
    component: int
    slot: int
    words: list[Instruction]

    @field_serializer("words", when_used="json")
    def _render(self, words: list) -> list[str]:
        return [render_instruction(w) for w in words]

    @field_validator("words", mode="before")
    @classmethod
    def _parse(cls, words):
        return [parse_instruction(w, n) if isinstance(w, str) else w for n, w in enumerate(words, start=1)]


class DataSlot(BaseModel):
    component: int
    slot: int
    words: list[HexWord]


class MachineObject(BaseModel):
    """Laid-out machine code and data plus the layout metadata."""
    format: Literal["sfi-object"] = "sfi-object"
    format_version: int = OBJECT_FORMAT_VERSION
    cfg: BitConfig
    code: list[CodeSlot]
    data_init: list[DataSlot]
    meta: LayoutMeta
    mutation: Mutation | None = None

    @field_validator("format_version")
    @classmethod
    def _known_version(cls, version: int) -> int:
        if version != OBJECT_FORMAT_VERSION:
            raise ValueError(f"object format version {version} is not supported")
        return version

    @cached_property
    def code_map(self) -> dict[int, Instruction]:
        """Address -> instruction for every laid-out code word."""
        words = {}
        for section in self.code:
            base = encode_address(section.component, section.slot, 0, self.cfg)
            for offset, instr in enumerate(section.words):
                words[base + offset] = instr
        return words

    @cached_property
    def data_map(self) -> dict[int, int]:
        words = {}
        for section in self.data_init:
            base = encode_address(section.component, section.slot, 0, self.cfg)
            for offset, word in enumerate(section.words):
                if word:
                    words[base + offset] = word
        return words


# ============================================
# Instruction Sequences
# ============================================

def lower_store(rp: int, rs: int, mutation: Mutation | None = None) -> list[Instruction]:
    """AND-with-mask, OR-with-tag into R_SFI, then store through R_SFI."""
    tag_or = NOP if mutation is Mutation.MISSING_OR else BinOp(op=BinOpKind.OR, rs1=R_SFI, rs2=R_TAG_DATA, rd=R_SFI)
    return [
        BinOp(op=BinOpKind.AND, rs1=rp, rs2=R_MASK_DATA, rd=R_SFI),
        tag_or,
        Store(rp=R_SFI, rs=rs),
    ]


def lower_jump(rt: int) -> list[Instruction]:
    """AND-with-mask, OR-with-tag into R_SFI, then jump through R_SFI."""
    return [
        BinOp(op=BinOpKind.AND, rs1=rt, rs2=R_MASK_CODE, rd=R_SFI),
        BinOp(op=BinOpKind.OR, rs1=R_SFI, rs2=R_TAG_CODE, rd=R_SFI),
        Jump(rt=R_SFI),
    ]


def post_call_restore(component: int, cfg: BitConfig = DEFAULT_CONFIG,
                      mutation: Mutation | None = None) -> list[Instruction]:
    """Reinstall the caller's tags after a call returns."""
    if mutation is Mutation.SKIPPED_TAG_RESTORE:
        return [NOP, NOP]
    return [
        Const(imm=store_mask_constants(component, cfg)[1], rd=R_TAG_DATA),
        Const(imm=jump_mask_constants(component, cfg)[1], rd=R_TAG_CODE),
    ]


def lower_call(caller: int, entry: int, cfg: BitConfig = DEFAULT_CONFIG,
               mutation: Mutation | None = None) -> list[Instruction]:
    """Direct call to an entry point followed by the caller's tag restore."""
    return [Jal(target=entry), *post_call_restore(caller, cfg, mutation)]


def entry_sequence(component: int, cfg: BitConfig = DEFAULT_CONFIG) -> list[Instruction]:
    """Push R_RA on the protected stack, then install the callee's tags."""
    return [
        Store(rp=R_SP_PROT, rs=R_RA),
        Const(imm=1, rd=R_SFI),
        BinOp(op=BinOpKind.ADD, rs1=R_SP_PROT, rs2=R_SFI, rd=R_SP_PROT),
        Const(imm=store_mask_constants(component, cfg)[1], rd=R_TAG_DATA),
        Const(imm=jump_mask_constants(component, cfg)[1], rd=R_TAG_CODE),
    ]


def lower_return(mutation: Mutation | None = None) -> list[Instruction]:
    """Pop the protected stack and jump, unmasked, to the popped address."""
    step = BinOpKind.ADD if mutation is Mutation.CORRUPTED_POP else BinOpKind.SUB
    return [
        Const(imm=1, rd=R_SFI),
        BinOp(op=step, rs1=R_SP_PROT, rs2=R_SFI, rd=R_SP_PROT),
        Load(rp=R_SP_PROT, rd=R_SFI),
        Jump(rt=R_SFI),
    ]


def emit_startup(main_entry: int, cfg: BitConfig = DEFAULT_CONFIG,
                 mutation: Mutation | None = None) -> list[Instruction]:
    """
    Runtime startup placed at encode(0, slot 0, 0).

    Loads the two masks and the protected stack pointer, then calls main.
    main's entry sequence pushes the address of the trailing Halt, so the
    final return from main lands on it.
    """
    mask_data = store_mask_constants(1, cfg)[0]
    if mutation is Mutation.WRONG_STORE_MASK:
        mask_data |= (cfg.max_components - 1) << cfg.offset_bits
    return [
        Const(imm=mask_data, rd=R_MASK_DATA),
        Const(imm=jump_mask_constants(1, cfg)[0], rd=R_MASK_CODE),
        Const(imm=encode_address(RUNTIME_COMPONENT, 1, 0, cfg), rd=R_SP_PROT),
        Jal(target=main_entry),
        HALT,
    ]


# ============================================
# Layout
# ============================================

@dataclass
class _Resolver:
    labels: dict[tuple[int, int, str], int] = field(default_factory=dict)
    returns: dict[tuple[int, int, int], int] = field(default_factory=dict)
    entries: dict[tuple[int, int], int] = field(default_factory=dict)
    blocks: dict[tuple[int, int], int] = field(default_factory=dict)


# A word is either final or built once all addresses are known.
_Word = Instruction | Callable[[_Resolver, int], Instruction]


@dataclass
class _Chunk:
    words: list[_Word]
    atomic: bool = False
    align: bool = False
    falls_through: bool = True
    trusted: tuple[int, int, TrustedKind] | None = None
    defines_return: int | None = None


@dataclass
class _ProcLayout:
    component: int
    procedure: int
    words: list[_Word]
    labels: dict[str, int]
    returns: dict[int, int]
    entry: int
    trusted: list[tuple[int, int, TrustedKind]]


def _lower_instr(comp: int, proc: int, index: int, instr, cfg: BitConfig,
                 mutation: Mutation | None) -> _Chunk:
    mask = cfg.word_mask
    match instr:
        case INop():
            return _Chunk([NOP])
        case IConst(value=WordConst(value=v), rd=rd):
            return _Chunk([Const(imm=v & mask, rd=rd)])
        case IConst(value=PtrConst(block=b, offset=off), rd=rd):
            return _Chunk([lambda r, a: Const(imm=(r.blocks[(comp, b)] + off) & mask, rd=rd)])
        case IConst(value=LabelConst(label=name), rd=rd):
            return _Chunk([lambda r, a: Const(imm=r.labels[(comp, proc, name)], rd=rd)])
        case IMov(rs=rs, rd=rd):
            return _Chunk([Mov(rs=rs, rd=rd)])
        case IBinOp(binop=op, rs1=rs1, rs2=rs2, rd=rd):
            return _Chunk([BinOp(op=op, rs1=rs1, rs2=rs2, rd=rd)])
        case ILoad(rp=rp, rd=rd):
            return _Chunk([Load(rp=rp, rd=rd)])
        case IStore(rp=rp, rs=rs):
            return _Chunk(lower_store(rp, rs, mutation), atomic=True)
        case IBnz(rs=rs, label=name):
            return _Chunk([lambda r, a: Bnz(rs=rs, rel=r.labels[(comp, proc, name)] - a)])
        case IJump(rt=rt):
            return _Chunk(lower_jump(rt), atomic=True, falls_through=False)
        case IJal(label=name):
            return _Chunk([
                lambda r, a: Const(imm=r.returns[(comp, proc, index + 1)], rd=LINK_REGISTER),
                lambda r, a: Jal(target=r.labels[(comp, proc, name)]),
            ], atomic=True, falls_through=False)
        case ICall(component=callee, procedure=target):
            restore = post_call_restore(comp, cfg, mutation)
            return _Chunk(
                [lambda r, a: Jal(target=r.entries[(callee, target)]), *restore],
                atomic=True, trusted=(1, 3, TrustedKind.POST_CALL_RESTORE),
            )
        case IReturn():
            return _Chunk(lower_return(mutation), atomic=True, falls_through=False,
                          trusted=(0, 4, TrustedKind.RETURN_POP))
        case IHalt():
            return _Chunk([HALT], falls_through=False)
    raise TypeError(f"cannot lower {instr!r}")


def _layout_procedure(program: IRProgram, comp_id: int, proc_id: int, cfg: BitConfig,
                      mutation: Mutation | None) -> _ProcLayout:
    """Lay out one procedure relative to a bundle-aligned start."""
    comp = program.component(comp_id)
    code = comp.procedures[proc_id]
    bundle = cfg.bundle_size
    address_taken = {
        instr.value.label for instr in code
        if isinstance(instr, IConst) and isinstance(instr.value, LabelConst)
    }

    words: list[_Word] = []
    labels: dict[str, int] = {}
    returns: dict[int, int] = {}
    trusted: list[tuple[int, int, TrustedKind]] = []
    falls_through = True

    def place(chunk: _Chunk, pending_labels: list[str]) -> None:
        nonlocal falls_through
        pos = len(words) % bundle
        if (chunk.align and pos) or (chunk.atomic and pos + len(chunk.words) > bundle):
            gap = bundle - pos
            if falls_through:
                words.append(lambda r, a, gap=gap: Jal(target=a + gap))
                words.extend([HALT] * (gap - 1))
            else:
                words.extend([HALT] * gap)
        start = len(words)
        for name in pending_labels:
            labels[name] = start
        if chunk.defines_return is not None:
            returns[chunk.defines_return] = start
        if chunk.trusted:
            begin, end, kind = chunk.trusted
            trusted.append((start + begin, start + end, kind))
        words.extend(chunk.words)
        falls_through = chunk.falls_through

    entry = entry_sequence(comp_id, cfg)
    if mutation is Mutation.ALIGNED_ENTRY:
        place(_Chunk(entry, atomic=True, trusted=(0, 5, TrustedKind.ENTRY_PUSH)), [])
        entry_offset = 0
    else:
        guard = NOP if mutation is Mutation.MISSING_HALT_GUARD else HALT
        place(_Chunk([guard, *entry], atomic=True, trusted=(1, 6, TrustedKind.ENTRY_PUSH)), [])
        entry_offset = 1

    pending: list[str] = []
    align_next = False
    return_point: int | None = None
    for index, instr in enumerate(code):
        if isinstance(instr, ILabel):
            pending.append(instr.label)
            align_next = align_next or instr.label in address_taken
            continue
        chunk = _lower_instr(comp_id, proc_id, index, instr, cfg, mutation)
        chunk.align = chunk.align or align_next
        chunk.defines_return = return_point
        place(chunk, pending)
        pending, align_next, return_point = [], False, None
        if isinstance(instr, IJal):
            align_next, return_point = True, index + 1

    # Running past the last instruction halts.
    tail = _Chunk([HALT], falls_through=False,
                  align=align_next or any(name in address_taken for name in pending))
    tail.defines_return = return_point
    place(tail, pending)
    words.extend([HALT] * (-len(words) % bundle))
    return _ProcLayout(comp_id, proc_id, words, labels, returns, entry_offset, trusted)


def layout(program: IRProgram, cfg: BitConfig = DEFAULT_CONFIG,
           mutation: Mutation | None = None) -> tuple[LayoutMeta, list[CodeSlot], list[DataSlot]]:
    """
    Assign every block and procedure its slot and resolve all addresses.

    Data block b of rank k in its component goes to odd slot 2k+1 at base 0.
    Procedures start on bundle boundaries and are packed into even slots.

    Raises:
        LayoutError: LayoutOverflow, TooManyComponents or BundleTooSmall
    """
    if cfg.bundle_size < ENTRY_GROUP_LENGTH:
        raise LayoutError("BundleTooSmall", f"bundles of {cfg.bundle_size} words cannot hold a "
                                            f"{ENTRY_GROUP_LENGTH}-word entry group")
    if len(program.components) >= cfg.max_components or any(
            c.id >= cfg.max_components for c in program.components):
        raise LayoutError("TooManyComponents", f"component ids must lie in 1..{cfg.max_components - 1}")

    capacity = cfg.slot_capacity
    resolver = _Resolver()
    block_map: list[BlockPlacement] = []
    data_init: list[DataSlot] = []
    for comp in program.components:
        for rank, (b, block) in enumerate(sorted(comp.data_blocks.items())):
            if block.size > capacity:
                raise LayoutError("LayoutOverflow", f"c{comp.id} block {b} has {block.size} words, "
                                                    f"a slot holds {capacity}")
            slot = 2 * rank + 1
            resolver.blocks[(comp.id, b)] = encode_address(comp.id, slot, 0, cfg)
            block_map.append(BlockPlacement(component=comp.id, block=b, slot=slot, base=0, size=block.size))
            data_init.append(DataSlot(component=comp.id, slot=slot, words=list(block.init)))

    # Procedures: relative layout first, then placement into slots.
    placed: list[tuple[_ProcLayout, int]] = []
    extents: dict[tuple[int, int], int] = {}
    for comp in program.components:
        slot, cursor = 0, 0
        for p in sorted(comp.procedures):
            proc = _layout_procedure(program, comp.id, p, cfg, mutation)
            size = len(proc.words)
            if size > capacity:
                raise LayoutError("LayoutOverflow", f"c{comp.id}.p{p} needs {size} words, "
                                                    f"a slot holds {capacity}")
            if cursor + size > capacity:
                slot, cursor = slot + 2, 0
            base = encode_address(comp.id, slot, cursor, cfg)
            placed.append((proc, base))
            cursor += size
            extents[(comp.id, slot)] = cursor
            resolver.entries[(comp.id, p)] = base + proc.entry
            for name, rel in proc.labels.items():
                resolver.labels[(comp.id, p, name)] = base + rel
            for index, rel in proc.returns.items():
                resolver.returns[(comp.id, p, index)] = base + rel

    main_entry = resolver.entries[program.main]
    startup = emit_startup(main_entry, cfg, mutation)
    extents[(RUNTIME_COMPONENT, 0)] = len(startup)
    slot_words: dict[tuple[int, int], list[Instruction]] = {(RUNTIME_COMPONENT, 0): startup}
    trusted = [TrustedRange(begin=0, end=len(startup), kind=TrustedKind.STARTUP)]
    procedure_ranges: list[ProcedureRange] = []
    for proc, base in placed:
        c, slot, offset = decode_address(base, cfg)
        words = slot_words.setdefault((c, slot), [])
        words.extend([HALT] * (offset - len(words)))
        for rel, word in enumerate(proc.words):
            words.append(word if not callable(word) else word(resolver, base + rel))
        trusted.extend(TrustedRange(begin=base + b, end=base + e, kind=k) for b, e, k in proc.trusted)
        procedure_ranges.append(ProcedureRange(component=c, procedure=proc.procedure,
                                               begin=base, end=base + len(proc.words)))

    meta = LayoutMeta(
        cfg=cfg,
        main=program.main,
        entry_points=[EntryPoint(component=c, procedure=p, address=a)
                      for (c, p), a in sorted(resolver.entries.items())],
        trusted_ranges=sorted(trusted, key=lambda r: r.begin),
        block_map=block_map,
        code_extents=[CodeExtent(component=c, slot=s, length=n) for (c, s), n in sorted(extents.items())],
        procedure_ranges=procedure_ranges,
        imports={comp.id: sorted(comp.imports) for comp in program.components},
        protected_stack_base=encode_address(RUNTIME_COMPONENT, 1, 0, cfg),
        halt_anchor=len(startup) - 1,
    )
    code = [CodeSlot(component=c, slot=s, words=w) for (c, s), w in sorted(slot_words.items())]
    return meta, code, data_init


# ============================================
# Compilation
# ============================================

def compile_program(program: IRProgram, cfg: BitConfig = DEFAULT_CONFIG,
                    mutation: Mutation | None = None) -> MachineObject:
    """
    Compile a validated IR program for the target machine.

    Args:
        program: The IR program
        cfg: Address field widths
        mutation: Test-only compiler fault to seed into the output

    Returns:
        A MachineObject; identical inputs give identical objects

    Raises:
        ProgramInvalidError: If the program does not validate
        LayoutError: If code or data does not fit, or ids exceed the component field
    """
    errors = validate(program)
    if errors:
        raise ProgramInvalidError(errors)
    for comp in program.components:
        for p, code in comp.procedures.items():
            for index, instr in enumerate(code):
                if isinstance(instr, ICall) and instr.component != comp.id \
                        and (instr.component, instr.procedure) not in comp.imports:
                    raise LayoutError("ImportViolation",
                                      f"c{comp.id}.p{p}[{index}] calls c{instr.component}.p{instr.procedure}")
    meta, code, data_init = layout(program, cfg, mutation)
    logger.info("compiled %d component(s) into %d code slot(s)", len(program.components), len(code))
    return MachineObject(cfg=cfg, code=code, data_init=data_init, meta=meta, mutation=mutation)


# ============================================
# Static Self-Check
# ============================================

def _is_mask_pair(first, second, mask_reg: int, tag_reg: int) -> bool:
    return (isinstance(first, BinOp) and first.op is BinOpKind.AND and first.rs2 == mask_reg
            and first.rd == R_SFI
            and isinstance(second, BinOp) and second.op is BinOpKind.OR and second.rs1 == R_SFI
            and second.rs2 == tag_reg and second.rd == R_SFI)


def verify_object(obj: MachineObject) -> list[str]:
    """
    Static verification of compiled output.

    Returns:
        Human-readable issues; empty when every store and jump sits in an
        intact sequence, no trusted sequence straddles a bundle, and every
        entry point is unaligned and Halt-guarded
    """
    cfg, meta, code = obj.cfg, obj.meta, obj.code_map
    bundle = cfg.bundle_size
    issues: list[str] = []

    def same_bundle(a: int, b: int) -> bool:
        return a // bundle == b // bundle

    ranges = meta.trusted_ranges
    for r in ranges:
        if not same_bundle(r.begin, r.end - 1):
            issues.append(f"{r.kind.value} range {r.begin:#x}..{r.end:#x} straddles a bundle")
    for left, right in zip(ranges, ranges[1:]):
        if left.end > right.begin:
            issues.append(f"trusted ranges at {left.begin:#x} and {right.begin:#x} overlap")

    if [code.get(a) for a in range(STARTUP_LENGTH)] != emit_startup(meta.entry_address[meta.main], cfg):
        issues.append("startup sequence is not the canonical one")

    for e in meta.entry_points:
        if is_bundle_aligned(e.address, cfg):
            issues.append(f"entry c{e.component}.p{e.procedure} at {e.address:#x} is bundle-aligned")
        if not isinstance(code.get(e.address - 1), Halt):
            issues.append(f"entry c{e.component}.p{e.procedure} at {e.address:#x} lacks a Halt guard")
        actual = [code.get(e.address + i) for i in range(5)]
        if actual != entry_sequence(e.component, cfg):
            issues.append(f"entry c{e.component}.p{e.procedure} at {e.address:#x} has a corrupted push sequence")

    reserved = set(RESERVED_REGISTERS.values())
    for addr, instr in sorted(code.items()):
        c = decode_address(addr, cfg).component
        trusted = meta.trusted_range(addr)
        prev1, prev2 = code.get(addr - 1), code.get(addr - 2)
        if isinstance(instr, Store):
            intact = (_is_mask_pair(prev2, prev1, R_MASK_DATA, R_TAG_DATA) and instr.rp == R_SFI
                      and same_bundle(addr - 2, addr))
            if not intact and not (trusted and trusted.kind is TrustedKind.ENTRY_PUSH):
                issues.append(f"store at {addr:#x} is not sandboxed")
        elif isinstance(instr, Jump):
            intact = (_is_mask_pair(prev2, prev1, R_MASK_CODE, R_TAG_CODE) and instr.rt == R_SFI
                      and same_bundle(addr - 2, addr))
            is_return = trusted is not None and trusted.kind is TrustedKind.RETURN_POP and addr == trusted.end - 1
            if is_return and [code.get(addr - i) for i in (3, 2, 1, 0)] != lower_return():
                issues.append(f"return sequence ending at {addr:#x} is corrupted")
            if not intact and not is_return:
                issues.append(f"jump at {addr:#x} is not sandboxed")
        elif isinstance(instr, Jal):
            target = instr.target
            callee = meta.entry_by_address.get(target)
            if c == RUNTIME_COMPONENT:
                if callee != meta.main:
                    issues.append(f"runtime call at {addr:#x} does not target main")
            elif callee is not None and callee[0] != c:
                if callee not in meta.import_sets.get(c, set()):
                    issues.append(f"call at {addr:#x} targets c{callee[0]}.p{callee[1]}, which is not imported")
                if [code.get(addr + 1), code.get(addr + 2)] != post_call_restore(c, cfg):
                    issues.append(f"call at {addr:#x} is not followed by the tag restore")
            elif callee is None:
                d = decode_address(target, cfg)
                if d.component != c or target not in code:
                    issues.append(f"call at {addr:#x} leaves its component's code")
        if isinstance(instr, (Const, Mov, BinOp, Load)) and instr.rd in reserved and trusted is None:
            nxt = code.get(addr + 1)
            first_of_pair = (_is_mask_pair(instr, nxt, R_MASK_DATA, R_TAG_DATA)
                             or _is_mask_pair(instr, nxt, R_MASK_CODE, R_TAG_CODE))
            if not first_of_pair and not _is_mask_pair(prev1, instr, R_MASK_DATA, R_TAG_DATA) \
                    and not _is_mask_pair(prev1, instr, R_MASK_CODE, R_TAG_CODE):
                issues.append(f"{render_instruction(instr)} at {addr:#x} writes a reserved register")
    return issues


# ============================================
# Disassembly
# ============================================

def disassemble(obj: MachineObject) -> str:
    """Listing of every code slot with bundle boundaries, entries and trusted ranges."""
    cfg, meta = obj.cfg, obj.meta
    entries = {e.address: f"c{e.component}.p{e.procedure}" for e in meta.entry_points}
    lines = [f"; sfi-object v{obj.format_version}  offset_bits={cfg.offset_bits} "
             f"component_bits={cfg.component_bits} bundle_bits={cfg.bundle_bits} word_bits={cfg.word_bits}"]
    if obj.mutation:
        lines.append(f"; MUTATED: {obj.mutation.value}")
    for section in obj.code:
        base = encode_address(section.component, section.slot, 0, cfg)
        lines.append("")
        lines.append(f"; component {section.component} slot {section.slot} (code, {len(section.words)} words)")
        for offset, instr in enumerate(section.words):
            addr = base + offset
            if offset % cfg.bundle_size == 0:
                lines.append(f"; ---- bundle {offset // cfg.bundle_size} ----")
            notes = []
            if addr in entries:
                notes.append(f"entry {entries[addr]}")
            if addr == meta.halt_anchor:
                notes.append("halt anchor")
            trusted = meta.trusted_range(addr)
            if trusted is not None:
                notes.append(trusted.kind.value)
            note = f"  ; {', '.join(notes)}" if notes else ""
            lines.append(f"{addr:#010x}: {render_instruction(instr)}{note}")
    for placement in meta.block_map:
        lines.append(f"; data c{placement.component} block {placement.block} -> slot {placement.slot} "
                     f"({placement.size} words)")
    return "\n".join(lines) + "\n"
