"""
Random IR Program Generation

Generates programs that always validate. WellBehaved programs are free of
undefined behavior apart from running out of fuel; Wild programs compute
store addresses and jump targets from arbitrary words, so only the machine
level gives them meaning.
"""

import enum
import logging
import random

from pydantic import BaseModel, Field, model_validator

from helpers.ir_helpers import (
    LINK_REGISTER, DataBlock, IBinOp, IBnz, ICall, IConst,
    IHalt, IJal, IJump, ILabel, ILoad, IMov, INop, IReturn, IRComponent,
    IRProgram, IStore, LabelConst, PtrConst, WordConst,
)
from helpers.isa_helpers import DEFAULT_CONFIG, BinOpKind, BitConfig

logger = logging.getLogger(__name__)

INT_REGISTERS = list(range(20))
PTR_REGISTER, ADDR_REGISTER, TARGET_REGISTER, DELTA_REGISTER = 20, 21, 22, 23

INSTRUCTION_KINDS = ("nop", "const", "mov", "binop", "load", "store", "bnz", "jump", "jal", "call")
# Calls and stores exercise the instrumentation, so they are drawn twice as often.
DEFAULT_WEIGHTS = {kind: 2.0 if kind in ("call", "store") else 1.0 for kind in INSTRUCTION_KINDS}

MAX_BLOCK_SIZE = 8
MAX_SUBROUTINES = 2
WILD_JUMP_DELTA = (-32, 16)


class GenMode(str, enum.Enum):
    WELL_BEHAVED = "wellbehaved"
    WILD = "wild"


class GenConfig(BaseModel):
    """Program generator settings; every range is inclusive."""
    seed: int = Field(0, ge=0, lt=1 << 64)
    mode: GenMode = GenMode.WELL_BEHAVED
    components: tuple[int, int] = Field((2, 4), description="Components per program")
    procedures: tuple[int, int] = Field((1, 3), description="Procedures per component")
    instructions: tuple[int, int] = Field((5, 40), description="Instructions per procedure body")
    blocks: tuple[int, int] = Field((1, 3), description="Data blocks per component")
    fuel: int = Field(10000, ge=1, description="Step budget for the IR interpreter")
    weights: dict[str, float] = Field(default_factory=lambda: dict(DEFAULT_WEIGHTS))

    @model_validator(mode="after")
    def _check_ranges(self) -> "GenConfig":
        for name in ("components", "procedures", "instructions", "blocks"):
            low, high = getattr(self, name)
            if not 1 <= low <= high:
                raise ValueError(f"{name} range {low}..{high} is empty or starts below 1")
        if self.components[1] >= DEFAULT_CONFIG.max_components:
            raise ValueError(f"at most {DEFAULT_CONFIG.max_components - 1} components fit the address layout")
        unknown = set(self.weights) - set(INSTRUCTION_KINDS)
        if unknown:
            raise ValueError(f"unknown instruction kinds in weights: {sorted(unknown)}")
        if any(w < 0 for w in self.weights.values()) or sum(self.weights.values()) <= 0:
            raise ValueError("weights must be nonnegative with a positive sum")
        return self


class _ProcedureGenerator:
    """Builds one procedure body for component `comp`."""

    def __init__(self, rng: random.Random, cfg: GenConfig, comp: IRComponent, proc: int,
                 callees: list[tuple[int, int]], is_main: bool, bits: BitConfig):
        self.rng = rng
        self.cfg = cfg
        self.comp = comp
        self.proc = proc
        self.callees = callees
        self.is_main = is_main
        self.bits = bits
        self.wild = cfg.mode is GenMode.WILD
        self.labels = [f"L{i}" for i in range(max(1, rng.randint(*cfg.instructions) // 6))]
        self.subroutines: list[str] = []
        self.calls: set[tuple[int, int]] = set()
        kinds = [k for k in INSTRUCTION_KINDS if cfg.weights.get(k, 0) > 0]
        self.kinds = kinds
        self.kind_weights = [cfg.weights[k] for k in kinds]

    def int_reg(self) -> int:
        return self.rng.choice(INT_REGISTERS)

    def word(self) -> int:
        return self.rng.getrandbits(self.bits.word_bits)

    def pointer(self, rd: int = PTR_REGISTER) -> tuple[list, int]:
        """Instructions leaving an in-bounds pointer to an own block in the returned register."""
        b = self.rng.choice(sorted(self.comp.data_blocks))
        size = self.comp.data_blocks[b].size
        target = self.rng.randrange(size)
        if self.rng.random() < 0.5:
            return [IConst(value=PtrConst(block=b, offset=target), rd=rd)], rd
        start = self.rng.randrange(size)
        op = BinOpKind.ADD if target >= start else BinOpKind.SUB
        return [
            IConst(value=PtrConst(block=b, offset=start), rd=PTR_REGISTER),
            IConst(value=WordConst(value=abs(target - start)), rd=DELTA_REGISTER),
            IBinOp(binop=op, rs1=PTR_REGISTER, rs2=DELTA_REGISTER, rd=ADDR_REGISTER),
        ], ADDR_REGISTER

    def wild_address(self) -> tuple[list, int]:
        """An address computed from arbitrary words, for stores and loads."""
        mask = self.bits.word_mask
        match self.rng.randrange(5):
            case 0:
                return [IConst(value=WordConst(value=self.word()), rd=ADDR_REGISTER)], ADDR_REGISTER
            case 1:
                slot_limit = 1 << min(8, self.bits.word_bits - self.bits.slot_shift)
                raw = (self.rng.randrange(self.bits.slot_capacity)
                       | self.rng.randrange(self.bits.max_components) << self.bits.offset_bits
                       | self.rng.randrange(slot_limit) << self.bits.slot_shift)
                return [IConst(value=WordConst(value=raw), rd=ADDR_REGISTER)], ADDR_REGISTER
            case 2:
                b = self.rng.choice(sorted(self.comp.data_blocks))
                delta = self.rng.randint(-2 * self.bits.slot_capacity, 2 * self.bits.slot_capacity)
                return [
                    IConst(value=PtrConst(block=b, offset=0), rd=PTR_REGISTER),
                    IConst(value=WordConst(value=delta & mask), rd=DELTA_REGISTER),
                    IBinOp(binop=BinOpKind.ADD, rs1=PTR_REGISTER, rs2=DELTA_REGISTER, rd=ADDR_REGISTER),
                ], ADDR_REGISTER
            case 3:
                setup, reg = self.pointer()
                return [*setup, ILoad(rp=reg, rd=ADDR_REGISTER)], ADDR_REGISTER
        return [IMov(rs=self.int_reg(), rd=ADDR_REGISTER)], ADDR_REGISTER

    def wild_jump(self) -> list:
        mask = self.bits.word_mask
        match self.rng.randrange(4):
            case 0 | 1:
                delta = self.rng.randint(*WILD_JUMP_DELTA)
                return [
                    IConst(value=LabelConst(label=self.rng.choice(self.labels)), rd=TARGET_REGISTER),
                    IConst(value=WordConst(value=delta & mask), rd=DELTA_REGISTER),
                    IBinOp(binop=BinOpKind.ADD, rs1=TARGET_REGISTER, rs2=DELTA_REGISTER, rd=TARGET_REGISTER),
                    IJump(rt=TARGET_REGISTER),
                ]
            case 2:
                setup, reg = self.wild_address()
                return [*setup, IJump(rt=reg)]
        return [IJump(rt=self.rng.choice([LINK_REGISTER, *INT_REGISTERS]))]

    def group(self, kind: str, in_subroutine: bool = False) -> list:
        """One instruction group of the given kind."""
        rng = self.rng
        match kind:
            case "nop":
                return [INop()]
            case "const":
                return [IConst(value=WordConst(value=self.word()), rd=self.int_reg())]
            case "mov":
                return [IMov(rs=self.int_reg(), rd=self.int_reg())]
            case "binop":
                return [IBinOp(binop=rng.choice(list(BinOpKind)), rs1=self.int_reg(),
                               rs2=self.int_reg(), rd=self.int_reg())]
            case "load":
                setup, reg = self.wild_address() if self.wild and rng.random() < 0.3 else self.pointer()
                return [*setup, ILoad(rp=reg, rd=self.int_reg())]
            case "store":
                setup, reg = self.wild_address() if self.wild else self.pointer()
                return [*setup, IStore(rp=reg, rs=self.int_reg())]
        if in_subroutine:
            return [IBinOp(binop=BinOpKind.ADD, rs1=self.int_reg(), rs2=self.int_reg(), rd=self.int_reg())]
        match kind:
            case "bnz":
                return [IBnz(rs=self.int_reg(), label=rng.choice(self.labels))]
            case "jump":
                if self.wild:
                    return self.wild_jump()
                return [IConst(value=LabelConst(label=rng.choice(self.labels)), rd=TARGET_REGISTER),
                        IJump(rt=TARGET_REGISTER)]
            case "jal":
                if len(self.subroutines) < MAX_SUBROUTINES and rng.random() < 0.5:
                    self.subroutines.append(f"S{len(self.subroutines)}")
                if not self.subroutines:
                    return [INop()]
                return [IJal(label=rng.choice(self.subroutines))]
            case "call":
                if not self.callees:
                    return [INop()]
                target = rng.choice(self.callees)
                if target[0] != self.comp.id:
                    self.calls.add(target)
                return [ICall(component=target[0], procedure=target[1])]
        raise ValueError(f"unknown instruction kind {kind!r}")

    def build(self) -> list:
        rng = self.rng
        target = rng.randint(*self.cfg.instructions)
        groups: list[list] = []
        if self.is_main:
            groups.extend([IConst(value=WordConst(value=rng.getrandbits(16)), rd=r)] for r in INT_REGISTERS)
        count = 0
        while count < target:
            group = self.group(rng.choices(self.kinds, self.kind_weights)[0])
            groups.append(group)
            count += len(group)

        # Wild mode keeps one label at the body start so offset jumps reach the entry group.
        positions = [0] if self.wild else []
        positions += [rng.randint(0, len(groups)) for _ in self.labels[len(positions):]]
        for label, position in sorted(zip(self.labels, positions), key=lambda lp: -lp[1]):
            groups.insert(position, [ILabel(label=label)])

        body = [instr for group in groups for instr in group]
        terminator = IReturn() if not self.is_main or rng.random() < 0.7 else IHalt()
        body.append(terminator)
        for name in self.subroutines:
            body.append(ILabel(label=name))
            for _ in range(rng.randint(1, 4)):
                body.extend(self.group(rng.choice(("const", "binop", "load", "store")), in_subroutine=True))
            body.append(IJump(rt=LINK_REGISTER))
        return body


def gen_program(cfg: GenConfig, bits: BitConfig = DEFAULT_CONFIG) -> IRProgram:
    """
    Generate a valid program, deterministically in cfg.seed.

    The call graph is acyclic: a procedure calls only higher-numbered
    procedures of its own component or procedures of higher-numbered
    components. Exports and imports are derived from the calls made.
    """
    rng = random.Random(cfg.seed)
    count = rng.randint(*cfg.components)
    components: list[IRComponent] = []
    for cid in range(1, count + 1):
        comp = IRComponent(id=cid)
        for b in range(rng.randint(*cfg.blocks)):
            size = rng.randint(1, MAX_BLOCK_SIZE)
            comp.data_blocks[b] = DataBlock(size=size, init=[rng.getrandbits(bits.word_bits) for _ in range(size)])
        comp.procedures = {p: [] for p in range(rng.randint(*cfg.procedures))}
        components.append(comp)

    main = (1, 0)
    components[0].exports.add(0)
    by_id = {comp.id: comp for comp in components}
    for comp in components:
        for p in sorted(comp.procedures):
            callees = [(comp.id, q) for q in comp.procedures if q > p]
            callees += [(other.id, q) for other in components if other.id > comp.id for q in other.procedures]
            gen = _ProcedureGenerator(rng, cfg, comp, p, callees, (comp.id, p) == main, bits)
            comp.procedures[p] = gen.build()
            for callee in gen.calls:
                comp.imports.add(callee)
                by_id[callee[0]].exports.add(callee[1])

    program = IRProgram(components=components, main=main)
    logger.debug("seed %d: %d components, %d instructions", cfg.seed, count, program.instruction_count())
    return program


