"""
Target Machine Instruction Set

This module defines the basic RISC machine the compiler targets:
1. Bit-level configuration of the slot-structured address space
2. The address codec and the SFI masking arithmetic
3. Register conventions (general-purpose vs. reserved)
4. The instruction set and its one-line assembly syntax

Everything here is pure value-level arithmetic.
"""

import enum
import re
from functools import lru_cache
from typing import Annotated, Literal, NamedTuple, Union

from pydantic import BaseModel, ConfigDict, Field, model_validator

from helpers.errors import FieldOverflowError, ParseError, ReservedComponentError


# ============================================
# Bit Configuration
# ============================================

class BitConfig(BaseModel):
    """Widths of the address fields and of the machine word."""
    model_config = ConfigDict(frozen=True)

    offset_bits: int = Field(12, ge=1, description="Address bits for the in-slot offset")
    component_bits: int = Field(4, ge=1, description="Address bits for the component identifier")
    bundle_bits: int = Field(4, ge=1, description="Low offset bits zeroed by jump alignment")
    word_bits: int = Field(64, ge=8, le=512, description="Machine word width")

    @model_validator(mode="after")
    def _check_widths(self) -> "BitConfig":
        if self.bundle_bits > self.offset_bits:
            raise ValueError("bundle_bits must not exceed offset_bits")
        if self.offset_bits + self.component_bits >= self.word_bits:
            raise ValueError("offset_bits + component_bits must leave room for the slot field")
        return self

    @property
    def word_mask(self) -> int:
        return (1 << self.word_bits) - 1

    @property
    def slot_shift(self) -> int:
        return self.offset_bits + self.component_bits

    @property
    def slot_capacity(self) -> int:
        """Words per slot."""
        return 1 << self.offset_bits

    @property
    def bundle_size(self) -> int:
        return 1 << self.bundle_bits

    @property
    def max_components(self) -> int:
        """Addressable components, the runtime's id 0 included."""
        return 1 << self.component_bits


DEFAULT_CONFIG = BitConfig()


# ============================================
# Address Codec
# ============================================

class DecodedAddress(NamedTuple):
    """Field view of a raw address."""
    component: int
    slot: int
    offset: int

    @property
    def is_data(self) -> bool:
        return self.slot & 1 == 1

    @property
    def is_code(self) -> bool:
        return self.slot & 1 == 0


def encode_address(component: int, slot: int, offset: int, cfg: BitConfig = DEFAULT_CONFIG) -> int:
    """
    Compose a raw address from its fields.

    Args:
        component: Component identifier
        slot: Slot number (odd for data, even for code)
        offset: Word offset inside the slot
        cfg: Field widths

    Returns:
        offset | component << offset_bits | slot << (offset_bits + component_bits)

    Raises:
        FieldOverflowError: If a field does not fit its width
    """
    slot_bits = cfg.word_bits - cfg.slot_shift
    for name, value, bits in (
        ("offset", offset, cfg.offset_bits),
        ("component", component, cfg.component_bits),
        ("slot", slot, slot_bits),
    ):
        if value < 0 or value >= 1 << bits:
            raise FieldOverflowError(name, value, bits)
    return offset | (component << cfg.offset_bits) | (slot << cfg.slot_shift)


def decode_address(raw: int, cfg: BitConfig = DEFAULT_CONFIG) -> DecodedAddress:
    """Split a raw word into (component, slot, offset)."""
    raw &= cfg.word_mask
    return DecodedAddress(
        component=(raw >> cfg.offset_bits) & (cfg.max_components - 1),
        slot=raw >> cfg.slot_shift,
        offset=raw & (cfg.slot_capacity - 1),
    )


def is_bundle_aligned(raw: int, cfg: BitConfig = DEFAULT_CONFIG) -> bool:
    return raw & (cfg.bundle_size - 1) == 0


# ============================================
# SFI Masking
# ============================================

def _component_field(cfg: BitConfig) -> int:
    return (cfg.max_components - 1) << cfg.offset_bits


def _check_sandboxed(component: int, cfg: BitConfig) -> None:
    if component == 0:
        raise ReservedComponentError("component 0 is reserved for the SFI runtime")
    if not 0 < component < cfg.max_components:
        raise FieldOverflowError("component", component, cfg.component_bits)


@lru_cache(maxsize=None)
def store_mask_constants(component: int, cfg: BitConfig = DEFAULT_CONFIG) -> tuple[int, int]:
    """
    Mask and tag that force a store address into `component`'s data slots.

    The mask clears the component field and the slot's least significant
    bit; the tag sets the component field and that bit.

    Raises:
        ReservedComponentError: For component 0
    """
    _check_sandboxed(component, cfg)
    slot_lsb = 1 << cfg.slot_shift
    mask = ~(_component_field(cfg) | slot_lsb) & cfg.word_mask
    tag = (component << cfg.offset_bits) | slot_lsb
    return mask, tag


@lru_cache(maxsize=None)
def jump_mask_constants(component: int, cfg: BitConfig = DEFAULT_CONFIG) -> tuple[int, int]:
    """
    Mask and tag that force a jump target onto a bundle start of
    `component`'s code slots. The slot bit stays clear, so the slot is even.

    Raises:
        ReservedComponentError: For component 0
    """
    _check_sandboxed(component, cfg)
    slot_lsb = 1 << cfg.slot_shift
    mask = ~(_component_field(cfg) | slot_lsb | (cfg.bundle_size - 1)) & cfg.word_mask
    return mask, component << cfg.offset_bits


def sandbox(raw: int, mask: int, tag: int) -> int:
    """Apply the AND-then-OR pair of a sandboxing sequence."""
    return (raw & mask) | tag


# ============================================
# Registers
# ============================================

NUM_REGISTERS = 32
GENERAL_REGISTERS = range(25)

R_RA = 25
R_SFI = 26
R_MASK_DATA = 27
R_MASK_CODE = 28
R_TAG_DATA = 29
R_TAG_CODE = 30
R_SP_PROT = 31

RESERVED_REGISTERS = {
    "R_RA": R_RA,
    "R_SFI": R_SFI,
    "R_MASK_DATA": R_MASK_DATA,
    "R_MASK_CODE": R_MASK_CODE,
    "R_TAG_DATA": R_TAG_DATA,
    "R_TAG_CODE": R_TAG_CODE,
    "R_SP_PROT": R_SP_PROT,
}

Reg = Annotated[int, Field(ge=0, lt=NUM_REGISTERS)]


# ============================================
# Instructions
# ============================================

class BinOpKind(str, enum.Enum):
    ADD = "add"
    SUB = "sub"
    MUL = "mul"
    EQ = "eq"
    LEQ = "leq"
    AND = "and"
    OR = "or"
    SHL = "shl"


def eval_binop(op: BinOpKind, a: int, b: int, cfg: BitConfig = DEFAULT_CONFIG) -> int:
    """Word semantics of a binary operation (unsigned, wrapping)."""
    mask = cfg.word_mask
    if op is BinOpKind.ADD:
        return (a + b) & mask
    if op is BinOpKind.SUB:
        return (a - b) & mask
    if op is BinOpKind.MUL:
        return (a * b) & mask
    if op is BinOpKind.EQ:
        return int(a == b)
    if op is BinOpKind.LEQ:
        return int(a <= b)
    if op is BinOpKind.AND:
        return a & b
    if op is BinOpKind.OR:
        return a | b
    return (a << (b % cfg.word_bits)) & mask


class _Instr(BaseModel):
    model_config = ConfigDict(frozen=True)


class Nop(_Instr):
    kind: Literal["nop"] = "nop"


class Const(_Instr):
    """Full-word immediate, so masks and tags load in one instruction."""
    kind: Literal["const"] = "const"
    imm: int = Field(ge=0)
    rd: Reg


class Mov(_Instr):
    kind: Literal["mov"] = "mov"
    rs: Reg
    rd: Reg


class BinOp(_Instr):
    kind: Literal["binop"] = "binop"
    op: BinOpKind
    rs1: Reg
    rs2: Reg
    rd: Reg


class Load(_Instr):
    kind: Literal["load"] = "load"
    rp: Reg
    rd: Reg


class Store(_Instr):
    kind: Literal["store"] = "store"
    rp: Reg
    rs: Reg


class Bnz(_Instr):
    """Branch to pc + rel when rs is nonzero."""
    kind: Literal["bnz"] = "bnz"
    rs: Reg
    rel: int


class Jump(_Instr):
    """The only computed control transfer."""
    kind: Literal["jump"] = "jump"
    rt: Reg


class Jal(_Instr):
    """Direct call: R_RA <- pc + 1, pc <- target."""
    kind: Literal["jal"] = "jal"
    target: int = Field(ge=0)


class Halt(_Instr):
    kind: Literal["halt"] = "halt"


Instruction = Annotated[
    Union[Nop, Const, Mov, BinOp, Load, Store, Bnz, Jump, Jal, Halt],
    Field(discriminator="kind"),
]

NOP = Nop()
HALT = Halt()


# ============================================
# Assembly Text
# ============================================

def render_instruction(instr: Instruction) -> str:
    """
    One-line assembly for an instruction.

    Immediates and addresses are hexadecimal, branch offsets signed decimal.
    """
    match instr:
        case Const(imm=imm, rd=rd):
            return f"const {imm:#x} r{rd}"
        case Mov(rs=rs, rd=rd):
            return f"mov r{rs} r{rd}"
        case BinOp(op=op, rs1=rs1, rs2=rs2, rd=rd):
            return f"{op.value} r{rs1} r{rs2} r{rd}"
        case Load(rp=rp, rd=rd):
            return f"load r{rp} r{rd}"
        case Store(rp=rp, rs=rs):
            return f"store r{rp} r{rs}"
        case Bnz(rs=rs, rel=rel):
            return f"bnz r{rs} {rel:+d}"
        case Jump(rt=rt):
            return f"jump r{rt}"
        case Jal(target=target):
            return f"jal {target:#x}"
    return instr.kind


_REGISTER = re.compile(r"r(\d+)$")
_BINOPS = {op.value: op for op in BinOpKind}
_ARITY = {"nop": 0, "halt": 0, "const": 2, "mov": 2, "load": 2, "store": 2,
          "bnz": 2, "jump": 1, "jal": 1}


def _reg(token: str, line: int) -> int:
    m = _REGISTER.match(token)
    if not m or int(m.group(1)) >= NUM_REGISTERS:
        raise ParseError(f"expected a register r0..r{NUM_REGISTERS - 1}, got {token!r}", line)
    return int(m.group(1))


def _int(token: str, line: int) -> int:
    try:
        return int(token, 0)
    except ValueError:
        raise ParseError(f"expected an integer, got {token!r}", line) from None


def parse_instruction(text: str, line: int = 1) -> Instruction:
    """
    Parse one line of assembly produced by render_instruction.

    Raises:
        ParseError: On unknown mnemonics or malformed operands
    """
    parts = text.split()
    if not parts:
        raise ParseError("empty instruction", line)
    mnemonic, args = parts[0], parts[1:]
    expected = 3 if mnemonic in _BINOPS else _ARITY.get(mnemonic)
    if expected is None:
        raise ParseError(f"unknown mnemonic {mnemonic!r}", line)
    if len(args) != expected:
        raise ParseError(f"{mnemonic} takes {expected} operands, got {len(args)}", line)

    if mnemonic in _BINOPS:
        return BinOp(op=_BINOPS[mnemonic], rs1=_reg(args[0], line),
                     rs2=_reg(args[1], line), rd=_reg(args[2], line))
    match mnemonic:
        case "nop":
            return NOP
        case "halt":
            return HALT
        case "const":
            return Const(imm=_int(args[0], line), rd=_reg(args[1], line))
        case "mov":
            return Mov(rs=_reg(args[0], line), rd=_reg(args[1], line))
        case "load":
            return Load(rp=_reg(args[0], line), rd=_reg(args[1], line))
        case "store":
            return Store(rp=_reg(args[0], line), rs=_reg(args[1], line))
        case "bnz":
            return Bnz(rs=_reg(args[0], line), rel=_int(args[1], line))
        case "jump":
            return Jump(rt=_reg(args[0], line))
    return Jal(target=_int(args[0], line))
