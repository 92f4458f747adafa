"""
Target Machine Simulator

Deterministic small-step execution of a MachineObject. Every store, taken
control transfer and halt is recorded in an execution log that the
invariant checkers consume.
"""

import enum
import logging
from typing import Annotated, Literal, Union

from pydantic import BaseModel, Field

from helpers.backend_helpers import HexWord, MachineObject
from helpers.errors import FuelError, InjectionError
from helpers.isa_helpers import (
    NUM_REGISTERS, R_RA, BinOp, Bnz, Const, Halt, Jal, Jump, Load, Mov, Nop,
    Store, decode_address, eval_binop,
)
from helpers.ir_helpers import ARG_REGISTER

logger = logging.getLogger(__name__)

INVALID_FETCH = "InvalidFetch"


# ============================================
# Pydantic Models for State and Log
# ============================================

class MachineState(BaseModel):
    pc: HexWord = 0
    regs: list[int] = Field(default_factory=lambda: [0] * NUM_REGISTERS)
    mem: dict[int, int] = Field(default_factory=dict, description="Sparse memory; absent words read as 0")
    halted: bool = False
    stuck: str | None = Field(None, description="Why execution cannot continue, e.g. InvalidFetch")
    steps: int = 0


class TransferKind(str, enum.Enum):
    JUMP_REG = "JumpReg"
    JAL_DIRECT = "JalDirect"
    BNZ_TAKEN = "BnzTaken"


class StoreEv(BaseModel):
    kind: Literal["store"] = "store"
    step: int
    pc: HexWord
    target: HexWord
    value: HexWord


class TransferEv(BaseModel):
    kind: Literal["transfer"] = "transfer"
    step: int
    pc: HexWord
    target: HexWord
    transfer: TransferKind
    r3: HexWord = Field(description="Argument register at the time of the transfer")


class HaltEv(BaseModel):
    kind: Literal["halt"] = "halt"
    step: int
    pc: HexWord


class InjectEv(BaseModel):
    """Data corruption applied from outside the program, before `step` executes."""
    kind: Literal["inject"] = "inject"
    step: int
    target: HexWord
    value: HexWord


LogEvent = Annotated[Union[StoreEv, TransferEv, HaltEv, InjectEv], Field(discriminator="kind")]


class RunStatus(str, enum.Enum):
    HALTED = "Halted"
    OUT_OF_FUEL = "OutOfFuel"
    STUCK = "Stuck"


class RunOutcome(BaseModel):
    status: RunStatus
    stuck_reason: str | None = None
    stuck_step: int | None = None
    final: MachineState
    log: list[LogEvent]
    pcs: list[int] | None = Field(None, description="Executed pc sequence when recorded")


class Injection(BaseModel):
    step: int = Field(ge=0)
    target: HexWord
    value: HexWord


# ============================================
# Execution
# ============================================

def step(state: MachineState, obj: MachineObject) -> tuple[MachineState, LogEvent | None]:
    """
    Execute the instruction at state.pc.

    The state is advanced in place and returned. A pc that is not a laid-out
    code word sets `state.stuck` to InvalidFetch and executes nothing.
    """
    if state.halted or state.stuck is not None:
        return state, None
    instr = obj.code_map.get(state.pc)
    if instr is None:
        state.stuck = INVALID_FETCH
        return state, None

    cfg = obj.cfg
    mask = cfg.word_mask
    regs = state.regs
    pc = state.pc
    event = None
    next_pc = (pc + 1) & mask

    match instr:
        case Nop():
            pass
        case Const(imm=imm, rd=rd):
            regs[rd] = imm & mask
        case Mov(rs=rs, rd=rd):
            regs[rd] = regs[rs]
        case BinOp(op=op, rs1=rs1, rs2=rs2, rd=rd):
            regs[rd] = eval_binop(op, regs[rs1], regs[rs2], cfg)
        case Load(rp=rp, rd=rd):
            regs[rd] = state.mem.get(regs[rp], obj.meta.unmapped_load_value)
        case Store(rp=rp, rs=rs):
            target = regs[rp]
            state.mem[target] = regs[rs]
            event = StoreEv.model_construct(step=state.steps, pc=pc, target=target, value=regs[rs])
        case Bnz(rs=rs, rel=rel):
            if regs[rs] != 0:
                next_pc = (pc + rel) & mask
                event = TransferEv.model_construct(step=state.steps, pc=pc, target=next_pc,
                                                   transfer=TransferKind.BNZ_TAKEN, r3=regs[ARG_REGISTER])
        case Jump(rt=rt):
            next_pc = regs[rt]
            event = TransferEv.model_construct(step=state.steps, pc=pc, target=next_pc,
                                               transfer=TransferKind.JUMP_REG, r3=regs[ARG_REGISTER])
        case Jal(target=target):
            regs[R_RA] = next_pc
            next_pc = target & mask
            event = TransferEv.model_construct(step=state.steps, pc=pc, target=next_pc,
                                               transfer=TransferKind.JAL_DIRECT, r3=regs[ARG_REGISTER])
        case Halt():
            state.halted = True
            next_pc = pc
            event = HaltEv.model_construct(step=state.steps, pc=pc)

    state.pc = next_pc
    state.steps += 1
    return state, event


def _check_injection(injection: Injection, obj: MachineObject) -> None:
    decoded = decode_address(injection.target, obj.cfg)
    if not decoded.is_data:
        raise InjectionError(f"injection at {injection.target:#x} targets code slot {decoded.slot}; "
                             f"only data memory may be corrupted")


def run(obj: MachineObject, fuel: int, injections: list[Injection] = (),
        record_pcs: bool = False) -> RunOutcome:
    """
    Run an object from the startup address until Halt, fuel exhaustion or Stuck.

    Args:
        obj: Compiled object
        fuel: Maximum number of instructions to execute
        injections: Data-memory overwrites applied before their step executes
        record_pcs: Keep the executed pc sequence in the outcome

    Returns:
        RunOutcome with the complete log

    Raises:
        FuelError: If fuel < 1
        InjectionError: If an injection targets a code slot
    """
    if fuel < 1:
        raise FuelError(f"fuel must be at least 1, got {fuel}")
    for injection in injections:
        _check_injection(injection, obj)
    pending = sorted(injections, key=lambda i: i.step)

    state = MachineState(pc=obj.meta.startup, mem=dict(obj.data_map))
    log: list = []
    pcs: list[int] | None = [] if record_pcs else None

    while state.steps < fuel:
        while pending and pending[0].step <= state.steps:
            injection = pending.pop(0)
            state.mem[injection.target] = injection.value & obj.cfg.word_mask
            log.append(InjectEv.model_construct(step=state.steps, target=injection.target, value=injection.value))
        pc = state.pc
        state, event = step(state, obj)
        if state.stuck is not None:
            logger.debug("stuck at step %d: pc %#x is not a code word", state.steps, pc)
            return RunOutcome(status=RunStatus.STUCK, stuck_reason=state.stuck, stuck_step=state.steps,
                              final=state, log=log, pcs=pcs)
        if pcs is not None:
            pcs.append(pc)
        if event is not None:
            log.append(event)
        if state.halted:
            return RunOutcome(status=RunStatus.HALTED, final=state, log=log, pcs=pcs)

    return RunOutcome(status=RunStatus.OUT_OF_FUEL, final=state, log=log, pcs=pcs)


def replay_pcs(log: list[LogEvent], obj: MachineObject, steps: int) -> list[int]:
    """
    Reconstruct the executed pc sequence from the log and the static code.

    Between logged transfers execution is sequential, so the log alone
    determines every pc.
    """
    transfers = {e.step: e for e in log if isinstance(e, (TransferEv, HaltEv))}
    mask = obj.cfg.word_mask
    pc = obj.meta.startup
    pcs = []
    for n in range(steps):
        if pc not in obj.code_map:
            break
        pcs.append(pc)
        event = transfers.get(n)
        if isinstance(event, HaltEv):
            break
        pc = event.target if event is not None else (pc + 1) & mask
    return pcs
