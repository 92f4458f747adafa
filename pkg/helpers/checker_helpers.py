"""
Isolation Invariant Checkers

Each checker is a pure function of (execution log, layout metadata):
1. check_store: a component writes only its own data memory
2. check_jump: a component jumps only within its own code, except through
   direct calls to the entry points it imports
3. check_stack: every return goes to the instruction after its call
"""

import logging

from pydantic import BaseModel, Field, computed_field

from helpers.backend_helpers import LayoutMeta, TrustedKind
from helpers.errors import MetaMismatchError
from helpers.isa_helpers import decode_address, is_bundle_aligned
from helpers.machine_helpers import LogEvent, StoreEv, TransferEv, TransferKind

logger = logging.getLogger(__name__)

INVARIANT_NAMES = {1: "store", 2: "jump", 3: "stack"}


class Violation(BaseModel):
    invariant: int = Field(ge=1, le=3)
    step: int
    pc: int
    event_index: int = Field(description="Index of the offending event in the log")
    detail: str


class Verdict(BaseModel):
    invariant: int
    violations: list[Violation] = Field(default_factory=list)
    events_checked: int = 0

    @computed_field
    @property
    def passed(self) -> bool:
        return not self.violations


def _require_code(meta: LayoutMeta, pc: int, index: int) -> None:
    if not meta.is_code_word(pc):
        raise MetaMismatchError(f"log event {index} has pc {pc:#x}, which is not a code word of this layout")


def check_store(log: list[LogEvent], meta: LayoutMeta) -> Verdict:
    """Stores from trusted sequences hit the protected stack; all others hit own data slots."""
    cfg = meta.cfg
    verdict = Verdict(invariant=1)
    for index, event in enumerate(log):
        if not isinstance(event, StoreEv):
            continue
        _require_code(meta, event.pc, index)
        verdict.events_checked += 1
        target = decode_address(event.target, cfg)
        trusted = meta.trusted_range(event.pc)
        if trusted is not None:
            if (target.component, target.slot) != (0, 1):
                verdict.violations.append(Violation(
                    invariant=1, step=event.step, pc=event.pc, event_index=index,
                    detail=f"trusted {trusted.kind.value} store to {event.target:#x} "
                           f"(c{target.component} slot {target.slot}), expected the protected stack"))
            continue
        owner = decode_address(event.pc, cfg).component
        if target.component != owner or not target.is_data:
            verdict.violations.append(Violation(
                invariant=1, step=event.step, pc=event.pc, event_index=index,
                detail=f"c{owner} stored to {event.target:#x} (c{target.component} slot {target.slot})"))
    return verdict


def check_jump(log: list[LogEvent], meta: LayoutMeta) -> Verdict:
    """Control transfers stay in the own code or enter an imported procedure directly."""
    cfg = meta.cfg
    verdict = Verdict(invariant=2)

    def flag(index, event, detail):
        verdict.violations.append(Violation(invariant=2, step=event.step, pc=event.pc,
                                            event_index=index, detail=detail))

    for index, event in enumerate(log):
        if not isinstance(event, TransferEv):
            continue
        _require_code(meta, event.pc, index)
        verdict.events_checked += 1
        src = decode_address(event.pc, cfg)
        dst = decode_address(event.target, cfg)

        match event.transfer:
            case TransferKind.JUMP_REG:
                trusted = meta.trusted_range(event.pc)
                if trusted is not None and trusted.kind is TrustedKind.RETURN_POP:
                    continue
                if dst.component != src.component or not dst.is_code:
                    flag(index, event, f"computed jump from c{src.component} to {event.target:#x} "
                                       f"(c{dst.component} slot {dst.slot})")
                elif not is_bundle_aligned(event.target, cfg):
                    flag(index, event, f"computed jump to unaligned {event.target:#x}")
                elif event.target in meta.entry_by_address:
                    flag(index, event, f"computed jump onto entry point {event.target:#x}")
            case TransferKind.JAL_DIRECT:
                callee = meta.entry_by_address.get(event.target)
                if src.component == 0:
                    if callee != meta.main:
                        flag(index, event, f"runtime call to {event.target:#x} is not main's entry")
                elif callee is not None:
                    if callee[0] != src.component and callee not in meta.import_sets.get(src.component, set()):
                        flag(index, event, f"c{src.component} called c{callee[0]}.p{callee[1]}, "
                                           f"which it does not import")
                elif dst.component != src.component or not meta.is_code_word(event.target):
                    flag(index, event, f"direct call from c{src.component} to {event.target:#x}, "
                                       f"neither own code nor an imported entry point")
            case TransferKind.BNZ_TAKEN:
                home = meta.procedure_at(event.pc)
                if home is None or meta.procedure_at(event.target) != home:
                    flag(index, event, f"branch from {event.pc:#x} to {event.target:#x} leaves its procedure")
    return verdict


def check_stack(log: list[LogEvent], meta: LayoutMeta) -> Verdict:
    """
    Replay a shadow stack of return addresses over the log.

    Every direct call into an entry point pushes pc+1, every return pop must
    land on the shadow top, and every protected-stack push must directly
    follow a call into its entry point and write the slot at the current
    depth. Depth past the slot capacity is a wraparound.
    """
    verdict = Verdict(invariant=3)
    shadow: list[int] = []
    last_transfer: TransferEv | None = None
    max_depth = 0
    capacity = 1 << meta.cfg.offset_bits

    def flag(index, event, detail):
        verdict.violations.append(Violation(invariant=3, step=event.step, pc=event.pc,
                                            event_index=index, detail=detail))

    for index, event in enumerate(log):
        if isinstance(event, StoreEv):
            trusted = meta.trusted_range(event.pc)
            if trusted is None or trusted.kind is not TrustedKind.ENTRY_PUSH:
                continue
            _require_code(meta, event.pc, index)
            verdict.events_checked += 1
            entered = (last_transfer is not None and last_transfer.transfer is TransferKind.JAL_DIRECT
                       and last_transfer.target == trusted.begin)
            if not entered:
                flag(index, event, f"spurious push at {event.pc:#x}: not reached by a call to its entry point")
                continue
            depth = len(shadow) - 1
            expected = meta.protected_stack_base + depth
            if depth >= capacity:
                flag(index, event, f"protected stack wrapped: push {len(shadow)} exceeds {capacity} slots")
            elif event.target != expected:
                flag(index, event, f"push to {event.target:#x}, expected stack slot {expected:#x}")
            continue
        if not isinstance(event, TransferEv):
            continue
        _require_code(meta, event.pc, index)
        last_transfer = event
        if event.transfer is TransferKind.JAL_DIRECT and event.target in meta.entry_by_address:
            verdict.events_checked += 1
            shadow.append(event.pc + 1)
            max_depth = max(max_depth, len(shadow))
        elif event.transfer is TransferKind.JUMP_REG:
            trusted = meta.trusted_range(event.pc)
            if trusted is None or trusted.kind is not TrustedKind.RETURN_POP:
                continue
            verdict.events_checked += 1
            if not shadow:
                if event.target != meta.halt_anchor:
                    flag(index, event, f"return to {event.target:#x} with no pending call")
                continue
            expected = shadow.pop()
            if event.target != expected:
                flag(index, event, f"return to {event.target:#x}, expected {expected:#x}")

    logger.debug("shadow stack reached depth %d", max_depth)
    return verdict


def check_all(log: list[LogEvent], meta: LayoutMeta) -> list[Verdict]:
    """Verdicts for invariants 1, 2 and 3, in that order."""
    return [check_store(log, meta), check_jump(log, meta), check_stack(log, meta)]


CHECKERS = {1: check_store, 2: check_jump, 3: check_stack}


class CheckReport(BaseModel):
    format: str = "sfi-report"
    format_version: int = 1
    experiment: str = "check"
    verdicts: list[Verdict]

    @computed_field
    @property
    def passed(self) -> bool:
        return all(v.passed for v in self.verdicts)
