"""
Cross-Component Traces

Abstracts a machine execution log into the Call/Ret trace the IR interpreter
produces, and decides whether an IR trace and a machine trace agree.
"""

from helpers.backend_helpers import LayoutMeta, TrustedKind
from helpers.errors import MetaMismatchError
from helpers.ir_helpers import Call, IRStatus, Ret, TraceEvent
from helpers.isa_helpers import decode_address
from helpers.machine_helpers import LogEvent, RunStatus, TransferEv, TransferKind

RUNTIME_COMPONENT = 0


def derive_trace(log: list[LogEvent], meta: LayoutMeta) -> list[TraceEvent]:
    """
    Call/Ret events of the cross-component transfers in a log.

    Startup's call into main and main's final return to the runtime are
    not part of the trace.

    Raises:
        MetaMismatchError: If a transfer's pc is not a code word of `meta`
    """
    cfg = meta.cfg
    trace: list[TraceEvent] = []
    for index, event in enumerate(log):
        if not isinstance(event, TransferEv):
            continue
        if not meta.is_code_word(event.pc):
            raise MetaMismatchError(f"log event {index} has pc {event.pc:#x}, which is not a code word of this layout")
        src = decode_address(event.pc, cfg).component
        dst = decode_address(event.target, cfg).component
        if RUNTIME_COMPONENT in (src, dst) or src == dst:
            continue
        if event.transfer is TransferKind.JAL_DIRECT:
            callee = meta.entry_by_address.get(event.target)
            if callee is not None:
                trace.append(Call(caller=src, procedure=callee[1], arg=event.r3, callee=callee[0]))
        elif event.transfer is TransferKind.JUMP_REG:
            trusted = meta.trusted_range(event.pc)
            if trusted is not None and trusted.kind is TrustedKind.RETURN_POP:
                trace.append(Ret(returner=src, value=event.r3, returnee=dst))
    return trace


def _is_prefix(shorter: list, longer: list) -> bool:
    return len(shorter) <= len(longer) and longer[:len(shorter)] == shorter


def _first_difference(a: list, b: list) -> str:
    for i, (x, y) in enumerate(zip(a, b)):
        if x != y:
            return f"event {i}: IR {x} vs machine {y}"
    return f"lengths differ: IR {len(a)} vs machine {len(b)}"


def compare_traces(ir_status: IRStatus, ir_trace: list[TraceEvent],
                   machine_status: RunStatus, machine_trace: list[TraceEvent]) -> str | None:
    """
    Check the IR and machine traces against each other.

    Both halted: the traces are equal. IR stopped at undefined behavior: the
    IR trace is a prefix of the machine trace, or the machine ran out of
    fuel first and its trace is a prefix of the IR trace. Only fuel may cut
    the machine short; a Stuck machine agrees with nothing but an IR run
    that reached undefined behavior.

    Returns:
        None when the traces agree, otherwise a description of the mismatch
    """
    machine_done = machine_status is RunStatus.HALTED
    machine_cut = machine_status is RunStatus.OUT_OF_FUEL
    if machine_status is RunStatus.STUCK and ir_status is not IRStatus.UNDEFINED_BEHAVIOR:
        return f"IR {ir_status.value} / machine {machine_status.value}: machine stuck on a defined run"
    if ir_status is IRStatus.HALTED and machine_done:
        agree = ir_trace == machine_trace
    elif ir_status is IRStatus.UNDEFINED_BEHAVIOR:
        agree = _is_prefix(ir_trace, machine_trace) or (machine_cut and _is_prefix(machine_trace, ir_trace))
    elif ir_status is IRStatus.HALTED:
        agree = _is_prefix(machine_trace, ir_trace)
    elif machine_done:
        agree = _is_prefix(ir_trace, machine_trace)
    else:
        agree = _is_prefix(ir_trace, machine_trace) or _is_prefix(machine_trace, ir_trace)
    if agree:
        return None
    return f"IR {ir_status.value} / machine {machine_status.value}: {_first_difference(ir_trace, machine_trace)}"
