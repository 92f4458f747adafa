"""
Failure Shrinking

Greedy reduction of a failing IR program: drop components, procedures,
data blocks and instruction runs, then shrink constants toward zero. A
candidate is accepted only if it still validates and still fails.
"""

import logging
from typing import Callable, Iterator

from helpers.errors import ShrinkError
from helpers.ir_helpers import ICall, IConst, IRProgram, PtrConst, WordConst, validate

logger = logging.getLogger(__name__)

MAX_ATTEMPTS = 5000


def _without_component(program: IRProgram, cid: int) -> IRProgram:
    candidate = program.model_copy(deep=True)
    candidate.components = [c for c in candidate.components if c.id != cid]
    for comp in candidate.components:
        comp.imports = {imp for imp in comp.imports if imp[0] != cid}
        comp.procedures = {
            p: [i for i in code if not (isinstance(i, ICall) and i.component == cid)]
            for p, code in comp.procedures.items()
        }
    return candidate


def _without_procedure(program: IRProgram, cid: int, pid: int) -> IRProgram:
    candidate = program.model_copy(deep=True)
    for comp in candidate.components:
        comp.imports.discard((cid, pid))
        if comp.id == cid:
            del comp.procedures[pid]
            comp.exports.discard(pid)
        comp.procedures = {
            p: [i for i in code if not (isinstance(i, ICall) and (i.component, i.procedure) == (cid, pid))]
            for p, code in comp.procedures.items()
        }
    return candidate


def _with_code(program: IRProgram, cid: int, pid: int, code: list) -> IRProgram:
    candidate = program.model_copy(deep=True)
    candidate.component(cid).procedures[pid] = code
    return candidate


def _candidates(program: IRProgram) -> Iterator[IRProgram]:
    main_c, main_p = program.main
    for comp in program.components:
        if comp.id != main_c:
            yield _without_component(program, comp.id)
    for comp in program.components:
        for p in sorted(comp.procedures):
            if (comp.id, p) != (main_c, main_p):
                yield _without_procedure(program, comp.id, p)
    for comp in program.components:
        used = {i.value.block for code in comp.procedures.values() for i in code
                if isinstance(i, IConst) and isinstance(i.value, PtrConst)}
        for b in sorted(set(comp.data_blocks) - used):
            candidate = program.model_copy(deep=True)
            del candidate.component(comp.id).data_blocks[b]
            yield candidate

    # Instruction runs, halving the run length down to single instructions.
    for comp in program.components:
        for p, code in sorted(comp.procedures.items()):
            run = len(code) // 2
            while run >= 1:
                for start in range(0, len(code) - run + 1, run):
                    yield _with_code(program, comp.id, p, code[:start] + code[start + run:])
                run //= 2

    for comp in program.components:
        for p, code in sorted(comp.procedures.items()):
            for index, instr in enumerate(code):
                if isinstance(instr, IConst) and isinstance(instr.value, WordConst) and instr.value.value:
                    for smaller in (0, instr.value.value // 2):
                        new = instr.model_copy(update={"value": WordConst(value=smaller)})
                        yield _with_code(program, comp.id, p, code[:index] + [new] + code[index + 1:])


def shrink(program: IRProgram, fails: Callable[[IRProgram], bool],
           max_attempts: int = MAX_ATTEMPTS) -> IRProgram:
    """
    Greedily reduce a failing program while it keeps failing.

    Args:
        program: A program for which `fails` holds
        fails: The failure predicate
        max_attempts: Bound on predicate evaluations

    Returns:
        A valid program on which `fails` still holds, and no larger than the input

    Raises:
        ShrinkError: If `fails(program)` is false
    """
    if not fails(program):
        raise ShrinkError("program does not fail; nothing to shrink")
    current = program
    attempts = 0
    progress = True
    while progress and attempts < max_attempts:
        progress = False
        for candidate in _candidates(current):
            if validate(candidate):
                continue
            attempts += 1
            if fails(candidate):
                current = candidate
                progress = True
                break
            if attempts >= max_attempts:
                break
    logger.info("shrunk %d -> %d instructions in %d attempts",
                program.instruction_count(), current.instruction_count(), attempts)
    return current
