import pytest

from helpers.backend_helpers import compile_program
from helpers.errors import MetaMismatchError
from helpers.generator_helpers import GenConfig, gen_program
from helpers.ir_helpers import Call, IRStatus, Ret, interpret, is_well_bracketed
from helpers.isa_helpers import encode_address
from helpers.machine_helpers import RunStatus, TransferEv, TransferKind, run
from helpers.trace_helpers import compare_traces, derive_trace

CALL = Call(caller=1, procedure=0, arg=42, callee=2)
RET = Ret(returner=2, value=42, returnee=1)


def compiled_trace(program, fuel=10000):
    obj = compile_program(program)
    outcome = run(obj, fuel)
    return outcome.status, derive_trace(outcome.log, obj.meta)


def test_trivial_main_has_empty_trace(return_program):
    assert compiled_trace(return_program) == (RunStatus.HALTED, [])


def test_call_and_return(call_program):
    status, trace = compiled_trace(call_program)
    assert status is RunStatus.HALTED
    assert trace == [CALL, RET]
    assert trace == interpret(call_program, 100).trace


@pytest.mark.parametrize("fixture", ["nested_program", "early_return_program"])
def test_machine_matches_interpreter(fixture, request):
    program = request.getfixturevalue(fixture)
    status, trace = compiled_trace(program)
    ir = interpret(program, 1000)
    assert compare_traces(ir.status, ir.trace, status, trace) is None
    assert trace == ir.trace


@pytest.mark.parametrize("seed", range(25))
def test_well_behaved_traces_agree(seed):
    cfg = GenConfig(seed=seed)
    program = gen_program(cfg)
    status, trace = compiled_trace(program, cfg.fuel * 8)
    ir = interpret(program, cfg.fuel)
    assert ir.status is not IRStatus.UNDEFINED_BEHAVIOR
    assert compare_traces(ir.status, ir.trace, status, trace) is None
    assert is_well_bracketed(trace)


def test_foreign_pc_is_a_meta_mismatch(call_object):
    log = [TransferEv(step=0, pc=encode_address(1, 1, 0), target=0, transfer=TransferKind.JUMP_REG, r3=0)]
    with pytest.raises(MetaMismatchError):
        derive_trace(log, call_object.meta)


@pytest.mark.parametrize(("ir_status", "ir_trace", "machine_status", "machine_trace", "agree"), [
    (IRStatus.HALTED, [CALL, RET], RunStatus.HALTED, [CALL, RET], True),
    (IRStatus.HALTED, [CALL, RET], RunStatus.HALTED, [CALL], False),
    (IRStatus.UNDEFINED_BEHAVIOR, [CALL], RunStatus.HALTED, [CALL, RET], True),
    (IRStatus.UNDEFINED_BEHAVIOR, [CALL, RET], RunStatus.STUCK, [CALL], False),
    (IRStatus.UNDEFINED_BEHAVIOR, [CALL], RunStatus.STUCK, [CALL, RET], True),
    (IRStatus.UNDEFINED_BEHAVIOR, [CALL, RET], RunStatus.OUT_OF_FUEL, [CALL], True),
    (IRStatus.HALTED, [CALL, RET], RunStatus.STUCK, [], False),
    (IRStatus.HALTED, [], RunStatus.STUCK, [], False),
    (IRStatus.OUT_OF_FUEL, [CALL], RunStatus.STUCK, [CALL], False),
    (IRStatus.UNDEFINED_BEHAVIOR, [CALL, RET], RunStatus.HALTED, [CALL], False),
    (IRStatus.HALTED, [CALL, RET], RunStatus.OUT_OF_FUEL, [CALL], True),
    (IRStatus.HALTED, [CALL], RunStatus.OUT_OF_FUEL, [CALL, RET], False),
    (IRStatus.OUT_OF_FUEL, [CALL], RunStatus.HALTED, [CALL, RET], True),
    (IRStatus.OUT_OF_FUEL, [CALL, RET], RunStatus.HALTED, [CALL], False),
    (IRStatus.OUT_OF_FUEL, [CALL, RET], RunStatus.OUT_OF_FUEL, [CALL], True),
    (IRStatus.OUT_OF_FUEL, [RET], RunStatus.OUT_OF_FUEL, [CALL], False),
])
def test_compare_traces(ir_status, ir_trace, machine_status, machine_trace, agree):
    mismatch = compare_traces(ir_status, ir_trace, machine_status, machine_trace)
    assert (mismatch is None) == agree
