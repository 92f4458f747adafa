"""
Forged-log fixtures: each bad log trips exactly one rule of one checker.
"""

import pytest

from conftest import CALL_PROGRAM
from helpers.backend_helpers import Mutation, TrustedKind, compile_program
from helpers.checker_helpers import CHECKERS, check_all, check_jump, check_stack, check_store
from helpers.errors import MetaMismatchError
from helpers.generator_helpers import GenConfig, GenMode, gen_program
from helpers.isa_helpers import R_SFI, Jal, Store, decode_address, encode_address
from helpers.machine_helpers import StoreEv, TransferEv, TransferKind, run

STACK = encode_address(0, 1, 0)


def store_pc(obj, component):
    return next(a for a, i in sorted(obj.code_map.items())
                if isinstance(i, Store) and i.rp == R_SFI and decode_address(a).component == component)


def call_pc(obj, callee):
    return next(a for a, i in sorted(obj.code_map.items())
                if isinstance(i, Jal) and obj.meta.entry_by_address.get(i.target) == callee
                and decode_address(a).component != 0)


def return_pc(obj, component):
    return next(r.end - 1 for r in obj.meta.trusted_ranges
                if r.kind is TrustedKind.RETURN_POP and decode_address(r.begin).component == component)


def transfer(pc, target, kind=TransferKind.JUMP_REG, step=0):
    return TransferEv(step=step, pc=pc, target=target, transfer=kind, r3=0)


# ============================================
# Compiled runs pass
# ============================================

@pytest.mark.parametrize("fixture", ["return_program", "call_program", "nested_program", "early_return_program"])
def test_compiled_fixture_runs_pass(fixture, request):
    obj = compile_program(request.getfixturevalue(fixture))
    outcome = run(obj, 10000)
    assert all(verdict.passed for verdict in check_all(outcome.log, obj.meta))


@pytest.mark.parametrize("seed", range(15))
@pytest.mark.parametrize("mode", list(GenMode))
def test_generated_runs_pass(seed, mode):
    obj = compile_program(gen_program(GenConfig(seed=seed, mode=mode)))
    outcome = run(obj, 20000)
    for verdict in check_all(outcome.log, obj.meta):
        assert verdict.passed, verdict.violations[:3]


def test_nested_calls_reach_depth_three(nested_program):
    obj = compile_program(nested_program)
    log = run(obj, 1000).log
    pushes = [e.target for e in log if isinstance(e, StoreEv) and STACK <= e.target < STACK + 16]
    assert pushes == [STACK, STACK + 1, STACK + 2]
    verdict = check_stack(log, obj.meta)
    assert verdict.passed
    assert verdict.events_checked == 9


def test_checkers_run_alone(call_object):
    log = run(call_object, 1000).log
    assert [CHECKERS[n](log, call_object.meta).invariant for n in (1, 2, 3)] == [1, 2, 3]


# ============================================
# Invariant 1
# ============================================

def test_store_to_other_component(call_object):
    log = [StoreEv(step=0, pc=store_pc(call_object, 1), target=encode_address(2, 1, 0), value=0)]
    assert len(check_store(log, call_object.meta).violations) == 1


def test_store_to_own_code(call_object):
    log = [StoreEv(step=0, pc=store_pc(call_object, 1), target=encode_address(1, 2, 0), value=0)]
    assert len(check_store(log, call_object.meta).violations) == 1


def test_store_to_own_data_passes(call_object):
    log = [StoreEv(step=0, pc=store_pc(call_object, 1), target=encode_address(1, 5, 9), value=0)]
    assert check_store(log, call_object.meta).passed


def test_entry_push_to_protected_stack_passes(call_object):
    entry = call_object.meta.entry_address[(2, 0)]
    log = [StoreEv(step=0, pc=entry, target=STACK + 1, value=0)]
    assert check_store(log, call_object.meta).passed


def test_trusted_store_off_the_stack(call_object):
    entry = call_object.meta.entry_address[(2, 0)]
    log = [StoreEv(step=0, pc=entry, target=encode_address(2, 1, 0), value=0)]
    assert len(check_store(log, call_object.meta).violations) == 1


# ============================================
# Invariant 2
# ============================================

def test_computed_jump_to_other_component(call_object):
    log = [transfer(store_pc(call_object, 1), encode_address(2, 0, 16))]
    assert len(check_jump(log, call_object.meta).violations) == 1


def test_computed_jump_to_unaligned_own_code(call_object):
    log = [transfer(store_pc(call_object, 1), encode_address(1, 0, 17))]
    (violation,) = check_jump(log, call_object.meta).violations
    assert "unaligned" in violation.detail


def test_computed_jump_onto_aligned_entry(call_program):
    obj = compile_program(call_program, mutation=Mutation.ALIGNED_ENTRY)
    log = [transfer(store_pc(obj, 1), obj.meta.entry_address[(1, 0)])]
    (violation,) = check_jump(log, obj.meta).violations
    assert "entry point" in violation.detail


def test_return_pop_is_exempt_from_jump_rule(call_object):
    log = [transfer(return_pc(call_object, 2), encode_address(5, 3, 3))]
    assert check_jump(log, call_object.meta).passed


def test_call_to_entry_not_imported(call_object):
    log = [transfer(return_pc(call_object, 2) - 3, call_object.meta.entry_address[(1, 0)], TransferKind.JAL_DIRECT)]
    (violation,) = check_jump(log, call_object.meta).violations
    assert "does not import" in violation.detail


def test_runtime_call_must_target_main(call_object):
    log = [transfer(3, call_object.meta.entry_address[(2, 0)], TransferKind.JAL_DIRECT)]
    assert len(check_jump(log, call_object.meta).violations) == 1


def test_direct_call_into_foreign_body(call_object):
    target = call_object.meta.entry_address[(2, 0)] + 2
    log = [transfer(store_pc(call_object, 1), target, TransferKind.JAL_DIRECT)]
    assert len(check_jump(log, call_object.meta).violations) == 1


def test_branch_leaving_its_slot(call_object):
    log = [transfer(store_pc(call_object, 1), encode_address(1, 2, 0), TransferKind.BNZ_TAKEN)]
    (violation,) = check_jump(log, call_object.meta).violations
    assert "leaves its procedure" in violation.detail


TWO_PROCEDURES = """\
ir 1
main 1 0
component 1
  export 0
  proc 0
    return
  end
  proc 1
    return
  end
end
"""


def test_branch_into_a_sibling_procedure(build):
    obj = build(TWO_PROCEDURES)
    source = obj.meta.entry_address[(1, 0)]
    assert check_jump([transfer(source, source + 2, TransferKind.BNZ_TAKEN)], obj.meta).passed
    log = [transfer(source, obj.meta.entry_address[(1, 1)], TransferKind.BNZ_TAKEN)]
    (violation,) = check_jump(log, obj.meta).violations
    assert "leaves its procedure" in violation.detail


# ============================================
# Invariant 3
# ============================================

def test_return_to_wrong_address(call_object):
    site = call_pc(call_object, (2, 0))
    log = [
        transfer(site, call_object.meta.entry_address[(2, 0)], TransferKind.JAL_DIRECT),
        StoreEv(step=1, pc=call_object.meta.entry_address[(2, 0)], target=STACK, value=site + 1),
        transfer(return_pc(call_object, 2), site + 2, step=2),
    ]
    (violation,) = check_stack(log, call_object.meta).violations
    assert f"expected {site + 1:#x}" in violation.detail


def test_return_with_no_pending_call(call_object):
    log = [transfer(return_pc(call_object, 2), call_pc(call_object, (2, 0)) + 1)]
    assert len(check_stack(log, call_object.meta).violations) == 1


def test_final_return_to_halt_anchor_passes(call_object):
    log = [transfer(return_pc(call_object, 1), call_object.meta.halt_anchor)]
    assert check_stack(log, call_object.meta).passed


def test_spurious_push(call_object):
    log = [StoreEv(step=0, pc=call_object.meta.entry_address[(2, 0)], target=STACK, value=0)]
    (violation,) = check_stack(log, call_object.meta).violations
    assert "spurious push" in violation.detail


def test_push_to_wrong_stack_slot(call_object):
    site = call_pc(call_object, (2, 0))
    log = [
        transfer(site, call_object.meta.entry_address[(2, 0)], TransferKind.JAL_DIRECT),
        StoreEv(step=1, pc=call_object.meta.entry_address[(2, 0)], target=STACK + 5, value=site + 1),
    ]
    (violation,) = check_stack(log, call_object.meta).violations
    assert f"expected stack slot {STACK:#x}" in violation.detail


def test_unbounded_recursion_wraps_the_protected_stack(build):
    obj = build("ir 1\nmain 1 0\ncomponent 1\n  export 0\n  proc 0\n    call 1 0\n    return\n  end\nend\n")
    outcome = run(obj, 80000)
    capacity = 1 << obj.meta.cfg.offset_bits
    assert sum(isinstance(e, StoreEv) for e in outcome.log) > capacity
    violations = check_stack(outcome.log, obj.meta).violations
    assert violations
    assert "protected stack wrapped" in violations[0].detail


def test_early_return_passes(early_return_program):
    obj = compile_program(early_return_program)
    verdict = check_stack(run(obj, 1000).log, obj.meta)
    assert verdict.passed


# ============================================
# Seeded faults
# ============================================

FOREIGN_STORE = f"""\
ir 1
main 1 0
component 1
  export 0
  proc 0
    const {encode_address(2, 1, 0):#x} r20
    store r20 r3
    return
  end
end
"""

STORE_AFTER_CALL = """\
ir 1
main 1 0
component 1
  export 0
  import 2 0
  block 0 size 1
  proc 0
    call 2 0
    const ptr 0 0 r20
    store r20 r3
    return
  end
end
component 2
  export 0
  proc 0
    return
  end
end
"""

# main's procedure starts at the base of component 1's first code slot.
JUMP_TO_OWN_BASE = f"""\
ir 1
main 1 0
component 1
  export 0
  proc 0
    const {encode_address(1, 0, 0):#x} r5
    jump r5
  end
end
"""


@pytest.mark.parametrize("mutation, text, invariant", [
    (Mutation.MISSING_OR, CALL_PROGRAM, 1),
    (Mutation.WRONG_STORE_MASK, FOREIGN_STORE, 1),
    (Mutation.SKIPPED_TAG_RESTORE, STORE_AFTER_CALL, 1),
    (Mutation.CORRUPTED_POP, CALL_PROGRAM, 3),
    (Mutation.ALIGNED_ENTRY, JUMP_TO_OWN_BASE, 2),
    (Mutation.MISSING_HALT_GUARD, JUMP_TO_OWN_BASE, 3),
])
def test_seeded_fault_is_detected(build, mutation, text, invariant):
    clean = build(text)
    assert all(v.passed for v in check_all(run(clean, 2000).log, clean.meta))

    obj = build(text, mutation=mutation)
    verdicts = check_all(run(obj, 2000).log, obj.meta)
    assert not verdicts[invariant - 1].passed


# ============================================
# Metadata mismatch
# ============================================

@pytest.mark.parametrize("checker", [check_store, check_jump, check_stack])
def test_foreign_pc_is_a_meta_mismatch(call_object, checker):
    bogus = encode_address(1, 1, 0)
    log = [
        StoreEv(step=0, pc=bogus, target=STACK, value=0),
        transfer(bogus, encode_address(1, 0, 0)),
    ]
    with pytest.raises(MetaMismatchError):
        checker(log, call_object.meta)
