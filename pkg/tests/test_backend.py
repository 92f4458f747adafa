import pytest

from helpers.backend_helpers import (
    Mutation, TrustedKind, compile_program, disassemble, emit_startup,
    entry_sequence, lower_return, verify_object,
)
from helpers.errors import LayoutError, ProgramInvalidError
from helpers.format_helpers import dump_object, load_object
from helpers.generator_helpers import GenConfig, GenMode, gen_program
from helpers.ir_helpers import IReturn, IRComponent, IRProgram
from helpers.isa_helpers import (
    R_MASK_DATA, R_SFI, R_TAG_DATA, BinOp, BinOpKind, BitConfig, Halt, Jal,
    Store, decode_address, encode_address, is_bundle_aligned,
)

from conftest import CALL_PROGRAM, RETURN_PROGRAM


def masked_stores(obj, component):
    return [addr for addr, instr in sorted(obj.code_map.items())
            if isinstance(instr, Store) and instr.rp == R_SFI and decode_address(addr).component == component]


def test_trivial_program_layout(build):
    obj = build(RETURN_PROGRAM)
    meta = obj.meta
    assert [(s.component, s.slot) for s in obj.code] == [(0, 0), (1, 0)]
    assert [obj.code_map[a] for a in range(5)] == emit_startup(meta.entry_address[(1, 0)])
    assert meta.halt_anchor == 4
    assert isinstance(obj.code_map[meta.halt_anchor], Halt)

    (entry,) = meta.entry_points
    assert (entry.component, entry.procedure) == (1, 0)
    assert not is_bundle_aligned(entry.address)
    assert isinstance(obj.code_map[entry.address - 1], Halt)
    assert [obj.code_map[entry.address + i] for i in range(5)] == entry_sequence(1)


def test_store_sequence_sits_in_one_bundle(call_object):
    (addr,) = masked_stores(call_object, 1)
    code = call_object.code_map
    assert code[addr - 2] == BinOp(op=BinOpKind.AND, rs1=20, rs2=R_MASK_DATA, rd=R_SFI)
    assert code[addr - 1] == BinOp(op=BinOpKind.OR, rs1=R_SFI, rs2=R_TAG_DATA, rd=R_SFI)
    assert code[addr] == Store(rp=R_SFI, rs=3)
    assert (addr - 2) // 16 == addr // 16


def test_sequence_near_a_boundary_is_shifted_with_halt_padding(build):
    body = "    nop\n" * 8 + "    const ptr 0 0 r20\n    store r20 r1\n"
    # Entry group (6) + 8 nops + const = 15 words; the store sequence cannot start at 15.
    text = ("ir 1\nmain 1 0\ncomponent 1\n  export 0\n  block 0 size 1\n  proc 0\n"
            f"{body}  end\nend\n")
    obj = build(text)
    base = encode_address(1, 0, 0)
    (addr,) = masked_stores(obj, 1)
    assert addr == base + 18
    assert obj.code_map[base + 15] == Jal(target=base + 16)
    assert verify_object(obj) == []


def test_two_data_blocks_take_odd_slots(build):
    text = CALL_PROGRAM.replace("  block 0 size 2\n", "  block 0 size 2\n  block 5 size 3 init 0x7\n")
    obj = build(text)
    placements = {(p.component, p.block): p.slot for p in obj.meta.block_map}
    assert placements == {(1, 0): 1, (1, 5): 3}
    assert obj.data_map == {encode_address(1, 3, 0): 7}


def test_block_filling_a_slot_exactly(build):
    text = RETURN_PROGRAM.replace("  proc 0\n", "  block 0 size 4096\n  proc 0\n")
    (placement,) = build(text).meta.block_map
    assert placement.size == 4096
    with pytest.raises(LayoutError) as excinfo:
        build(text.replace("4096", "4097"))
    assert excinfo.value.kind == "LayoutOverflow"


def test_compile_is_deterministic(call_program):
    assert dump_object(compile_program(call_program)) == dump_object(compile_program(call_program))


def test_object_file_round_trips(call_object):
    text = dump_object(call_object)
    assert dump_object(load_object(text)) == text


def test_trusted_ranges_cover_the_protected_stack_sequences(call_object):
    kinds = [r.kind for r in call_object.meta.trusted_ranges]
    assert kinds.count(TrustedKind.STARTUP) == 1
    assert kinds.count(TrustedKind.ENTRY_PUSH) == 2
    assert kinds.count(TrustedKind.RETURN_POP) == 2
    assert kinds.count(TrustedKind.POST_CALL_RESTORE) == 1
    for r in call_object.meta.trusted_ranges:
        if r.kind is TrustedKind.RETURN_POP:
            assert [call_object.code_map[a] for a in range(r.begin, r.end)] == lower_return()


def test_local_jal_needs_no_stack_traffic(build):
    body = "    jal sub\n    halt\n    label sub\n    jump r24\n"
    obj = build(f"ir 1\nmain 1 0\ncomponent 1\n  export 0\n  proc 0\n{body}  end\nend\n")
    jals = [(a, i) for a, i in obj.code_map.items() if isinstance(i, Jal) and decode_address(a).component == 1]
    assert jals
    assert all(i.target not in obj.meta.entry_by_address for _, i in jals)
    assert len(obj.meta.entry_points) == 1
    assert verify_object(obj) == []


@pytest.mark.parametrize("seed", range(8))
@pytest.mark.parametrize("mode", list(GenMode))
def test_generated_programs_verify(seed, mode):
    obj = compile_program(gen_program(GenConfig(seed=seed, mode=mode)))
    assert verify_object(obj) == []


@pytest.mark.parametrize("mutation", list(Mutation))
def test_every_mutation_is_flagged_statically(call_program, mutation):
    obj = compile_program(call_program, mutation=mutation)
    assert obj.mutation is mutation
    assert verify_object(obj) != []


def test_invalid_program_is_refused(call_program):
    broken = call_program.model_copy(deep=True)
    broken.component(1).imports.clear()
    with pytest.raises(ProgramInvalidError) as excinfo:
        compile_program(broken)
    assert excinfo.value.errors[0].kind == "CallNotImported"


def test_sixteen_components_do_not_fit():
    program = IRProgram(
        components=[IRComponent(id=c, exports={0}, procedures={0: [IReturn()]}) for c in range(1, 17)],
        main=(1, 0),
    )
    with pytest.raises(LayoutError) as excinfo:
        compile_program(program)
    assert excinfo.value.kind == "TooManyComponents"
    assert compile_program(program.model_copy(update={"components": program.components[:15]}))


def test_bundles_must_hold_an_entry_group(call_program):
    with pytest.raises(LayoutError) as excinfo:
        compile_program(call_program, BitConfig(bundle_bits=2))
    assert excinfo.value.kind == "BundleTooSmall"


def test_custom_widths_are_recorded(call_program):
    cfg = BitConfig(offset_bits=10, component_bits=3, bundle_bits=3)
    obj = compile_program(call_program, cfg)
    assert obj.meta.cfg == cfg
    assert verify_object(obj) == []


def test_data_blocks_keep_their_initial_words(build):
    obj = build(RETURN_PROGRAM.replace("  proc 0\n", "  block 0 size 3 init 0x1 0x0 0x3\n  proc 0\n"))
    assert obj.data_init[0].words == [1, 0, 3]
    assert obj.data_map == {encode_address(1, 1, 0): 1, encode_address(1, 1, 2): 3}
    assert obj.meta.block_map[0].size == 3


def test_disassembly_annotates_bundles_and_ranges(call_object):
    listing = disassemble(call_object)
    assert "; ---- bundle 0 ----" in listing
    assert "entry c2.p0" in listing
    assert "halt anchor" in listing
    for kind in TrustedKind:
        assert kind.value in listing
    assert "; data c1 block 0 -> slot 1" in listing


def test_disassembly_marks_mutated_objects(call_program):
    assert "MUTATED: missing-or" in disassemble(compile_program(call_program, mutation=Mutation.MISSING_OR))
