import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from pydantic import ValidationError

from helpers.backend_helpers import compile_program
from helpers.generator_helpers import GenConfig, GenMode, gen_program
from helpers.ir_helpers import ICall, IRStatus, interpret, validate

seeds = st.integers(min_value=0, max_value=(1 << 64) - 1)


def test_same_seed_same_program():
    cfg = GenConfig(seed=1234)
    assert gen_program(cfg) == gen_program(cfg)


def test_different_seeds_differ():
    assert gen_program(GenConfig(seed=1)) != gen_program(GenConfig(seed=2))


@settings(max_examples=200, deadline=None)
@given(seeds, st.sampled_from(list(GenMode)))
def test_generated_programs_validate(seed, mode):
    assert validate(gen_program(GenConfig(seed=seed, mode=mode))) == []


@pytest.mark.slow
def test_thousand_well_behaved_programs_validate():
    assert sum(len(validate(gen_program(GenConfig(seed=s)))) for s in range(1000)) == 0


@settings(max_examples=50, deadline=None)
@given(seeds)
def test_well_behaved_programs_have_no_undefined_behavior(seed):
    outcome = interpret(gen_program(GenConfig(seed=seed)), 2000)
    assert outcome.status is not IRStatus.UNDEFINED_BEHAVIOR, outcome.ub_reason


@settings(max_examples=50, deadline=None)
@given(seeds)
def test_wild_programs_always_compile(seed):
    assert compile_program(gen_program(GenConfig(seed=seed, mode=GenMode.WILD)))


@settings(max_examples=50, deadline=None)
@given(seeds)
def test_call_graph_is_acyclic(seed):
    program = gen_program(GenConfig(seed=seed))
    for comp in program.components:
        for p, code in comp.procedures.items():
            for instr in code:
                if isinstance(instr, ICall):
                    assert (instr.component, instr.procedure) > (comp.id, p)


def test_ranges_are_respected():
    cfg = GenConfig(seed=5, components=(3, 3), procedures=(2, 2), blocks=(1, 1))
    program = gen_program(cfg)
    assert [c.id for c in program.components] == [1, 2, 3]
    assert all(len(c.procedures) == 2 and len(c.data_blocks) == 1 for c in program.components)
    assert program.main == (1, 0)


def test_zero_weight_kinds_are_never_drawn():
    weights = {"nop": 1.0, "const": 1.0, "call": 0.0, "store": 0.0}
    program = gen_program(GenConfig(seed=9, weights=weights))
    assert all(not c.imports for c in program.components)


@pytest.mark.parametrize("fields", [
    {"components": (0, 2)},
    {"components": (3, 2)},
    {"components": (1, 16)},
    {"weights": {"teleport": 1.0}},
    {"weights": {"nop": 0.0}},
    {"fuel": 0},
])
def test_invalid_configs_are_rejected(fields):
    with pytest.raises(ValidationError):
        GenConfig(**fields)
