"""
Property Pipeline

generate -> compile -> run -> check, once per test, aggregated into a
FuzzReport. Also hosts the data-corruption attack experiment.
"""

import hashlib
import logging
import random
from concurrent.futures import ProcessPoolExecutor

from pydantic import BaseModel, Field, computed_field

from helpers.backend_helpers import MachineObject, Mutation, compile_program, verify_object
from helpers.checker_helpers import Violation, check_all
from helpers.errors import ToolchainError
from helpers.generator_helpers import GenConfig, GenMode, gen_program
from helpers.ir_helpers import IRProgram, IRStatus, interpret
from helpers.ir_text_helpers import print_program
from helpers.isa_helpers import encode_address
from helpers.machine_helpers import Injection, RunOutcome, run
from helpers.shrink_helpers import shrink
from helpers.trace_helpers import compare_traces, derive_trace

logger = logging.getLogger(__name__)

# Each IR instruction lowers to at most a handful of machine words.
MACHINE_FUEL_FACTOR = 8
MAX_REPORTED_VIOLATIONS = 5


# ============================================
# Pydantic Models for Reports
# ============================================

class CaseResult(BaseModel):
    """Outcome of one pipeline test."""
    index: int
    seed: int
    discarded: str | None = Field(None, description="Why the program could not be compiled")
    violations: dict[int, int] = Field(default_factory=lambda: {1: 0, 2: 0, 3: 0})
    first_violations: list[Violation] = Field(default_factory=list)
    static_issues: list[str] = Field(default_factory=list)
    trace_mismatch: str | None = None
    ir_undefined: str | None = None
    ir_status: str | None = None
    machine_status: str | None = None

    @property
    def failed(self) -> bool:
        return bool(self.discarded or any(self.violations.values()) or self.static_issues
                    or self.trace_mismatch or self.ir_undefined)

    def failure_kinds(self) -> set[str]:
        kinds = {f"invariant-{n}" for n, count in self.violations.items() if count}
        for kind, present in (("discarded", self.discarded), ("static", self.static_issues),
                              ("trace", self.trace_mismatch), ("ir-undefined", self.ir_undefined)):
            if present:
                kinds.add(kind)
        return kinds

    def reasons(self) -> list[str]:
        reasons = []
        if self.discarded:
            reasons.append(f"discarded: {self.discarded}")
        reasons += [f"invariant {n}: {count} violation(s)" for n, count in self.violations.items() if count]
        reasons += [f"static: {issue}" for issue in self.static_issues[:MAX_REPORTED_VIOLATIONS]]
        if self.trace_mismatch:
            reasons.append(f"trace mismatch: {self.trace_mismatch}")
        if self.ir_undefined:
            reasons.append(f"IR undefined behavior: {self.ir_undefined}")
        return reasons


class FailureCase(BaseModel):
    index: int
    seed: int
    reasons: list[str]
    violations: list[Violation] = Field(default_factory=list)
    repro: str = Field(description="Command line that reruns this test alone")
    shrunk: str | None = Field(None, description="Shrunk failing program in IR text")


class FuzzReport(BaseModel):
    format: str = "sfi-report"
    format_version: int = 1
    experiment: str = "fuzz"
    mode: GenMode
    seed: int
    mutation: Mutation | None = None
    tests: int = 0
    discards: int = 0
    violations: dict[int, int] = Field(default_factory=lambda: {1: 0, 2: 0, 3: 0})
    trace_mismatches: int = 0
    static_failures: int = 0
    ir_undefined: int = 0
    ir_statuses: dict[str, int] = Field(default_factory=dict)
    machine_statuses: dict[str, int] = Field(default_factory=dict)
    failures: list[FailureCase] = Field(default_factory=list)

    @computed_field
    @property
    def clean(self) -> bool:
        return (self.discards == 0 and not any(self.violations.values()) and self.trace_mismatches == 0
                and self.static_failures == 0 and self.ir_undefined == 0)

    def add(self, case: CaseResult) -> None:
        self.tests += 1
        self.discards += case.discarded is not None
        for n, count in case.violations.items():
            self.violations[n] = self.violations.get(n, 0) + count
        self.trace_mismatches += case.trace_mismatch is not None
        self.static_failures += bool(case.static_issues)
        self.ir_undefined += case.ir_undefined is not None
        for key, status in ((self.ir_statuses, case.ir_status), (self.machine_statuses, case.machine_status)):
            if status is not None:
                key[status] = key.get(status, 0) + 1


# ============================================
# Seeds
# ============================================

def derive_seed(master: int, index: int, purpose: str = "program") -> int:
    """64-bit per-test seed, independent of execution order."""
    digest = hashlib.sha256(f"{master}:{index}:{purpose}".encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big")


def case_config(cfg: GenConfig, index: int) -> GenConfig:
    return cfg.model_copy(update={"seed": derive_seed(cfg.seed, index)})


# ============================================
# One Test
# ============================================

def _record_checks(case: CaseResult, obj: MachineObject, outcome: RunOutcome) -> None:
    for verdict in check_all(outcome.log, obj.meta):
        case.violations[verdict.invariant] = len(verdict.violations)
        case.first_violations.extend(verdict.violations[:MAX_REPORTED_VIOLATIONS])


def evaluate_program(program: IRProgram, cfg: GenConfig, mutation: Mutation | None = None,
                     index: int = 0) -> CaseResult:
    """
    Compile, run and check one program, and compare its traces with the IR.

    The static self-check is skipped for mutated compilers so that only the
    dynamic checkers can catch their faults.
    """
    case = CaseResult(index=index, seed=cfg.seed)
    try:
        obj = compile_program(program, mutation=mutation)
    except ToolchainError as exc:
        case.discarded = str(exc)
        return case
    if mutation is None:
        case.static_issues = verify_object(obj)

    outcome = run(obj, cfg.fuel * MACHINE_FUEL_FACTOR)
    case.machine_status = outcome.status.value
    _record_checks(case, obj, outcome)

    ir = interpret(program, cfg.fuel)
    case.ir_status = ir.status.value
    if cfg.mode is GenMode.WELL_BEHAVED and ir.status is IRStatus.UNDEFINED_BEHAVIOR:
        case.ir_undefined = f"{ir.ub_reason.value} at step {ir.ub_step}"
    case.trace_mismatch = compare_traces(ir.status, ir.trace, outcome.status, derive_trace(outcome.log, obj.meta))
    return case


def run_case(cfg: GenConfig, index: int, mutation: Mutation | None = None) -> CaseResult:
    """Generate and evaluate test `index` of a pipeline run."""
    test_cfg = case_config(cfg, index)
    program = gen_program(test_cfg)
    return evaluate_program(program, test_cfg, mutation, index)


def plan_injections(obj: MachineObject, steps: int, flips: int, rng: random.Random) -> list[Injection]:
    """Random in-range data words overwritten at uniformly random steps."""
    blocks = obj.meta.block_map
    injections = []
    if not blocks:
        return injections
    for _ in range(flips):
        block = rng.choice(blocks)
        target = encode_address(block.component, block.slot, block.base + rng.randrange(block.size), obj.cfg)
        injections.append(Injection(step=rng.randrange(max(1, steps)), target=target,
                                    value=rng.getrandbits(obj.cfg.word_bits)))
    return injections


def attack_case(cfg: GenConfig, index: int, flips: int) -> CaseResult:
    """Run one program twice: once to measure its length, once under data corruption."""
    test_cfg = case_config(cfg, index)
    case = CaseResult(index=index, seed=test_cfg.seed)
    program = gen_program(test_cfg)
    try:
        obj = compile_program(program)
    except ToolchainError as exc:
        case.discarded = str(exc)
        return case
    case.static_issues = verify_object(obj)
    fuel = cfg.fuel * MACHINE_FUEL_FACTOR
    dry = run(obj, fuel)
    rng = random.Random(derive_seed(cfg.seed, index, "attack"))
    outcome = run(obj, fuel, injections=plan_injections(obj, dry.final.steps, flips, rng))
    case.machine_status = outcome.status.value
    _record_checks(case, obj, outcome)
    return case


# ============================================
# Aggregation
# ============================================

def repro_command(experiment: str, cfg: GenConfig, index: int, mutation: Mutation | None = None,
                  flips: int | None = None) -> str:
    parts = ["python sfi_main.py", experiment, f"--mode {cfg.mode.value}", f"--seed {cfg.seed}"]
    if cfg.fuel != GenConfig.model_fields["fuel"].default:
        parts.append(f"--fuel {cfg.fuel}")
    if flips is not None:
        parts.append(f"--flips {flips}")
    if mutation is not None:
        parts.append(f"--mutation {mutation.value}")
    parts.append(f"--only {index}")
    return " ".join(parts)


def _map_cases(worker, args_list: list[tuple], jobs: int) -> list[CaseResult]:
    if jobs <= 1:
        return [worker(*args) for args in args_list]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        futures = [pool.submit(worker, *args) for args in args_list]
        return [future.result() for future in futures]


def _shrink_case(cfg: GenConfig, case: CaseResult, mutation: Mutation | None) -> str | None:
    test_cfg = case_config(cfg, case.index)
    try:
        kinds = case.failure_kinds()
        program = shrink(gen_program(test_cfg),
                         lambda p: bool(evaluate_program(p, test_cfg, mutation).failure_kinds() & kinds))
    except ToolchainError as exc:
        logger.warning("could not shrink test %d: %s", case.index, exc)
        return None
    return print_program(program)


def _collect(report: FuzzReport, cases: list[CaseResult], cfg: GenConfig, experiment: str,
             mutation: Mutation | None, do_shrink: bool, flips: int | None = None) -> FuzzReport:
    for case in sorted(cases, key=lambda c: c.index):
        report.add(case)
        if not case.failed:
            continue
        logger.info("test %d (seed %d) failed: %s", case.index, case.seed, "; ".join(case.reasons()))
        shrunk = _shrink_case(cfg, case, mutation) if do_shrink and experiment == "fuzz" else None
        report.failures.append(FailureCase(
            index=case.index, seed=case.seed, reasons=case.reasons(), violations=case.first_violations,
            repro=repro_command(experiment, cfg, case.index, mutation, flips), shrunk=shrunk,
        ))
    return report


def run_pipeline(cfg: GenConfig, tests: int, mutation: Mutation | None = None, jobs: int = 1,
                 do_shrink: bool = True, only: int | None = None) -> FuzzReport:
    """
    Run `tests` generated programs through the whole toolchain.

    Args:
        cfg: Generator settings; cfg.seed is the master seed
        tests: Number of tests
        mutation: Seeded compiler fault, for proving the checkers can fail
        jobs: Worker processes
        do_shrink: Shrink failing programs and attach them to the report
        only: Run just this test index

    Returns:
        FuzzReport aggregated in test-index order
    """
    indices = [only] if only is not None else list(range(tests))
    logger.info("fuzz: %d %s test(s) from seed %d", len(indices), cfg.mode.value, cfg.seed)
    cases = _map_cases(run_case, [(cfg, i, mutation) for i in indices], jobs)
    report = FuzzReport(mode=cfg.mode, seed=cfg.seed, mutation=mutation)
    return _collect(report, cases, cfg, "fuzz", mutation, do_shrink)


def inject_attack(cfg: GenConfig, tests: int, flips: int, jobs: int = 1, only: int | None = None) -> FuzzReport:
    """
    Corrupt random data words during execution and recheck all invariants.

    Raises:
        ValueError: If flips < 1
    """
    if flips < 1:
        raise ValueError(f"flips must be at least 1, got {flips}")
    indices = [only] if only is not None else list(range(tests))
    logger.info("attack: %d test(s), %d flip(s) each, seed %d", len(indices), flips, cfg.seed)
    cases = _map_cases(attack_case, [(cfg, i, flips) for i in indices], jobs)
    report = FuzzReport(experiment="attack", mode=cfg.mode, seed=cfg.seed)
    return _collect(report, cases, cfg, "attack", None, False, flips)
