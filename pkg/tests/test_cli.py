"""
End-to-end runs of the command line, through `sfi_main.main`.
"""

import json

import pytest

import sfi_main
from conftest import CALL_PROGRAM, RETURN_PROGRAM
from helpers.format_helpers import read_object
from helpers.isa_helpers import R_SFI, Store, decode_address, encode_address
from helpers.machine_helpers import StoreEv


@pytest.fixture
def compiled(tmp_path, capsys):
    """Compile CALL_PROGRAM and run it; returns (ir, object, log) paths."""
    source = tmp_path / "prog.ir"
    source.write_text(CALL_PROGRAM)
    obj, log = tmp_path / "prog.obj", tmp_path / "prog.log"
    assert sfi_main.main(["compile", str(source), "-o", str(obj)]) == 0
    assert sfi_main.main(["run", str(obj), "-o", str(log)]) == 0
    capsys.readouterr()
    return source, obj, log


def test_compile_writes_an_object(compiled, capsys):
    source, obj, _ = compiled
    assert read_object(obj).meta.main == (1, 0)
    assert sfi_main.main(["compile", str(source), "-o", str(obj)]) == 0
    assert "✅ Compiled 2 component(s)" in capsys.readouterr().out


def test_compile_reports_well_formedness_errors(tmp_path, capsys):
    source = tmp_path / "bad.ir"
    source.write_text(CALL_PROGRAM.replace("  import 2 0\n", ""))
    assert sfi_main.main(["compile", str(source), "-o", str(tmp_path / "bad.obj")]) == 1
    assert "CallNotImported" in capsys.readouterr().out
    assert not (tmp_path / "bad.obj").exists()


def test_compile_rejects_too_many_components(tmp_path, capsys):
    components = "".join(f"component {c}\n  export 0\n  proc 0\n    return\n  end\nend\n" for c in range(1, 17))
    source = tmp_path / "wide.ir"
    source.write_text(f"ir 1\nmain 1 0\n{components}")
    assert sfi_main.main(["compile", str(source)]) == 2
    assert "TooManyComponents" in capsys.readouterr().err


def test_compile_reports_parse_position(tmp_path, capsys):
    source = tmp_path / "prog.ir"
    source.write_text("ir 1\nmain 1 0\ncomponent 1\n  proc 0\n    frob r1\n  end\nend\n")
    assert sfi_main.main(["compile", str(source)]) == 2
    assert f"{source}:5:5" in capsys.readouterr().err


def test_check_passes_on_a_compiled_run(compiled, capsys):
    _, obj, log = compiled
    assert sfi_main.main(["check", str(obj), str(log)]) == 0
    out = capsys.readouterr().out
    assert out.count("✅ invariant") == 3


def test_check_flags_a_forged_store(compiled, tmp_path, capsys):
    _, obj, log = compiled
    meta_obj = read_object(obj)
    pc = next(a for a, i in sorted(meta_obj.code_map.items())
              if isinstance(i, Store) and i.rp == R_SFI and decode_address(a).component == 1)
    forged = StoreEv(step=999, pc=pc, target=encode_address(2, 1, 0), value=7)
    tampered = tmp_path / "tampered.log"
    tampered.write_text(log.read_text() + json.dumps(forged.model_dump(mode="json")) + "\n")
    report = tmp_path / "check.json"
    assert sfi_main.main(["check", str(obj), str(tampered), "--invariant", "1", "--report", str(report)]) == 1
    assert "❌ invariant 1" in capsys.readouterr().out
    assert json.loads(report.read_text())["verdicts"][0]["violations"]


def test_trace_prints_calls_and_returns(compiled, capsys):
    _, obj, log = compiled
    assert sfi_main.main(["trace", str(obj), str(log)]) == 0
    assert capsys.readouterr().out.splitlines() == ["Call(c1, p0, 42, c2)", "Ret(c2, 42, c1)"]


def test_trace_compares_with_the_interpreter(compiled, tmp_path, capsys):
    source, obj, log = compiled
    assert sfi_main.main(["trace", str(obj), str(log), "--ir", str(source), "-o", str(tmp_path / "t")]) == 0
    assert "✅ traces agree" in capsys.readouterr().out


def test_trace_mismatch_fails(compiled, tmp_path):
    _, obj, log = compiled
    other = tmp_path / "other.ir"
    other.write_text(RETURN_PROGRAM)
    assert sfi_main.main(["trace", str(obj), str(log), "--ir", str(other), "-o", str(tmp_path / "t")]) == 1


def test_fuzz_reports_are_reproducible(tmp_path):
    first, second = tmp_path / "a.json", tmp_path / "b.json"
    for report in (first, second):
        assert sfi_main.main(["fuzz", "--tests", "5", "--seed", "7", "--report", str(report)]) == 0
    assert first.read_text() == second.read_text()
    assert json.loads(first.read_text())["clean"] is True


def test_fuzz_with_seeded_fault_fails(capsys):
    assert sfi_main.main(["fuzz", "--tests", "20", "--seed", "7", "--mutation", "missing-or", "--no-shrink"]) == 1
    assert "--mutation missing-or" in capsys.readouterr().out


def test_attack_passes():
    assert sfi_main.main(["attack", "--tests", "3", "--seed", "1"]) == 0


def test_disasm_lists_bundles(compiled, capsys):
    _, obj, _ = compiled
    assert sfi_main.main(["disasm", str(obj)]) == 0
    out = capsys.readouterr().out
    assert "; ---- bundle 0 ----" in out
    assert "entry c2.p0" in out


def test_unsupported_object_version(compiled, capsys):
    _, obj, log = compiled
    data = json.loads(obj.read_text())
    data["format_version"] = 2
    obj.write_text(json.dumps(data))
    assert sfi_main.main(["run", str(obj), "-o", str(log)]) == 2
    assert "version 2 is not supported" in capsys.readouterr().err


def test_unknown_mutation_is_a_usage_error():
    with pytest.raises(SystemExit) as exc:
        sfi_main.main(["fuzz", "--mutation", "bogus"])
    assert exc.value.code == 2
