"""
File Formats

Canonical JSON for objects and reports (sorted keys, hexadecimal addresses)
and a JSON-lines execution log whose first line is a versioned header.
"""

import json
from pathlib import Path

from pydantic import BaseModel, TypeAdapter

from helpers.backend_helpers import OBJECT_FORMAT_VERSION, MachineObject
from helpers.errors import FormatVersionError
from helpers.ir_helpers import TraceEvent
from helpers.machine_helpers import LogEvent, RunOutcome

LOG_FORMAT = "sfi-log"
LOG_FORMAT_VERSION = 1
OBJECT_FORMAT = "sfi-object"
REPORT_FORMAT = "sfi-report"

_LOG_EVENT = TypeAdapter(LogEvent)


class LogHeader(BaseModel):
    format: str = LOG_FORMAT
    format_version: int = LOG_FORMAT_VERSION
    status: str
    steps: int
    stuck_reason: str | None = None
    final_r3: int
    events: int


def _canonical(data) -> str:
    return json.dumps(data, sort_keys=True, indent=2) + "\n"


def _load_json(text: str, what: str) -> dict:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise FormatVersionError(f"{what} is not valid JSON: {exc}") from None
    if not isinstance(data, dict):
        raise FormatVersionError(f"{what} must be a JSON object")
    return data


def _check_header(data: dict, expected_format: str, expected_version: int) -> None:
    if data.get("format") != expected_format:
        raise FormatVersionError(f"expected a {expected_format} file, got format {data.get('format')!r}")
    if data.get("format_version") != expected_version:
        raise FormatVersionError(f"{expected_format} version {data.get('format_version')!r} is not supported "
                                 f"(expected {expected_version})")


# ============================================
# Object Files
# ============================================

def dump_object(obj: MachineObject) -> str:
    return _canonical(obj.model_dump(mode="json"))


def load_object(text: str) -> MachineObject:
    """
    Parse an object file.

    Raises:
        FormatVersionError: On a foreign format or an unsupported version
        pydantic.ValidationError: On malformed content
    """
    data = _load_json(text, "object file")
    _check_header(data, OBJECT_FORMAT, OBJECT_FORMAT_VERSION)
    return MachineObject.model_validate(data)


def read_object(path: str | Path) -> MachineObject:
    return load_object(Path(path).read_text(encoding="utf-8"))


# ============================================
# Execution Logs
# ============================================

def dump_log(outcome: RunOutcome) -> str:
    """One JSON header line, then one event per line."""
    header = LogHeader(
        status=outcome.status.value, steps=outcome.final.steps, stuck_reason=outcome.stuck_reason,
        final_r3=outcome.final.regs[3], events=len(outcome.log),
    )
    lines = [json.dumps(header.model_dump(mode="json"), sort_keys=True)]
    lines += [json.dumps(event.model_dump(mode="json"), sort_keys=True) for event in outcome.log]
    return "\n".join(lines) + "\n"


def load_log(text: str) -> tuple[LogHeader, list[LogEvent]]:
    """
    Parse a log file.

    Raises:
        FormatVersionError: On a missing or foreign header
    """
    lines = [line for line in text.splitlines() if line.strip()]
    if not lines:
        raise FormatVersionError("log file is empty")
    data = _load_json(lines[0], "log header")
    _check_header(data, LOG_FORMAT, LOG_FORMAT_VERSION)
    header = LogHeader.model_validate(data)
    events = [_LOG_EVENT.validate_python(_load_json(line, f"log line {n}"))
              for n, line in enumerate(lines[1:], start=2)]
    return header, events


def read_log(path: str | Path) -> tuple[LogHeader, list[LogEvent]]:
    return load_log(Path(path).read_text(encoding="utf-8"))


# ============================================
# Reports and Traces
# ============================================

def dump_report(report: BaseModel) -> str:
    return _canonical(report.model_dump(mode="json"))


def format_trace(trace: list[TraceEvent]) -> str:
    return "".join(f"{event}\n" for event in trace)
