"""Audit log records and the JSONL event schema.

One event per line::

    {"ts": 1700000000000000000, "type": "READ",
     "subj": {"key": "p:42", "type": "PROCESS", "attr": "/usr/bin/ssh"},
     "obj":  {"key": "f:/etc/passwd", "type": "FILE", "attr": "/etc/passwd"}}

``ts`` is nanoseconds since the epoch. Other log formats (CDM, auditd) can be
supported by writing a converter that yields :class:`LogEvent` objects.
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass
from pathlib import Path
from typing import IO, Iterable, Iterator, Union


class EventType(enum.Enum):
    READ = "READ"
    WRITE = "WRITE"
    EXEC = "EXEC"
    FORK = "FORK"
    CONNECT = "CONNECT"
    SEND = "SEND"
    RECV = "RECV"
    OPEN = "OPEN"
    CLOSE = "CLOSE"
    OTHER = "OTHER"

    @classmethod
    def parse(cls, value: str) -> "EventType":
        try:
            return cls(value.upper())
        except ValueError:
            return cls.OTHER


class EntityType(enum.Enum):
    PROCESS = "PROCESS"
    FILE = "FILE"
    SOCKET = "SOCKET"
    PIPE = "PIPE"
    MEMORY = "MEMORY"


class EventParseError(ValueError):
    """A log line could not be turned into a :class:`LogEvent`."""

    def __init__(self, field: str, message: str, lineno: int | None = None):
        self.field = field
        self.message = message
        self.lineno = lineno
        where = f"line {lineno}: " if lineno is not None else ""
        super().__init__(f"{where}field '{field}': {message}")


@dataclass(frozen=True)
class LogEvent:
    ts: int
    event_type: EventType
    subject_key: str
    subject_type: EntityType
    subject_attr: str
    object_key: str
    object_type: EntityType
    object_attr: str

    def to_json(self) -> dict:
        return {
            "ts": self.ts,
            "type": self.event_type.value,
            "subj": {
                "key": self.subject_key,
                "type": self.subject_type.value,
                "attr": self.subject_attr,
            },
            "obj": {
                "key": self.object_key,
                "type": self.object_type.value,
                "attr": self.object_attr,
            },
        }


def _entity(record: dict, name: str) -> tuple[str, EntityType, str]:
    ent = record.get(name)
    if not isinstance(ent, dict):
        raise EventParseError(name, "missing or not an object")
    key = ent.get("key")
    if not isinstance(key, str) or not key:
        raise EventParseError(f"{name}.key", "missing or not a non-empty string")
    etype = ent.get("type")
    if not isinstance(etype, str):
        raise EventParseError(f"{name}.type", "missing or not a string")
    try:
        etype = EntityType(etype.upper())
    except ValueError:
        raise EventParseError(f"{name}.type", f"unknown entity type {etype!r}") from None
    attr = ent.get("attr", "")
    if not isinstance(attr, str):
        raise EventParseError(f"{name}.attr", "not a string")
    return key, etype, attr


def parse_event(record: Union[str, dict]) -> LogEvent:
    """Validate one decoded JSON record (or raw line) into a :class:`LogEvent`."""
    if isinstance(record, str):
        try:
            record = json.loads(record)
        except json.JSONDecodeError as exc:
            raise EventParseError("<line>", f"invalid JSON ({exc.msg})") from None
    if not isinstance(record, dict):
        raise EventParseError("<line>", "not a JSON object")
    ts = record.get("ts")
    if isinstance(ts, bool) or not isinstance(ts, int) or ts < 0:
        raise EventParseError("ts", "missing or not a non-negative integer")
    etype = record.get("type")
    if not isinstance(etype, str):
        raise EventParseError("type", "missing or not a string")
    skey, stype, sattr = _entity(record, "subj")
    okey, otype, oattr = _entity(record, "obj")
    return LogEvent(ts, EventType.parse(etype), skey, stype, sattr, okey, otype, oattr)


def read_events(source: Union[str, Path, IO[str]]) -> Iterator[LogEvent]:
    """Yield events from a JSONL path or open text stream; blank lines are skipped."""
    if isinstance(source, (str, Path)):
        with open(source, encoding="utf-8") as fh:
            yield from read_events(fh)
        return
    for lineno, line in enumerate(source, start=1):
        line = line.strip()
        if not line:
            continue
        try:
            yield parse_event(line)
        except EventParseError as exc:
            raise EventParseError(exc.field, exc.message, lineno) from None


def write_events(events: Iterable[LogEvent], path: Union[str, Path]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for e in events:
            fh.write(json.dumps(e.to_json(), sort_keys=True) + "\n")
