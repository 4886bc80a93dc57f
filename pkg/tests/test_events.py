import io
import json

import pytest

from provfaas.events import (
    EntityType,
    EventParseError,
    EventType,
    parse_event,
    read_events,
    write_events,
)

GOOD = {
    "ts": 5,
    "type": "read",
    "subj": {"key": "p:1", "type": "PROCESS", "attr": "/usr/bin/ssh -v"},
    "obj": {"key": "f:/etc/hosts", "type": "FILE", "attr": "/etc/hosts"},
}


def test_parse_valid_record():
    e = parse_event(GOOD)
    assert e.event_type is EventType.READ
    assert e.subject_type is EntityType.PROCESS
    assert (e.subject_key, e.object_key) == ("p:1", "f:/etc/hosts")


def test_unknown_event_type_maps_to_other():
    e = parse_event(dict(GOOD, type="MPROTECT"))
    assert e.event_type is EventType.OTHER


@pytest.mark.parametrize(
    "patch, field",
    [
        ({"ts": -1}, "ts"),
        ({"ts": "12"}, "ts"),
        ({"ts": True}, "ts"),
        ({"type": 3}, "type"),
        ({"subj": None}, "subj"),
        ({"obj": {"key": "", "type": "FILE"}}, "obj.key"),
        ({"obj": {"key": "x", "type": "DEVICE"}}, "obj.type"),
        ({"subj": {"key": "x", "type": "PROCESS", "attr": 4}}, "subj.attr"),
    ],
)
def test_malformed_record_names_the_field(patch, field):
    with pytest.raises(EventParseError) as info:
        parse_event(dict(GOOD, **patch))
    assert info.value.field == field


def test_read_events_reports_line_number():
    text = json.dumps(GOOD) + "\n\n" + "{not json\n"
    with pytest.raises(EventParseError) as info:
        list(read_events(io.StringIO(text)))
    assert info.value.lineno == 3
    assert "line 3" in str(info.value)


def test_write_read_round_trip(tmp_path):
    events = [parse_event(dict(GOOD, ts=t)) for t in range(4)]
    p = tmp_path / "log.jsonl"
    write_events(events, p)
    assert list(read_events(p)) == events
