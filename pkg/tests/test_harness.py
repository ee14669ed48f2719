import json
import os
from dataclasses import replace
from pathlib import Path

import pytest

from companion_av.common import FeatureKind, HazardKind, Level
from companion_av.errors import LogFormatError, PermissionDeniedError, ScenarioParseError, ScenarioValidationError
from companion_av.harness.cli import main
from companion_av.harness.eventlog import Record, TickBuffer, audit_hierarchy, audit_order, dumps, read_log
from companion_av.harness.routing import route_user_event
from companion_av.harness.runner import emit_alert, exit_code, replay, run
from companion_av.harness.scenario import (
    DEFAULT_PERMISSIONS,
    EventKind,
    UserEvent,
    builtin_names,
    load_scenario,
    parse_scenario,
    resolve_path,
)
from companion_av.representation import Hazard
from companion_av.strategic import AlertRecipient, AlertRequest

GOLDEN = Path(__file__).parent / "golden"
UPDATE = os.environ.get("UPDATE_GOLDEN") == "1"

MINIMAL = """
map:
  nodes: {A: {x: 0, y: 0}, B: {x: 3000, y: 0}, C: {x: 6000, y: 0}}
  edges: [[A, B, 300], [B, C, 300]]
stops:
  - {node: A, lateral_slot: A1, slope_deg: 1, curb_height_cm: 12}
  - {node: C, lateral_slot: C1, slope_deg: 2, curb_height_cm: 12}
profiles:
  - {id: p1, age: 40, capabilities: [CAN_CLIMB_STEP]}
mission: {goal_node: C, manifest: [p1]}
initial: {node: A}
actors: {p1: ADULT}
"""


def golden(name, text):
    path = GOLDEN / name
    if UPDATE:
        path.write_text(text)
    return path.read_text()


def builtin_text(name):
    return resolve_path(f"builtin:{name}")[0]


class TestLoading:
    def test_minimal_defaults(self):
        spec = parse_scenario(MINIMAL)
        assert spec.horizon == 3600.0 and spec.seed == 0
        assert spec.odd.min_solo_age == 12
        assert set(spec.permissions) == set(DEFAULT_PERMISSIONS)

    def test_undeclared_actor(self):
        bad = MINIMAL + "events:\n  - {tick: 0, actor: ghost, level: TACTICAL, kind: REQUEST_STOP}\n"
        with pytest.raises(ScenarioValidationError) as exc:
            parse_scenario(bad)
        assert "ghost" in str(exc.value)

    def test_parse_error_has_line(self):
        with pytest.raises(ScenarioParseError) as exc:
            parse_scenario(MINIMAL + "mission: [unclosed\n")
        assert exc.value.line is not None

    def test_wrong_type_names_field(self):
        with pytest.raises(ScenarioParseError) as exc:
            parse_scenario(MINIMAL.replace("age: 40", "age: forty"))
        assert exc.value.field and "age" in exc.value.field

    def test_missing_file(self):
        with pytest.raises(FileNotFoundError):
            load_scenario("builtin:NOPE")

    def test_s4_matches_golden_structure(self):
        spec = load_scenario("builtin:S4")
        got = json.dumps(json.loads(dumps(spec)), indent=1, sort_keys=True) + "\n"
        assert got == golden("S4_spec.json", got)

    def test_builtins_all_load(self):
        names = builtin_names()
        assert {"S1", "S2", "S3", "S4", "S5"} <= set(names)
        for n in names:
            load_scenario(f"builtin:{n}")


def ev(kind, level=Level.STRATEGIC, **payload):
    return UserEvent(0, "p1", level, kind, tuple(payload.items()))


class TestRouting:
    def test_child_cannot_redirect(self):
        with pytest.raises(PermissionDeniedError):
            route_user_event(ev(EventKind.CHANGE_DESTINATION, goal_node="H"), DEFAULT_PERMISSIONS, "CHILD")

    def test_guardian_redirects(self):
        r = route_user_event(ev(EventKind.CHANGE_DESTINATION, goal_node="H"), DEFAULT_PERMISSIONS, "GUARDIAN_REMOTE")
        assert r.target == "strategic"

    def test_emergency_stop_is_a_pull_over_request(self):
        r = route_user_event(ev(EventKind.EMERGENCY_STOP, Level.TACTICAL), DEFAULT_PERMISSIONS, "CHILD")
        assert (r.target, r.request) == ("tactical", "PULL_OVER")

    def test_unknown_role_is_denied(self):
        with pytest.raises(PermissionDeniedError):
            route_user_event(ev(EventKind.REQUEST_STOP, Level.TACTICAL), DEFAULT_PERMISSIONS, None)

    def test_emergency_stop_end_to_end(self):
        text = builtin_text("S1") + "events:\n  - {tick: 100000, actor: p1, level: TACTICAL, kind: EMERGENCY_STOP}\n"
        log = run(parse_scenario(text))
        at = [r for r in log.records if r.tick == 100_000]
        assert any(r.type == "directive" and r.payload["maneuver"] == "PULL_OVER" for r in at)
        assert any(r.type == "plan" and r.payload["action"] == "STOP_IMMEDIATELY" for r in at)
        assert (log.verdict["outcome"], log.verdict["reason"]) == ("STOPPED", "PERSON_REQUEST")
        # the request never reaches actuators as a raw write
        assert not [r for r in log.records if r.module == "harness" and r.flow is not None]


@pytest.fixture(scope="module")
def s1_log():
    return run(load_scenario("builtin:S1"))


@pytest.fixture(scope="module")
def s4_log():
    return run(load_scenario("builtin:S4"))


class TestRun:
    def test_s1_golden(self, s1_log):
        assert s1_log.text() == golden("S1.jsonl", s1_log.text())
        assert s1_log.verdict["outcome"] == "COMPLETED"
        assert s1_log.verdict["hazards"] == [] and s1_log.verdict["alerts"] == []

    def test_s4_golden(self, s4_log):
        assert s4_log.text() == golden("S4.jsonl", s4_log.text())
        assert (s4_log.outcome, s4_log.verdict["goal"]) == ("DIVERTED", "H")

    def test_s4_alert_before_arrival(self, s4_log):
        alert = s4_log.of_type("alert")[0]
        msg = json.loads(alert.payload["message"])
        assert msg["recipient"] == "RESCUE" and msg["hazard_kind"] == "MEDICAL_EMERGENCY"
        arrival = [r for r in s4_log.of_type("vehicle") if r.payload["node"] == "H"]
        assert alert.tick < arrival[0].tick

    def test_horizon_zero(self):
        log = run(load_scenario("builtin:S1"), until=0)
        assert [r.type for r in log.records] == ["verdict"]
        assert log.outcome == "STOPPED" and log.verdict["node"] == "A"

    def test_logs_are_ordered(self, s1_log, s4_log):
        assert audit_order(s1_log.records) == [] and audit_order(s4_log.records) == []

    def test_tick_buffer_orders_by_priority(self):
        buf = TickBuffer()
        for m in ("harness", "plant", "strategic", "perception"):
            buf.add(Record(0, m, "x", {}))
        assert [r.module for r in buf.flush()] == ["plant", "perception", "strategic", "harness"]
        with pytest.raises(ValueError):
            buf.add(Record(0, "radio", "x", {}))

    def test_hierarchy_audit_flags_skipped_level(self):
        bad = Record(0, "strategic", "plan", {}, ("command", "operational"))
        assert audit_hierarchy([bad])

    def test_every_event_accounted_for_once(self):
        spec = load_scenario("builtin:S5")
        log = run(spec)
        seen = [r.payload["event"] for r in log.of_type("user_event")]
        assert len(seen) == len(spec.events)
        assert [e["tick"] for e in seen] == [e.tick for e in spec.events]
        assert log.of_type("user_event")[0].payload["reason"] == "PERMISSION_DENIED"

    def test_strategic_triggers_logged(self, s4_log):
        triggers = {t for r in s4_log.of_type("replan") for t in r.payload["trigger"]}
        assert "PERIOD" in triggers and len(triggers) > 1


class TestReplay:
    def test_identical(self, s1_log, tmp_path):
        p = tmp_path / "s1.jsonl"
        s1_log.write(p)
        assert replay(p).identical

    def test_edited_record(self, s1_log, tmp_path):
        lines = s1_log.lines()
        idx = next(i for i, l in enumerate(lines) if '"type":"directive"' in l)
        rec = json.loads(lines[idx])
        rec["payload"]["speed_limit_mps"] = 99.0
        lines[idx] = dumps(rec)
        p = tmp_path / "edited.jsonl"
        p.write_text("\n".join(lines) + "\n")
        rep = replay(p)
        assert not rep.identical
        assert rep.line == idx + 1
        assert (rep.tick, rep.module) == (rec["tick"], rec["module"])

    def test_seeds_diverge_only_in_physiology(self, s1_log):
        other = run(load_scenario("builtin:S1"), seed=12)
        a, b = s1_log.records, other.records
        first = next(i for i, (x, y) in enumerate(zip(a, b)) if x != y)
        assert a[first].type == "physiology"
        strip = lambda recs: [r for r in recs if r.type != "physiology"]
        assert strip(a) == strip(b)

    def test_bad_log(self, tmp_path):
        p = tmp_path / "bad.jsonl"
        p.write_text('{"format": "something-else"}\n')
        with pytest.raises(LogFormatError):
            read_log(p)


class TestAlerts:
    def test_wire_format(self):
        h = Hazard(HazardKind.TRAPPED_RISK, "p1", 2, (FeatureKind.SUBSYSTEM_HEALTH,))
        line = emit_alert(AlertRequest(AlertRecipient.CONTROL_ROOM, h), 606_300, "C")
        assert json.loads(line) == {"tick": 606_300, "recipient": "CONTROL_ROOM", "hazard_kind": "TRAPPED_RISK",
                                    "subject": "p1", "node": "C"}
        assert "\n" not in line

    def test_no_hazards_no_alerts(self, s1_log):
        assert s1_log.of_type("alert") == [] and s1_log.alerts == []


class TestCli:
    def test_run_exit_code_follows_verdict(self, tmp_path, capsys):
        log = tmp_path / "s4.jsonl"
        assert main(["run", "builtin:S4", "--log", str(log)]) == 10
        assert json.loads(capsys.readouterr().out)["outcome"] == "DIVERTED"
        assert main(["replay", str(log)]) == 0

    def test_validate(self, tmp_path, capsys):
        assert main(["validate", "builtin:S2"]) == 0
        bad = tmp_path / "bad.yaml"
        bad.write_text("map: [oops\n")
        assert main(["validate", str(bad)]) == 2

    def test_replay_divergence_and_bad_log(self, s1_log, tmp_path, capsys):
        lines = s1_log.lines()
        lines[-1] = lines[-1].replace("COMPLETED", "RETURNED")
        p = tmp_path / "x.jsonl"
        p.write_text("\n".join(lines) + "\n")
        assert main(["replay", str(p)]) == 4
        junk = tmp_path / "junk.jsonl"
        junk.write_text("not json\n")
        assert main(["replay", str(junk)]) == 3

    def test_exit_code_table(self, s1_log):
        assert exit_code(s1_log) == 0
        assert exit_code(replace(s1_log, verdict=dict(s1_log.verdict, outcome="REJECTED"))) == 13
