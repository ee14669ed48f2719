"""The deterministic tick loop wiring plant, perception, the representation
tiers and the three mission-execution levels, plus alerts and replay."""

from __future__ import annotations

import json
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

import numpy as np

from ..common import (
    OPERATIONAL_PERIOD_MS,
    STRATEGIC_PERIOD_MS,
    TACTICAL_PERIOD_MS,
    FeatureKind,
    Origin,
    ReportStatus,
    Subsystem,
    Zone,
    ms,
)
from ..errors import CompanionError, LogFormatError, PermissionDeniedError, UnauthorizedOriginError
from ..odd import check_runtime
from ..operational import execute, reflex_check, report_actuation
from ..perception import FaultMonitor, extract_features, ingest_external
from ..plant import (
    DEFAULT_SENSORS,
    FIXED_ENTITIES,
    PassengerTruth,
    activate_disturbances,
    initial_plant,
    sense,
    step_plant,
)
from ..representation import (
    assess_hazards,
    initial_situation,
    initial_world,
    update_situation_model,
    update_world_model,
)
from ..signals import ExternalMessage, Feature, InfoOutput
from ..strategic import (
    NOMINAL_TACTICAL,
    Action,
    AlertRequest,
    PerformanceReport,
    Rejection,
    StrategyPlan,
    accept_mission,
    replan,
)
from ..tactical import HOLD, TacticalController, TacticalDirective
from .eventlog import EventLog, Record, TickBuffer, dumps, read_log
from .routing import route_user_event
from .scenario import EventKind, ScenarioSpec, load_scenario

EXIT_CODES = {"COMPLETED": 0, "DIVERTED": 10, "RETURNED": 11, "STOPPED": 12, "REJECTED": 13}

_ROLE_ORIGIN = {"GUARDIAN_REMOTE": Origin.GUARDIAN_REMOTE, "CONTROL_ROOM": Origin.CONTROL_ROOM}


def emit_alert(req: AlertRequest, tick: int, node: Optional[str]) -> str:
    """Single-line control-room message for an alert request."""
    return dumps(
        {
            "tick": tick,
            "recipient": req.recipient,
            "hazard_kind": req.hazard.kind,
            "subject": req.hazard.subject,
            "node": node,
        }
    )


def _plan_payload(plan: StrategyPlan) -> Dict[str, Any]:
    return {
        "action": plan.action,
        "goal": plan.goal_node,
        "route": list(plan.route),
        "alert": None if plan.alert is None else {"recipient": plan.alert.recipient, "hazard": plan.alert.hazard},
        "rationale": [{"action": o.action, "goal": o.goal, "score": o.score} for o in plan.rationale],
    }


def _directive_key(d: TacticalDirective):
    return (d.maneuver, d.target_stop, d.door_schedule, d.platform_cmd, d.speed_limit_mps, d.route, d.stop_node)


def _command_key(cmds) -> Tuple:
    by = {c.subsystem: c.setpoint for c in cmds}
    drive = "ACCEL" if by.get(Subsystem.DRIVETRAIN, 0) > 0 else "BRAKE" if by.get(Subsystem.BRAKE, 0) > 0 else "IDLE"
    return (drive, by.get(Subsystem.STEERING), by.get(Subsystem.DOOR), by.get(Subsystem.LOCK), by.get(Subsystem.PLATFORM))


@dataclass
class _Changes:
    """Remembers the last value logged under each key."""

    last: Dict[Any, Any]

    def changed(self, key, value) -> bool:
        if key in self.last and self.last[key] == value:
            return False
        self.last[key] = value
        return True


class Simulation:
    def __init__(self, spec: ScenarioSpec, seed: Optional[int] = None, until: Optional[float] = None):
        self.spec = spec
        self.seed = spec.seed if seed is None else int(seed)
        self.until = until
        self.rng = np.random.default_rng(self.seed)

    # -- setup ---------------------------------------------------------------

    def _initial(self):
        spec = self.spec
        zones = dict(spec.initial.zones)
        hr = dict(spec.initial.heart_rate)
        truths = []
        for p in spec.profiles:
            zone = zones.get(p.id, Zone.OUTSIDE_NEAR if p.id in spec.mission.manifest else Zone.ABSENT)
            zones[p.id] = zone
            base = hr.get(p.id, 72.0)
            dist = {Zone.OUTSIDE_NEAR: 2.0, Zone.ABSENT: 100.0, Zone.DOORWAY: 0.5, Zone.ON_PLATFORM: 0.5}.get(zone, 0.0)
            truths.append(PassengerTruth(p.id, zone, dist, p.needs_platform, hr_base=base, hr=base))
        plant = initial_plant(
            spec.initial.node,
            spec.initial.slot,
            truths,
            spec.externals,
            spec.initial.range_m,
            spec.initial.cabin_temp,
            spec.initial.ambient_temp,
        )
        slots = {s.lateral_slot for s in spec.stops}
        entities = FIXED_ENTITIES | {p.id for p in spec.profiles} | set(spec.externals) | slots
        entities |= {s.value for s in Subsystem}
        pose = plant.pose(spec.map)
        sit = initial_situation(pose, zones, entities, spec.helpers)
        w = initial_world(spec.map, pose, spec.profiles)
        return plant, sit, w

    # -- main loop -----------------------------------------------------------

    def run(self) -> EventLog:
        spec = self.spec
        graph = spec.map
        horizon_s = spec.horizon if self.until is None else min(spec.horizon, float(self.until))
        horizon_ms = ms(horizon_s)
        log = EventLog({"scenario": spec.source, "digest": spec.digest, "seed": self.seed, "until": self.until})
        plant, sit, w = self._initial()
        passengers = [p.id for p in spec.profiles]
        profiles = {p.id: p for p in spec.profiles}

        tac = TacticalController(graph, profiles, spec.door_unlock_lead)
        monitor = FaultMonitor()
        seen = _Changes({})
        plan: Optional[StrategyPlan] = None
        tac_report = NOMINAL_TACTICAL
        directive = HOLD
        commands: list = []
        cues: Dict[str, str] = {}
        pending: List[str] = []
        odd_seen = set()
        alerts_sent = set()
        hazards_seen = set()
        stop_requested = False
        mission_obj = spec.mission
        prev_hazards: Tuple = ()
        prev_active: Tuple = ()
        tac_sig = None
        outcome = None

        events = list(spec.events)
        external = list(spec.external)

        if horizon_ms <= 0:
            outcome = ("STOPPED", "HORIZON")
            return self._finish(log, 0, outcome, plan, sit, hazards_seen)

        tick = 0
        for tick in range(0, horizon_ms + 1, OPERATIONAL_PERIOD_MS):
            buf = TickBuffer()

            def emit(module, type_, payload, flow=None):
                buf.add(Record(tick, module, type_, _json(payload), flow))

            # plant
            active = activate_disturbances(spec.disturbances, tick)
            for d in active:
                if d not in prev_active:
                    emit("plant", "disturbance", {"subtype": d.subtype, "state": "ONSET", "params": dict(d.params)})
            for d in prev_active:
                if d not in active:
                    emit("plant", "disturbance", {"subtype": d.subtype, "state": "EXPIRED"})
            prev_active = active
            if tick == 0:
                frame, reports = sense(plant, graph), []
            else:
                plant, frame, reports = step_plant(plant, commands, active, tick, graph, self.rng, cues)
                cues = {}
            self._log_plant(emit, seen, plant, reports, tick)

            # scripted people and remote parties
            routed_strategic = []
            inbound = [
                ExternalMessage(tick, x.origin, (Feature(FeatureKind.EXTERNAL_INFO if x.kind == "INFO" else FeatureKind(x.kind), x.subject, x.value, x.origin.value, tick),))
                for x in external
                if x.tick == tick
            ]
            for ev in [e for e in events if e.tick == tick]:
                role = spec.role_of(ev.actor)
                try:
                    routed = route_user_event(ev, spec.permissions, role)
                except PermissionDeniedError as exc:
                    emit("harness", "user_event", {"event": ev, "status": "REJECTED", "reason": exc.code})
                    continue
                emit("harness", "user_event", {"event": ev, "status": "ROUTED", "target": routed.target, "request": routed.request})
                if ev.kind == EventKind.EMERGENCY_STOP:
                    tac.emergency_stop()
                    stop_requested = True
                elif ev.kind == EventKind.REQUEST_STOP:
                    tac.request_stop(ms(float(ev.get("duration_s", 30))))
                elif ev.kind == EventKind.EXTERNAL_MESSAGE:
                    origin = _ROLE_ORIGIN.get(role, Origin.CONTROL_ROOM)
                    kind = FeatureKind(ev.get("kind", "EXTERNAL_INFO"))
                    value = ev.get("value")
                    value = tuple(value) if isinstance(value, list) else value
                    inbound.append(ExternalMessage(tick, origin, (Feature(kind, ev.get("subject", "environment"), value, origin.value, tick),)))
                else:
                    routed_strategic.append(ev)

            # perception
            fs = extract_features(frame, DEFAULT_SENSORS, passengers)
            for msg in inbound:
                try:
                    fs = fs.merged(ingest_external(msg, spec.authorized_origins))
                    emit("perception", "external", {"origin": msg.origin, "features": list(msg.payload)})
                except UnauthorizedOriginError as exc:
                    emit("perception", "external_rejected", {"origin": msg.origin, "reason": exc.code})
            faults = monitor.update(reports) if tick > 0 else []
            if seen.changed("faults", tuple(faults)):
                emit("perception", "faults", {"faults": faults})

            # representation
            sit = update_situation_model(sit, fs, spec.profiles)
            w = update_world_model(w, sit, tick)
            hazards = tuple(assess_hazards(sit, faults, spec.profiles))
            actors = tuple((a.id, a.zone.value, a.health.value, a.role.value) for a in sit.actors)
            if seen.changed("actors", actors):
                emit("representation", "actors", {"actors": [list(a) for a in actors]})
            cond = (sorted(sit.conditions.weather), sorted(sit.conditions.blocked_edges))
            if seen.changed("conditions", cond):
                emit("representation", "conditions", {"weather": cond[0], "blocked_edges": cond[1]})
            hazards_changed = hazards != prev_hazards
            if hazards_changed:
                emit("representation", "hazards", {"hazards": list(hazards)})
                hazards_seen.update((h.kind.value, h.subject) for h in hazards)
            prev_hazards = hazards

            # operational report upward
            op_report = report_actuation(monitor.window) if tick > 0 else PerformanceReport("OPERATIONAL")
            if seen.changed("op_report", op_report):
                emit("operational", "report", op_report, ("report", "tactical"))

            # strategic
            plan_changed = False
            triggers = list(pending)
            pending = []
            if tick == 0:
                result = accept_mission(mission_obj, spec.profiles, spec.odd, w, sit.conditions.weather, spec.assistants)
                emit("odd", "mission_check", {"ok": not isinstance(result, Rejection),
                                              "violations": list(result.violations) if isinstance(result, Rejection) else []})
                if isinstance(result, Rejection):
                    emit("strategic", "mission", {"status": "REJECTED", "goal": mission_obj.goal_node})
                    outcome = ("REJECTED", ",".join(sorted({v.dimension.value for v in result.violations})))
                else:
                    plan = result
                    plan_changed = True
                    emit("strategic", "mission", {"status": "ACCEPTED", "goal": mission_obj.goal_node})
            for ev in routed_strategic:
                if plan is None:
                    continue
                goal = ev.get("goal_node", plan.mission_goal)
                manifest = tuple(ev.get("manifest", plan.manifest))
                obj = type(mission_obj)(goal, manifest, mission_obj.urgency, ev.actor, mission_obj.deadline)
                try:
                    result = accept_mission(obj, spec.profiles, spec.odd, w, sit.conditions.weather, spec.assistants)
                except (CompanionError, ValueError) as exc:  # planning errors become logged rejections
                    emit("strategic", "mission", {"status": "REJECTED", "goal": goal, "reason": getattr(exc, "code", str(exc))})
                    continue
                if isinstance(result, Rejection):
                    emit("odd", "mission_check", {"ok": False, "violations": list(result.violations)})
                    emit("strategic", "mission", {"status": "REJECTED", "goal": goal})
                    continue
                mission_obj = obj
                new = StrategyPlan(
                    action=Action.CONTINUE, goal_node=goal, route=result.route, mission_goal=goal,
                    departure_node=plan.departure_node, manifest=manifest, constraints=result.constraints,
                )
                emit("strategic", "mission", {"status": "ACCEPTED", "goal": goal})
                plan, plan_changed = new, True
                if tac.phase in ("DONE", "ARRIVED"):
                    tac.phase = "EN_ROUTE"
            if plan is not None and outcome is None:
                if tick % STRATEGIC_PERIOD_MS == 0 and tick > 0:
                    triggers.append("PERIOD")
                if hazards_changed:
                    triggers.append("HAZARD")
                if stop_requested and not plan.override:
                    triggers.append("STOP_REQUEST")
                if triggers:
                    new = replan(plan, w, hazards, tac_report, stop_requested)
                    changed = new != plan
                    emit("strategic", "replan", {"trigger": sorted(set(triggers)), "action": new.action,
                                                 "goal": new.goal_node, "changed": changed})
                    if changed:
                        plan, plan_changed = new, True
                if plan_changed:
                    w = w.with_route(plan.route)
                    emit("strategic", "plan", _plan_payload(plan), ("command", "tactical"))
                    emit("strategic", "info", InfoOutput(tick, "STRATEGIC", "ONBOARD", "PLAN", (plan.action.value, plan.goal_node)))
                if plan.alert is not None:
                    key = (plan.alert.hazard.kind, plan.alert.hazard.subject)
                    if key not in alerts_sent:
                        alerts_sent.add(key)
                        msg = emit_alert(plan.alert, tick, w.position.heading_node)
                        log.alerts.append(msg)
                        emit("strategic", "info", InfoOutput(tick, "STRATEGIC", "REMOTE", "ALERT", (plan.alert.recipient.value,)))
                        emit("harness", "alert", {"message": msg})

                # ODD runtime check
                if tick % STRATEGIC_PERIOD_MS == 0:
                    verdict = check_runtime(spec.odd, w, tick / 1000.0, sit.conditions.weather, spec.assistants)
                    fresh = [v for v in verdict.violations if v not in odd_seen]
                    odd_seen.update(verdict.violations)
                    if fresh:
                        emit("odd", "runtime_violation", {"violations": fresh})
                        pending.append("ODD")

            # tactical
            if plan is not None and outcome is None:
                pose = sit.self_representation.pose
                snap = sit.self_representation
                sig = (snap.door, snap.lock, snap.platform, pose.node, pose.slot, pose.speed == 0.0,
                       tuple((a.id, a.zone) for a in sit.actors))
                due = tick % TACTICAL_PERIOD_MS == 0 or plan_changed or sig != tac_sig or stop_requested
                tac_sig = sig
                if due:
                    out = tac.step(plan, sit, op_report, tick)
                    for task, a, b in out.transitions:
                        emit("tactical", "boarding", {"task": task, "from": a, "to": b})
                    for info in out.infos:
                        emit("tactical", "info", info)
                        if info.audience == "ONBOARD" and info.content in ("BOARD", "DEBOARD"):
                            cues.update({pid: info.content for pid in info.payload})
                    if _directive_key(out.directive) != _directive_key(directive) or plan_changed:
                        payload = _json(out.directive)
                        emit("tactical", "directive", payload, ("command", "operational"))
                        if out.directive.maneuver.value == "PULL_OVER" and _directive_key(directive)[0].value != "PULL_OVER":
                            emit("tactical", "info", InfoOutput(tick, "TACTICAL", "OTHER_ROAD_USERS", "HAZARD_LIGHTS"))
                        if out.directive.door_schedule is not None and directive.door_schedule != out.directive.door_schedule:
                            emit("tactical", "info", InfoOutput(tick, "TACTICAL", "OTHER_ROAD_USERS", "DOOR_OPENING",
                                                                (str(out.directive.door_schedule.open_at),)))
                    directive = out.directive
                    if out.report != tac_report:
                        emit("tactical", "report", out.report, ("report", "strategic"))
                        if out.report.status != ReportStatus.NOMINAL or tac_report.status != ReportStatus.NOMINAL:
                            pending.append("PERFORMANCE")
                        tac_report = out.report
                stop_requested = False if plan.override else stop_requested

            # operational
            proposed = execute(directive, fs, tick)
            final = reflex_check(proposed, fs)
            if final != proposed:
                emit("operational", "reflex", {"proposed": [c for c in proposed if c not in final],
                                               "applied": [c for c in final if c not in proposed]})
            if seen.changed("commands", _command_key(final)):
                emit("operational", "command", {"commands": final}, ("command", "plant"))
            commands = final

            # terminal state
            if outcome is None and plan is not None:
                outcome = self._terminal(plan, tac, sit)
            log.records.extend(buf.flush())
            if outcome is not None:
                break
        if outcome is None:
            outcome = ("STOPPED", "HORIZON")
        return self._finish(log, tick, outcome, plan, sit, hazards_seen)

    # -- helpers -------------------------------------------------------------

    @staticmethod
    def _log_plant(emit, seen: _Changes, plant, reports, tick: int) -> None:
        v = plant.vehicle
        state = {
            "node": v.node,
            "edge": None if v.node is not None else [v.edge_from, v.edge_to],
            "slot": v.slot,
            "door": v.door,
            "lock": v.lock,
            "platform": v.platform,
            "obstructed": plant.obstructed,
            "moving": v.speed > 0.5,
            "stopped": v.speed == 0.0,
        }
        if seen.changed("vehicle", tuple(sorted((k, str(x)) for k, x in state.items()))):
            emit("plant", "vehicle", dict(state, speed=v.speed))
        for p in plant.passengers:
            if seen.changed(("zone", p.id), p.zone):
                emit("plant", "passenger", {"passenger": p.id, "zone": p.zone})
        if tick % TACTICAL_PERIOD_MS == 0:
            for p in plant.passengers:
                if p.zone != Zone.ABSENT and seen.changed(("hr", p.id), p.hr):
                    emit("plant", "physiology", {"passenger": p.id, "hr": p.hr})
        diverged = tuple((r.subsystem.value, str(r.commanded), str(r.achieved)) for r in reports if r.diverged)
        if seen.changed("diverged", diverged):
            emit("plant", "actuation", {"diverged": [list(d) for d in diverged]}, ("report", "operational"))

    @staticmethod
    def _terminal(plan: StrategyPlan, tac: TacticalController, sit) -> Optional[Tuple[str, str]]:
        if tac.phase == "DONE":
            return ("COMPLETED", "DEBOARDED")
        if tac.phase == "ARRIVED":
            return ("DIVERTED", "ARRIVED") if plan.action == Action.DIVERT else ("RETURNED", "ARRIVED")
        if plan.action == Action.STOP_IMMEDIATELY and sit.self_representation.pose.speed == 0.0:
            return ("STOPPED", "PERSON_REQUEST" if plan.override else "HARM_MINIMISING")
        return None

    def _finish(self, log: EventLog, tick: int, outcome, plan, sit, hazards_seen) -> EventLog:
        pose = sit.self_representation.pose
        verdict = {
            "outcome": outcome[0],
            "reason": outcome[1],
            "goal": None if plan is None else plan.goal_node,
            "node": pose.node,
            "hazards": sorted(list(h) for h in hazards_seen),
            "alerts": list(log.alerts),
        }
        log.verdict = verdict
        log.records.append(Record(tick, "harness", "verdict", verdict))
        return log


def _json(payload):
    """Round-trip through the serializer so in-memory records equal parsed ones."""
    return json.loads(dumps(payload))


def run(spec: ScenarioSpec, seed: Optional[int] = None, until: Optional[float] = None) -> EventLog:
    return Simulation(spec, seed, until).run()


def exit_code(log: EventLog) -> int:
    return EXIT_CODES[log.outcome]


# ---------------------------------------------------------------------------
# Replay


@dataclass(frozen=True)
class ReplayReport:
    identical: bool
    records: int
    line: Optional[int] = None
    tick: Optional[int] = None
    module: Optional[str] = None
    expected: Optional[str] = None
    actual: Optional[str] = None

    def describe(self) -> str:
        if self.identical:
            return f"identical ({self.records} records)"
        return f"divergence at line {self.line} (tick {self.tick}, module {self.module})"


def replay(path, scenario_path: Optional[str] = None) -> ReplayReport:
    """Re-run the scenario named in a log header and report the first differing record."""
    header, records, lines = read_log(path)
    ref = scenario_path or header["scenario"]
    if scenario_path is None and not str(ref).startswith("builtin:") and not Path(ref).is_absolute():
        candidate = Path(path).parent / ref
        ref = str(candidate) if candidate.exists() else ref
    try:
        spec = load_scenario(ref)
    except FileNotFoundError as exc:
        raise LogFormatError(f"scenario {ref!r} referenced by the log is missing") from exc
    spec = _with_source(spec, header["scenario"])
    fresh = Simulation(spec, header["seed"], header.get("until")).run().lines()
    for i, (old, new) in enumerate(zip(lines, fresh)):
        if old != new:
            rec = records[i - 1] if i > 0 else {}
            return ReplayReport(False, len(records), i + 1, rec.get("tick"), rec.get("module"), old, new)
    if len(lines) != len(fresh):
        i = min(len(lines), len(fresh))
        src = records if len(lines) > len(fresh) else None
        rec = src[i - 1] if src and i > 0 else {}
        return ReplayReport(False, len(records), i + 1, rec.get("tick"), rec.get("module"),
                            lines[i] if i < len(lines) else None, fresh[i] if i < len(fresh) else None)
    return ReplayReport(True, len(records))


def _with_source(spec: ScenarioSpec, source: str) -> ScenarioSpec:
    return replace(spec, source=source)
