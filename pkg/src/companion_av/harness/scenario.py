"""Scenario files: YAML documents describing map, people, mission, disturbances
and scripted interaction. Times named ``tick``, ``onset`` and ``expiry`` are
milliseconds; ``horizon`` and ``at_s``-style fields are seconds.

Omitted optional sections get these defaults: ``seed`` 0, ``horizon`` 3600,
``odd`` as :class:`OddSpec` defaults, no disturbances, events or external
messages, the default permission matrix, every origin authorized, cabin 21 °C
and ambient 15 °C, range 100 km, doors unlocking as they open.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from enum import Enum
from importlib import resources
from pathlib import Path
from typing import Any, Dict, FrozenSet, List, Mapping, Optional, Tuple

import yaml

from ..common import Capability, Level, Origin, Zone, ms
from ..errors import ScenarioParseError, ScenarioValidationError
from ..odd import AreaMode, Assistant, OddSpec, PassengerProfile
from ..plant import Disturbance, make_disturbance
from ..roadmap import NodeInfo, RoadGraph, StopPoint
from ..strategic import MissionObjective, Urgency

BUILTIN_PREFIX = "builtin:"


class EventKind(str, Enum):
    SET_MISSION = "SET_MISSION"
    CHANGE_DESTINATION = "CHANGE_DESTINATION"
    REQUEST_STOP = "REQUEST_STOP"
    EMERGENCY_STOP = "EMERGENCY_STOP"
    EXTERNAL_MESSAGE = "EXTERNAL_MESSAGE"


@dataclass(frozen=True)
class UserEvent:
    tick: int
    actor: str
    level: Level
    kind: EventKind
    payload: Tuple[Tuple[str, Any], ...] = ()

    def get(self, key: str, default=None):
        return dict(self.payload).get(key, default)


@dataclass(frozen=True)
class PermissionRule:
    role: str
    level: Level
    kind: EventKind
    allow: bool


def _rules(rows) -> Tuple[PermissionRule, ...]:
    return tuple(PermissionRule(r, Level(l), EventKind(k), a) for r, l, k, a in rows)


# Children may stop the vehicle but not redirect it; a remote guardian holds mission authority.
DEFAULT_PERMISSIONS = _rules(
    [
        ("ADULT", "STRATEGIC", "SET_MISSION", True),
        ("ADULT", "STRATEGIC", "CHANGE_DESTINATION", True),
        ("ADULT", "TACTICAL", "REQUEST_STOP", True),
        ("ADULT", "TACTICAL", "EMERGENCY_STOP", True),
        ("ADULT", "OPERATIONAL", "EMERGENCY_STOP", True),
        ("CHILD", "STRATEGIC", "SET_MISSION", False),
        ("CHILD", "STRATEGIC", "CHANGE_DESTINATION", False),
        ("CHILD", "TACTICAL", "REQUEST_STOP", True),
        ("CHILD", "TACTICAL", "EMERGENCY_STOP", True),
        ("CHILD", "OPERATIONAL", "EMERGENCY_STOP", True),
        ("GUARDIAN_REMOTE", "STRATEGIC", "SET_MISSION", True),
        ("GUARDIAN_REMOTE", "STRATEGIC", "CHANGE_DESTINATION", True),
        ("GUARDIAN_REMOTE", "STRATEGIC", "EXTERNAL_MESSAGE", True),
        ("CONTROL_ROOM", "STRATEGIC", "SET_MISSION", True),
        ("CONTROL_ROOM", "STRATEGIC", "CHANGE_DESTINATION", True),
        ("CONTROL_ROOM", "TACTICAL", "EMERGENCY_STOP", True),
        ("CONTROL_ROOM", "STRATEGIC", "EXTERNAL_MESSAGE", True),
    ]
)


@dataclass(frozen=True)
class ExternalScript:
    tick: int
    origin: Origin
    kind: str
    subject: str
    value: Any


@dataclass(frozen=True)
class InitialState:
    node: str
    slot: Optional[str] = None
    zones: Tuple[Tuple[str, Zone], ...] = ()
    range_m: float = 100_000.0
    cabin_temp: float = 21.0
    ambient_temp: float = 15.0
    heart_rate: Tuple[Tuple[str, float], ...] = ()


@dataclass(frozen=True)
class ScenarioSpec:
    name: str
    seed: int
    horizon: float
    map: RoadGraph
    profiles: Tuple[PassengerProfile, ...]
    odd: OddSpec
    mission: MissionObjective
    initial: InitialState
    disturbances: Tuple[Disturbance, ...] = ()
    events: Tuple[UserEvent, ...] = ()
    permissions: Tuple[PermissionRule, ...] = DEFAULT_PERMISSIONS
    actors: Tuple[Tuple[str, str], ...] = ()
    external: Tuple[ExternalScript, ...] = ()
    authorized_origins: FrozenSet[Origin] = frozenset(Origin)
    assistants: Tuple[Assistant, ...] = ()
    externals: Tuple[str, ...] = ()
    helpers: FrozenSet[str] = frozenset()
    door_unlock_lead: int = 0
    source: str = ""
    digest: str = ""

    @property
    def stops(self) -> Tuple[StopPoint, ...]:
        return tuple(s for group in self.map.stops.values() for s in group)

    def role_of(self, actor: str) -> Optional[str]:
        return dict(self.actors).get(actor)


# ---------------------------------------------------------------------------
# Line tracking


def _line_index(node, path=(), out=None) -> Dict[Tuple, int]:
    out = {} if out is None else out
    out[path] = node.start_mark.line + 1
    if isinstance(node, yaml.MappingNode):
        for k, v in node.value:
            key = k.value
            out[path + (key,)] = k.start_mark.line + 1
            _line_index(v, path + (key,), out)
    elif isinstance(node, yaml.SequenceNode):
        for i, v in enumerate(node.value):
            _line_index(v, path + (i,), out)
    return out


class _Reader:
    """Typed access to the parsed document that reports the offending line and field."""

    def __init__(self, lines: Dict[Tuple, int]):
        self.lines = lines

    def fail(self, path: Tuple, message: str):
        line = None
        for k in range(len(path), -1, -1):
            if path[:k] in self.lines:
                line = self.lines[path[:k]]
                break
        raise ScenarioParseError(message, line, ".".join(str(p) for p in path) or None)

    def get(self, doc: Mapping, path: Tuple, key: str, kind=None, default=..., choices=None):
        if not isinstance(doc, Mapping):
            self.fail(path, "expected a mapping")
        if key not in doc or doc[key] is None:
            if default is ...:
                self.fail(path + (key,), "missing required field")
            return default
        value = doc[key]
        where = path + (key,)
        if kind is not None:
            ok = isinstance(value, kind) and not (kind in (int, float, (int, float)) and isinstance(value, bool))
            if not ok:
                names = kind.__name__ if isinstance(kind, type) else "/".join(k.__name__ for k in kind)
                self.fail(where, f"expected {names}, got {type(value).__name__}")
        if choices is not None:
            try:
                return choices(value)
            except (ValueError, KeyError):
                self.fail(where, f"invalid value {value!r}")
        return value


NUM = (int, float)


@dataclass
class _BuildResult:
    nodes: list
    edges: list
    stops: list
    unreachable_ok: bool


def _parse_map(r: _Reader, doc) -> _BuildResult:
    m = r.get(doc, (), "map", dict)
    nodes_doc = r.get(m, ("map",), "nodes", dict)
    nodes = []
    for nid, attrs in nodes_doc.items():
        p = ("map", "nodes", nid)
        attrs = attrs or {}
        nodes.append(
            NodeInfo(
                id=str(nid),
                x=float(r.get(attrs, p, "x", NUM, 0.0)),
                y=float(r.get(attrs, p, "y", NUM, 0.0)),
                care_facility=bool(r.get(attrs, p, "care_facility", bool, False)),
                goal_candidate=r.get(attrs, p, "goal_candidate", bool, None),
            )
        )
    edges = []
    for i, e in enumerate(r.get(m, ("map",), "edges", list)):
        p = ("map", "edges", i)
        if isinstance(e, list) and len(e) == 3:
            a, b, t = e
        elif isinstance(e, dict):
            a, b, t = r.get(e, p, "a", str), r.get(e, p, "b", str), r.get(e, p, "travel_s", NUM)
        else:
            r.fail(p, "edge must be [a, b, travel_s] or {a, b, travel_s}")
        if not isinstance(t, NUM) or isinstance(t, bool):
            r.fail(p, "travel_s must be a number")
        edges.append((str(a), str(b), float(t)))
    stops = []
    for i, s in enumerate(r.get(doc, (), "stops", list, [])):
        p = ("stops", i)
        stops.append(
            StopPoint(
                node=str(r.get(s, p, "node", str)),
                lateral_slot=str(r.get(s, p, "lateral_slot", str)),
                slope_deg=float(r.get(s, p, "slope_deg", NUM, 0.0)),
                curb_height_cm=float(r.get(s, p, "curb_height_cm", NUM, 0.0)),
            )
        )
    return _BuildResult(nodes, edges, stops, bool(r.get(m, ("map",), "intended_unreachable", bool, False)))


def _parse_profiles(r: _Reader, doc) -> List[PassengerProfile]:
    out = []
    for i, p in enumerate(r.get(doc, (), "profiles", list)):
        path = ("profiles", i)
        caps = r.get(p, path, "capabilities", list, [])
        try:
            capset = frozenset(Capability(c) for c in caps)
        except ValueError:
            r.fail(path + ("capabilities",), f"unknown capability in {caps}")
        guardian = r.get(p, path, "guardian", str, None)
        try:
            out.append(
                PassengerProfile(
                    id=str(r.get(p, path, "id", str)),
                    age=int(r.get(p, path, "age", int)),
                    capabilities=capset,
                    needs_platform=bool(r.get(p, path, "needs_platform", bool, False)),
                    known_nodes=frozenset(str(n) for n in r.get(p, path, "known_nodes", list, [])),
                    max_ride_duration=float(r.get(p, path, "max_ride_duration", NUM, 7200.0)),
                    guardian=Origin(guardian) if guardian else None,
                )
            )
        except ValueError as exc:
            r.fail(path, str(exc))
    return out


def _parse_odd(r: _Reader, doc) -> OddSpec:
    o = r.get(doc, (), "odd", dict, {})
    p = ("odd",)
    caps = r.get(o, p, "required_capabilities_solo", list, [])
    try:
        return OddSpec(
            min_solo_age=int(r.get(o, p, "min_solo_age", int, 12)),
            required_capabilities_solo=frozenset(Capability(c) for c in caps),
            allowed_nodes_mode=r.get(o, p, "allowed_nodes_mode", str, AreaMode.ALL, choices=AreaMode),
            allowed_nodes=frozenset(r.get(o, p, "allowed_nodes", list, [])),
            excluded_nodes=frozenset(r.get(o, p, "excluded_nodes", list, [])),
            max_trip_duration=float(r.get(o, p, "max_trip_duration", NUM, 3600.0)),
            max_trip_distance=float(r.get(o, p, "max_trip_distance", NUM, 50_000.0)),
            env_conditions=frozenset(r.get(o, p, "env_conditions", list, ["CLEAR", "RAIN"])),
            assistant_radius=(lambda v: None if v is None else float(v))(r.get(o, p, "assistant_radius", NUM, None)),
        )
    except ValueError as exc:
        r.fail(p, str(exc))


def _parse_mission(r: _Reader, doc) -> MissionObjective:
    m = r.get(doc, (), "mission", dict)
    p = ("mission",)
    manifest = r.get(m, p, "manifest", list)
    if not manifest:
        r.fail(p + ("manifest",), "manifest must not be empty")
    deadline = r.get(m, p, "deadline", NUM, None)
    return MissionObjective(
        goal_node=str(r.get(m, p, "goal_node", str)),
        manifest=tuple(str(x) for x in manifest),
        urgency=r.get(m, p, "urgency", str, Urgency.NORMAL, choices=Urgency),
        requester=r.get(m, p, "requester", str, None),
        deadline=None if deadline is None else float(deadline),
    )


def _parse_initial(r: _Reader, doc) -> InitialState:
    i = r.get(doc, (), "initial", dict)
    p = ("initial",)
    zones = {}
    for pid, z in r.get(i, p, "zones", dict, {}).items():
        try:
            zones[str(pid)] = Zone(z)
        except ValueError:
            r.fail(p + ("zones", pid), f"unknown zone {z!r}")
    hr = {str(k): float(v) for k, v in r.get(i, p, "heart_rate", dict, {}).items()}
    return InitialState(
        node=str(r.get(i, p, "node", str)),
        slot=r.get(i, p, "slot", str, None),
        zones=tuple(sorted(zones.items())),
        range_m=float(r.get(i, p, "range_m", NUM, 100_000.0)),
        cabin_temp=float(r.get(i, p, "cabin_temp", NUM, 21.0)),
        ambient_temp=float(r.get(i, p, "ambient_temp", NUM, 15.0)),
        heart_rate=tuple(sorted(hr.items())),
    )


def _parse_disturbances(r: _Reader, doc) -> List[Disturbance]:
    out = []
    for i, d in enumerate(r.get(doc, (), "disturbances", list, [])):
        p = ("disturbances", i)
        subtype = r.get(d, p, "subtype", str)
        onset = r.get(d, p, "onset", int)
        expiry = r.get(d, p, "expiry", int, None)
        params = r.get(d, p, "params", dict, {})
        try:
            dist = make_disturbance(subtype, onset, params, expiry)
        except ValueError as exc:
            r.fail(p, str(exc))
        cat = r.get(d, p, "category", str, None)
        if cat is not None and cat != dist.category and _CATEGORY_NAMES.get(cat) != dist.category:
            r.fail(p + ("category",), f"category {cat} does not match subtype {subtype}")
        out.append(dist)
    return sorted(out, key=lambda d: (d.onset, d.subtype))


_CATEGORY_NAMES = {"ENVIRONMENT": "ENV", "VEHICLE": "VEH", "PASSENGER": "PAX"}


def _parse_events(r: _Reader, doc) -> List[UserEvent]:
    out = []
    for i, e in enumerate(r.get(doc, (), "events", list, [])):
        p = ("events", i)
        out.append(
            UserEvent(
                tick=int(r.get(e, p, "tick", int)),
                actor=str(r.get(e, p, "actor", str)),
                level=r.get(e, p, "level", str, choices=Level),
                kind=r.get(e, p, "kind", str, choices=EventKind),
                payload=tuple(sorted(r.get(e, p, "payload", dict, {}).items())),
            )
        )
    return sorted(out, key=lambda e: e.tick)


def _parse_permissions(r: _Reader, doc) -> Tuple[PermissionRule, ...]:
    rows = {(x.role, x.level, x.kind): x for x in DEFAULT_PERMISSIONS}
    for i, row in enumerate(r.get(doc, (), "permissions", list, [])):
        p = ("permissions", i)
        rule = PermissionRule(
            role=str(r.get(row, p, "role", str)),
            level=r.get(row, p, "level", str, choices=Level),
            kind=r.get(row, p, "kind", str, choices=EventKind),
            allow=bool(r.get(row, p, "allow", bool)),
        )
        rows[(rule.role, rule.level, rule.kind)] = rule
    return tuple(sorted(rows.values(), key=lambda x: (x.role, x.level.value, x.kind.value)))


def _parse_external(r: _Reader, doc) -> List[ExternalScript]:
    out = []
    for i, x in enumerate(r.get(doc, (), "external", list, [])):
        p = ("external", i)
        value = r.get(x, p, "value", None)
        out.append(
            ExternalScript(
                tick=int(r.get(x, p, "tick", int)),
                origin=r.get(x, p, "origin", str, choices=Origin),
                kind=str(r.get(x, p, "kind", str)),
                subject=str(r.get(x, p, "subject", str)),
                value=_tupled(value),
            )
        )
    return sorted(out, key=lambda x: x.tick)


def _tupled(v):
    if isinstance(v, list):
        return tuple(_tupled(x) for x in v)
    return v


def parse_scenario(text: str, source: str = "<string>") -> ScenarioSpec:
    """Parse and validate scenario text."""
    try:
        root = yaml.compose(text)
        doc = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        raise ScenarioParseError(f"malformed YAML: {getattr(exc, 'problem', exc)}", mark.line + 1 if mark else None)
    if not isinstance(doc, dict):
        raise ScenarioParseError("scenario must be a mapping", 1)
    r = _Reader(_line_index(root))

    built = _parse_map(r, doc)
    profiles = _parse_profiles(r, doc)
    odd = _parse_odd(r, doc)
    mission = _parse_mission(r, doc)
    initial = _parse_initial(r, doc)
    disturbances = _parse_disturbances(r, doc)
    events = _parse_events(r, doc)
    permissions = _parse_permissions(r, doc)
    external = _parse_external(r, doc)
    actors = {str(k): str(v) for k, v in r.get(doc, (), "actors", dict, {}).items()}
    origins = r.get(doc, (), "authorized_origins", list, None)
    assistants = [
        Assistant(str(r.get(a, ("assistants", i), "id", str)), float(r.get(a, ("assistants", i), "x", NUM)),
                  float(r.get(a, ("assistants", i), "y", NUM)))
        for i, a in enumerate(r.get(doc, (), "assistants", list, []))
    ]
    ext_people = r.get(doc, (), "externals", list, [])
    externals = tuple(sorted(str(r.get(e, ("externals", i), "id", str)) for i, e in enumerate(ext_people)))
    helpers = frozenset(
        str(e["id"]) for e in ext_people if isinstance(e, dict) and e.get("helper", False)
    )

    breaches = _validate(built, profiles, mission, initial, disturbances, events, permissions, actors, externals,
                         external, float(r.get(doc, (), "horizon", NUM, 3600.0)))
    if breaches:
        raise ScenarioValidationError(breaches)

    graph = RoadGraph.build(built.nodes, built.edges, built.stops).with_known_to(
        {p.id: p.known_nodes for p in profiles}
    )
    return ScenarioSpec(
        name=str(r.get(doc, (), "name", str, Path(source).stem)),
        seed=int(r.get(doc, (), "seed", int, 0)),
        horizon=float(r.get(doc, (), "horizon", NUM, 3600.0)),
        map=graph,
        profiles=tuple(sorted(profiles, key=lambda p: p.id)),
        odd=odd,
        mission=mission,
        initial=initial,
        disturbances=tuple(disturbances),
        events=tuple(events),
        permissions=permissions,
        actors=tuple(sorted(actors.items())),
        external=tuple(external),
        authorized_origins=frozenset(Origin) if origins is None else frozenset(Origin(o) for o in origins),
        assistants=tuple(assistants),
        externals=externals,
        helpers=helpers,
        door_unlock_lead=int(r.get(doc, (), "door_unlock_lead", int, 0)),
        source=source,
        digest=hashlib.sha256(text.encode()).hexdigest(),
    )


def _connected(nodes, edges) -> bool:
    ids = [n.id for n in nodes]
    if not ids:
        return True
    adj = {n: set() for n in ids}
    for a, b, _ in edges:
        adj[a].add(b)
        adj[b].add(a)
    seen, todo = {ids[0]}, [ids[0]]
    while todo:
        for m in adj[todo.pop()]:
            if m not in seen:
                seen.add(m)
                todo.append(m)
    return len(seen) == len(ids)


def _validate(built, profiles, mission, initial, disturbances, events, permissions, actors, externals,
              external, horizon) -> List[str]:
    out = []
    ids = {n.id for n in built.nodes}
    if horizon < 0:
        out.append("horizon must be non-negative")
    for a, b, t in built.edges:
        if a not in ids or b not in ids:
            out.append(f"edge {a}-{b} references an unknown node")
        if t <= 0:
            out.append(f"edge {a}-{b} has non-positive travel_s")
    if not out and not built.unreachable_ok and not _connected(built.nodes, built.edges):
        out.append("map is not connected and intended_unreachable is not set")
    slots = set()
    for s in built.stops:
        if s.node not in ids:
            out.append(f"stop {s.lateral_slot} at unknown node {s.node}")
        if s.lateral_slot in slots:
            out.append(f"duplicate stop slot {s.lateral_slot}")
        slots.add(s.lateral_slot)
    pids = [p.id for p in profiles]
    if len(set(pids)) != len(pids):
        out.append("duplicate passenger profile ids")
    for p in profiles:
        unknown = sorted(p.known_nodes - ids)
        if unknown:
            out.append(f"profile {p.id} knows unmapped nodes {unknown}")
    if mission.goal_node not in ids:
        out.append(f"mission goal {mission.goal_node} is not on the map")
    for m in mission.manifest:
        if m not in pids:
            out.append(f"manifest passenger {m} has no profile")
    if initial.node not in ids:
        out.append(f"initial node {initial.node} is not on the map")
    if initial.slot is not None and initial.slot not in {s.lateral_slot for s in built.stops if s.node == initial.node}:
        out.append(f"initial slot {initial.slot} is not a stop at {initial.node}")
    for pid, _ in initial.zones:
        if pid not in pids:
            out.append(f"initial zone for undeclared passenger {pid}")
    if set(pids) & set(externals):
        out.append("external person ids clash with passenger ids")
    horizon_ms = ms(horizon)
    for d in disturbances:
        if d.onset > horizon_ms:
            out.append(f"disturbance {d.subtype} onset {d.onset} beyond horizon")
        who = d.param("passenger")
        if d.category == "PAX" and who not in pids:
            out.append(f"disturbance {d.subtype} references undeclared passenger {who}")
    roles = {r.role for r in permissions}
    for e in events:
        if e.actor not in actors:
            out.append(f"event at {e.tick} references undeclared actor {e.actor}")
        elif actors[e.actor] not in roles:
            out.append(f"actor {e.actor} (role {actors[e.actor]}) has no permissions row")
        if e.tick > horizon_ms:
            out.append(f"event at {e.tick} beyond horizon")
    for x in external:
        if x.tick > horizon_ms:
            out.append(f"external message at {x.tick} beyond horizon")
    return out


def resolve_path(ref: str) -> Tuple[str, str]:
    """Scenario text and its canonical reference; ``builtin:NAME`` reads packaged scenarios."""
    if ref.startswith(BUILTIN_PREFIX):
        name = ref[len(BUILTIN_PREFIX):]
        res = resources.files("companion_av.scenarios").joinpath(f"{name}.yaml")
        if not res.is_file():
            raise FileNotFoundError(ref)
        return res.read_text(), ref
    return Path(ref).read_text(), ref


def load_scenario(path: str) -> ScenarioSpec:
    text, ref = resolve_path(str(path))
    return parse_scenario(text, ref)


def builtin_names() -> List[str]:
    return sorted(
        p.name[:-5] for p in resources.files("companion_av.scenarios").iterdir() if p.name.endswith(".yaml")
    )
