"""Operational design domain: passenger profiles, the domain spec, and the
mission-time and runtime checks against it."""

from __future__ import annotations

import math
from dataclasses import dataclass, fields
from enum import Enum
from typing import TYPE_CHECKING, Collection, FrozenSet, Iterable, List, Optional, Sequence, Tuple

from .common import ADULT_AGE, NOMINAL_SPEED_MPS, Capability, Origin
from .roadmap import RoadGraph

if TYPE_CHECKING:
    from .representation import WorldModel
    from .strategic import MissionObjective, Route


class AreaMode(str, Enum):
    ALL = "ALL"
    KNOWN_TO_ALL_PASSENGERS = "KNOWN_TO_ALL_PASSENGERS"
    EXPLICIT_LIST = "EXPLICIT_LIST"


class Dimension(str, Enum):
    MIN_AGE = "MIN_AGE"
    CAPABILITY = "CAPABILITY"
    UNKNOWN_AREA = "UNKNOWN_AREA"
    EXCLUDED_AREA = "EXCLUDED_AREA"
    DURATION = "DURATION"
    DISTANCE = "DISTANCE"
    ENV = "ENV"
    ASSISTANT = "ASSISTANT"


@dataclass(frozen=True)
class PassengerProfile:
    id: str
    age: int
    capabilities: FrozenSet[Capability] = frozenset()
    needs_platform: bool = False
    known_nodes: FrozenSet[str] = frozenset()
    max_ride_duration: float = 7200.0
    guardian: Optional[Origin] = None

    def __post_init__(self):
        if self.needs_platform and Capability.CAN_CLIMB_STEP in self.capabilities:
            raise ValueError(f"{self.id}: needs_platform excludes CAN_CLIMB_STEP")


@dataclass(frozen=True)
class Assistant:
    id: str
    x: float
    y: float


@dataclass(frozen=True)
class OddSpec:
    min_solo_age: int = 12
    required_capabilities_solo: FrozenSet[Capability] = frozenset()
    allowed_nodes_mode: AreaMode = AreaMode.ALL
    allowed_nodes: FrozenSet[str] = frozenset()
    excluded_nodes: FrozenSet[str] = frozenset()
    max_trip_duration: float = 3600.0
    max_trip_distance: float = 50_000.0
    env_conditions: FrozenSet[str] = frozenset({"CLEAR", "RAIN"})
    assistant_radius: Optional[float] = None

    def __post_init__(self):
        for name in ("min_solo_age", "max_trip_duration", "max_trip_distance"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.assistant_radius is not None and self.assistant_radius <= 0:
            raise ValueError("assistant_radius must be positive")
        if self.allowed_nodes_mode == AreaMode.EXPLICIT_LIST and not self.allowed_nodes:
            raise ValueError("EXPLICIT_LIST mode needs allowed_nodes")


# Each spec field is consulted by exactly one dimension.
DIMENSION_FIELDS = {
    Dimension.MIN_AGE: ("min_solo_age",),
    Dimension.CAPABILITY: ("required_capabilities_solo",),
    Dimension.UNKNOWN_AREA: ("allowed_nodes_mode", "allowed_nodes"),
    Dimension.EXCLUDED_AREA: ("excluded_nodes",),
    Dimension.DURATION: ("max_trip_duration",),
    Dimension.DISTANCE: ("max_trip_distance",),
    Dimension.ENV: ("env_conditions",),
    Dimension.ASSISTANT: ("assistant_radius",),
}


@dataclass(frozen=True)
class Violation:
    dimension: Dimension
    subject: str
    detail: str = ""


@dataclass(frozen=True)
class Verdict:
    violations: Tuple[Violation, ...] = ()

    @property
    def ok(self) -> bool:
        return not self.violations

    def dimensions(self) -> List[Dimension]:
        return sorted({v.dimension for v in self.violations}, key=lambda d: d.value)


def area_exclusions(spec: OddSpec, profiles: Sequence[PassengerProfile], graph: RoadGraph) -> FrozenSet[str]:
    """Nodes a route must avoid for this manifest."""
    banned = set(spec.excluded_nodes)
    if spec.allowed_nodes_mode == AreaMode.KNOWN_TO_ALL_PASSENGERS:
        for n in graph.nodes:
            if not all(n in p.known_nodes for p in profiles):
                banned.add(n)
    elif spec.allowed_nodes_mode == AreaMode.EXPLICIT_LIST:
        banned.update(n for n in graph.nodes if n not in spec.allowed_nodes)
    return frozenset(banned)


def _check_people(spec: OddSpec, profiles: Sequence[PassengerProfile]) -> List[Violation]:
    out = []
    has_adult = any(p.age >= ADULT_AGE for p in profiles)
    for p in sorted(profiles, key=lambda p: p.id):
        if p.age < spec.min_solo_age and not has_adult:
            out.append(Violation(Dimension.MIN_AGE, p.id, f"age {p.age} < {spec.min_solo_age}"))
    pooled = set()
    for p in profiles:
        pooled |= p.capabilities
    for cap in sorted(spec.required_capabilities_solo - pooled, key=lambda c: c.value):
        out.append(Violation(Dimension.CAPABILITY, cap.value, "no passenger provides it"))
    return out


def _check_env(spec: OddSpec, env_flags: Iterable[str]) -> List[Violation]:
    return [Violation(Dimension.ENV, f, "outside allowed conditions") for f in sorted(set(env_flags) - spec.env_conditions)]


def _nearest_assistant(x: float, y: float, assistants: Sequence[Assistant]) -> float:
    return min((math.hypot(a.x - x, a.y - y) for a in assistants), default=math.inf)


def check_mission(
    spec: OddSpec,
    obj: "MissionObjective",
    profiles: Sequence[PassengerProfile],
    route: "Route",
    graph: Optional[RoadGraph] = None,
    env_flags: Collection[str] = (),
    assistants: Sequence[Assistant] = (),
) -> Verdict:
    manifest = [p for p in profiles if p.id in set(obj.manifest)]
    out = _check_people(spec, manifest)

    seen = []
    for n in route.nodes:
        if n not in seen:
            seen.append(n)
    if spec.allowed_nodes_mode == AreaMode.KNOWN_TO_ALL_PASSENGERS:
        for n in seen:
            strangers = [p.id for p in manifest if n not in p.known_nodes]
            if strangers:
                out.append(Violation(Dimension.UNKNOWN_AREA, n, "unknown to " + ",".join(strangers)))
    elif spec.allowed_nodes_mode == AreaMode.EXPLICIT_LIST:
        out.extend(Violation(Dimension.UNKNOWN_AREA, n, "not in allowed list") for n in seen if n not in spec.allowed_nodes)
    out.extend(Violation(Dimension.EXCLUDED_AREA, n, "excluded area") for n in seen if n in spec.excluded_nodes)

    if route.cost_s > spec.max_trip_duration:
        out.append(Violation(Dimension.DURATION, "route", f"{route.cost_s:g} s > {spec.max_trip_duration:g} s"))
    distance = route.cost_s * NOMINAL_SPEED_MPS
    if distance > spec.max_trip_distance:
        out.append(Violation(Dimension.DISTANCE, "route", f"{distance:g} m > {spec.max_trip_distance:g} m"))
    out.extend(_check_env(spec, env_flags))

    if spec.assistant_radius is not None:
        if graph is None:
            raise ValueError("assistant_radius check needs the road graph")
        for n in seen:
            info = graph.nodes[n]
            d = _nearest_assistant(info.x, info.y, assistants)
            if d > spec.assistant_radius:
                out.append(Violation(Dimension.ASSISTANT, n, f"nearest assistant {d:g} m"))
    return Verdict(tuple(out))


def check_runtime(
    spec: OddSpec,
    w: "WorldModel",
    elapsed: float,
    env_flags: Collection[str] = (),
    assistants: Sequence[Assistant] = (),
) -> Verdict:
    out = []
    if elapsed > spec.max_trip_duration:
        out.append(Violation(Dimension.DURATION, "trip", f"{elapsed:g} s elapsed"))
    if w.odometer_m > spec.max_trip_distance:
        out.append(Violation(Dimension.DISTANCE, "trip", f"{w.odometer_m:g} m driven"))
    out.extend(_check_env(spec, env_flags))
    if spec.assistant_radius is not None:
        x, y = w.position_xy()
        d = _nearest_assistant(x, y, assistants)
        if d > spec.assistant_radius:
            out.append(Violation(Dimension.ASSISTANT, "vehicle", f"nearest assistant {d:g} m"))
    return Verdict(tuple(out))


def spec_field_names() -> List[str]:
    return [f.name for f in fields(OddSpec)]
