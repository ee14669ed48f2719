"""Situation model (current scene), world model (long horizon) and hazard assessment."""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Dict, FrozenSet, Iterable, List, Mapping, Optional, Sequence, Tuple

from .common import (
    CABIN_ZONES,
    NOMINAL_SPEED_MPS,
    OUTSIDE_NEAR_RADIUS_M,
    ActorRole,
    Capability,
    DoorState,
    FeatureKind,
    HazardKind,
    Health,
    HealthTrend,
    LockState,
    PlatformState,
    Subsystem,
    Zone,
)
from .errors import UnknownSubjectError
from .odd import PassengerProfile
from .roadmap import RoadGraph
from .signals import FeatureSet, SubsystemFault, VehiclePose

# Heart-rate bands (bpm) and how long a reading must stay outside them.
HR_NORMAL_BAND = (50.0, 120.0)
HR_EMERGENCY_BAND = (40.0, 150.0)
HR_SUSTAIN_MS = 10_000
FALL_SUSTAIN_MS = 5_000

# Ambient temperature around a passenger (deg C).
COMFORT_BAND = (10.0, 30.0)
SAFE_BAND = (0.0, 40.0)

ABSENT_DISTANCE_M = 100.0


@dataclass(frozen=True)
class ActorContext:
    id: str
    zone: Zone
    health: Health = Health.NORMAL
    distance_to_vehicle: float = 0.0
    role: ActorRole = ActorRole.PASSENGER
    heart_rate: Optional[float] = None
    fallen: bool = False
    ambient_temp: Optional[float] = None
    # Tick since which a reading has been outside a band (None while inside).
    hr_abnormal_since: Optional[int] = None
    hr_critical_since: Optional[int] = None
    fallen_since: Optional[int] = None
    health_evidence: Tuple[FeatureKind, ...] = ()


@dataclass(frozen=True)
class VehicleSnapshot:
    pose: VehiclePose
    door: DoorState = DoorState.CLOSED
    lock: LockState = LockState.LOCKED
    platform: PlatformState = PlatformState.STOWED
    platform_obstructed: bool = False
    subsystem_health: Tuple[Tuple[str, str], ...] = ()

    @property
    def speed(self) -> float:
        return self.pose.speed


@dataclass(frozen=True)
class Conditions:
    cabin_temp: Optional[float] = None
    ambient_temp: Optional[float] = None
    weather: FrozenSet[str] = frozenset()
    blocked_edges: FrozenSet[Tuple[str, str]] = frozenset()
    info: Tuple[Tuple[str, object], ...] = ()


@dataclass(frozen=True)
class SituationModel:
    tick: int
    self_representation: VehicleSnapshot
    actors: Tuple[ActorContext, ...]
    scenery: Tuple[str, ...] = ()
    dynamic_elements: Tuple[Tuple[str, float], ...] = ()
    conditions: Conditions = Conditions()
    traffic: Tuple[Tuple[str, Tuple[Tuple[int, int], ...]], ...] = ()
    passengers: Tuple[str, ...] = ()
    entities: FrozenSet[str] = frozenset()
    helpers: FrozenSet[str] = frozenset()
    # Latest posture of every external person, in range or not.
    externals: Tuple[Tuple[str, str, float], ...] = ()

    def actor(self, pid: str) -> ActorContext:
        for a in self.actors:
            if a.id == pid:
                return a
        raise KeyError(pid)

    def occupancy(self, slot: str) -> Tuple[Tuple[int, int], ...]:
        return dict(self.traffic).get(slot, ())

    def onboard(self) -> List[str]:
        return [a.id for a in self.actors if a.role == ActorRole.PASSENGER and a.zone in CABIN_ZONES]


def initial_situation(
    pose: VehiclePose,
    zones: Mapping[str, Zone],
    entities: Iterable[str],
    helpers: Iterable[str] = (),
    tick: int = 0,
    door: DoorState = DoorState.CLOSED,
    lock: LockState = LockState.LOCKED,
) -> SituationModel:
    actors = tuple(
        ActorContext(pid, z, distance_to_vehicle=_distance_for(z, None)) for pid, z in sorted(zones.items())
    )
    return SituationModel(
        tick=tick,
        self_representation=VehicleSnapshot(pose, door, lock),
        actors=actors,
        passengers=tuple(sorted(zones)),
        entities=frozenset(entities),
        helpers=frozenset(helpers),
    )


def _distance_for(zone: Zone, given: Optional[float]) -> float:
    if zone in CABIN_ZONES:
        return 0.0
    if zone in (Zone.DOORWAY, Zone.ON_PLATFORM):
        return 0.5
    if zone == Zone.OUTSIDE_NEAR:
        return min(given if given is not None else 2.0, OUTSIDE_NEAR_RADIUS_M)
    return max(given if given is not None else ABSENT_DISTANCE_M, OUTSIDE_NEAR_RADIUS_M)


def _outside(value: float, band: Tuple[float, float]) -> bool:
    return value < band[0] or value > band[1]


def _since(flag: bool, prev: Optional[int], tick: int) -> Optional[int]:
    if not flag:
        return None
    return tick if prev is None else prev


def _classify(a: ActorContext, tick: int) -> ActorContext:
    evidence = []
    emergency = False
    if a.hr_critical_since is not None and tick - a.hr_critical_since >= HR_SUSTAIN_MS:
        emergency = True
        evidence.append(FeatureKind.HEART_RATE)
    if a.fallen_since is not None and tick - a.fallen_since >= FALL_SUSTAIN_MS:
        emergency = True
        evidence.append(FeatureKind.FALLEN)
    if emergency:
        health = Health.EMERGENCY
    elif a.hr_abnormal_since is not None and tick - a.hr_abnormal_since >= HR_SUSTAIN_MS:
        health = Health.ELEVATED
        evidence.append(FeatureKind.HEART_RATE)
    else:
        health = Health.NORMAL
    return replace(a, health=health, health_evidence=tuple(evidence))


def _posture(value) -> Tuple[Zone, Optional[float]]:
    if isinstance(value, (tuple, list)):
        return Zone(value[0]), (float(value[1]) if len(value) > 1 and value[1] is not None else None)
    return Zone(value), None


def update_situation_model(
    prev: SituationModel, fs: FeatureSet, profiles: Sequence[PassengerProfile] = ()
) -> SituationModel:
    """Fold a feature set into the scene; fields without new evidence carry forward."""
    if fs.tick < prev.tick:
        raise ValueError(f"feature set tick {fs.tick} precedes model tick {prev.tick}")
    if not fs.features:
        return replace(prev, tick=fs.tick)

    passengers = set(prev.passengers)
    actors: Dict[str, ActorContext] = {a.id: a for a in prev.actors if a.id in passengers}
    externals = {eid: (zone, dist) for eid, zone, dist in prev.externals}
    snap = prev.self_representation
    cond = prev.conditions
    traffic = dict(prev.traffic)
    info = dict(cond.info)
    weather = set(cond.weather)
    blocked = set(cond.blocked_edges)
    health_dirty = set()
    falls = []

    for f in fs.features:
        if f.subject not in prev.entities:
            raise UnknownSubjectError(f"feature {f.kind.value} references undeclared {f.subject!r}")
        if f.tick > fs.tick:
            raise ValueError(f"feature tick {f.tick} is ahead of {fs.tick}")
        k = f.kind
        if k == FeatureKind.POSTURE:
            zone, dist = _posture(f.value)
            if f.subject in passengers:
                a = actors[f.subject]
                actors[f.subject] = replace(a, zone=zone, distance_to_vehicle=_distance_for(zone, dist))
            else:
                externals[f.subject] = (zone.value, _distance_for(zone, dist))
        elif k == FeatureKind.FALLEN and f.subject in passengers:
            falls.append(f)
        elif k == FeatureKind.HEART_RATE and f.subject in passengers:
            hr = float(f.value)
            a = actors[f.subject]
            actors[f.subject] = replace(
                a,
                heart_rate=hr,
                hr_abnormal_since=_since(_outside(hr, HR_NORMAL_BAND), a.hr_abnormal_since, f.tick),
                hr_critical_since=_since(_outside(hr, HR_EMERGENCY_BAND), a.hr_critical_since, f.tick),
            )
            health_dirty.add(f.subject)
        elif k == FeatureKind.BODY_TEMP and f.derived and f.subject in passengers:
            actors[f.subject] = replace(actors[f.subject], ambient_temp=float(f.value))
        elif k == FeatureKind.CABIN_TEMP:
            cond = replace(cond, cabin_temp=float(f.value))
        elif k == FeatureKind.AMBIENT_TEMP:
            cond = replace(cond, ambient_temp=float(f.value))
        elif k == FeatureKind.VEHICLE_POSE:
            snap = replace(snap, pose=f.value)
        elif k == FeatureKind.DOOR_POSITION:
            snap = replace(snap, door=DoorState(f.value[0] if isinstance(f.value, tuple) else f.value))
        elif k == FeatureKind.LOCK_STATE:
            snap = replace(snap, lock=LockState(f.value))
        elif k == FeatureKind.PLATFORM_POSITION:
            state, obstructed = f.value if isinstance(f.value, tuple) else (f.value, False)
            snap = replace(snap, platform=PlatformState(state), platform_obstructed=bool(obstructed))
        elif k == FeatureKind.SUBSYSTEM_HEALTH:
            health = dict(snap.subsystem_health)
            health[f.subject] = str(f.value)
            snap = replace(snap, subsystem_health=tuple(sorted(health.items())))
        elif k == FeatureKind.TRAFFIC_OCCUPANCY:
            traffic[f.subject] = tuple((int(a), int(b)) for a, b in f.value)
        elif k == FeatureKind.EXTERNAL_INFO:
            tag = f.value[0] if isinstance(f.value, tuple) and f.value else None
            if tag == "WEATHER":
                weather = set(f.value[1])
            elif tag == "BLOCKED_EDGE":
                a, b, active = f.value[1], f.value[2], f.value[3]
                key = (a, b) if a <= b else (b, a)
                (blocked.add if active else blocked.discard)(key)
            else:
                info[f.subject] = f.value
        # SPEECH, IDENTITY, GESTURE and BREATH_RATE are carried but not interpreted.

    for f in falls:
        a = actors[f.subject]
        fallen = bool(f.value)
        zone = Zone.CABIN_UNSECURED if fallen and a.zone in CABIN_ZONES else a.zone
        actors[f.subject] = replace(
            a, fallen=fallen, zone=zone, fallen_since=_since(fallen, a.fallen_since, f.tick)
        )
        health_dirty.add(f.subject)
    for pid in health_dirty:
        actors[pid] = _classify(actors[pid], fs.tick)

    in_range = []
    for eid in sorted(externals):
        zone, dist = externals[eid]
        if dist <= OUTSIDE_NEAR_RADIUS_M:
            role = ActorRole.EXTERNAL_HELPER if eid in prev.helpers else ActorRole.EXTERNAL_OTHER
            in_range.append(ActorContext(eid, Zone(zone), distance_to_vehicle=dist, role=role))
    all_actors = tuple(sorted(list(actors.values()) + in_range, key=lambda a: a.id))

    return replace(
        prev,
        tick=fs.tick,
        self_representation=snap,
        actors=all_actors,
        scenery=(snap.pose.heading_node,) if snap.pose.heading_node else prev.scenery,
        dynamic_elements=tuple((eid, externals[eid][1]) for eid in sorted(externals)),
        conditions=replace(
            cond, weather=frozenset(weather), blocked_edges=frozenset(blocked), info=tuple(sorted(info.items()))
        ),
        traffic=tuple(sorted(traffic.items())),
        externals=tuple((eid, z, d) for eid, (z, d) in sorted(externals.items())),
    )


# ---------------------------------------------------------------------------
# World model


@dataclass(frozen=True)
class PassengerProjection:
    health_trend: HealthTrend
    onboard_since: int
    max_ride_duration: float
    needs_platform: bool = False


@dataclass(frozen=True)
class WorldModel:
    tick: int
    map: RoadGraph
    position: VehiclePose
    range_remaining: float
    profiles: Tuple[PassengerProfile, ...] = ()
    passenger_projection: Tuple[Tuple[str, PassengerProjection], ...] = ()
    active_route: Optional[Tuple[str, ...]] = None
    eta_current_goal: Optional[float] = None
    odometer_m: float = 0.0
    blocked_edges: FrozenSet[Tuple[str, str]] = frozenset()

    def projection(self, pid: str) -> PassengerProjection:
        return dict(self.passenger_projection)[pid]

    def max_remaining_onboard_time(self, pid: str) -> float:
        p = self.projection(pid)
        if p.health_trend == HealthTrend.CRITICAL:
            return 0.0
        return max(0.0, p.max_ride_duration - (self.tick - p.onboard_since) / 1000.0)

    def position_xy(self) -> Tuple[float, float]:
        return pose_xy(self.map, self.position)

    def with_route(self, route: Optional[Sequence[str]]) -> "WorldModel":
        route = tuple(route) if route else None
        return replace(self, active_route=route, eta_current_goal=_eta(self.map, self.position, route))


def pose_xy(graph: RoadGraph, pose: VehiclePose) -> Tuple[float, float]:
    if pose.node is not None:
        n = graph.nodes[pose.node]
        return n.x, n.y
    a, b = graph.nodes[pose.edge_from], graph.nodes[pose.edge_to]
    frac = pose.offset_m / pose.edge_len_m if pose.edge_len_m else 0.0
    return a.x + (b.x - a.x) * frac, a.y + (b.y - a.y) * frac


@dataclass(frozen=True)
class RouteProgress:
    ahead: Tuple[str, ...]
    remaining_m: float
    uturn: bool = False

    @property
    def remaining_s(self) -> float:
        return self.remaining_m / NOMINAL_SPEED_MPS


def route_progress(graph: RoadGraph, pose: VehiclePose, route: Sequence[str]) -> Optional[RouteProgress]:
    """Nodes still ahead on ``route`` and the distance to its end, or None if off-route."""
    route = tuple(route)
    if not route:
        return None
    extra = 0.0
    uturn = False
    if pose.node is not None:
        if pose.node not in route:
            return None
        i = route.index(pose.node)
    else:
        a, b = pose.edge_from, pose.edge_to
        i = None
        for k in range(len(route) - 1):
            if route[k] == a and route[k + 1] == b:
                i = k + 1
                break
        if i is not None:
            extra = pose.remaining_on_edge_m
        elif route[0] == b:
            i, extra = 0, pose.remaining_on_edge_m
        elif route[0] == a:
            i, extra, uturn = 0, pose.offset_m, True
        else:
            return None
    ahead = route[i:]
    metres = extra + sum(graph.length_m(x, y) for x, y in zip(ahead, ahead[1:]))
    return RouteProgress(ahead, metres, uturn)


def _eta(graph: RoadGraph, pose: VehiclePose, route: Optional[Sequence[str]]) -> Optional[float]:
    if not route:
        return None
    prog = route_progress(graph, pose, route)
    return None if prog is None else prog.remaining_s


def initial_world(
    graph: RoadGraph, pose: VehiclePose, profiles: Sequence[PassengerProfile], tick: int = 0
) -> WorldModel:
    return WorldModel(
        tick=tick,
        map=graph,
        position=pose,
        range_remaining=pose.range_m,
        profiles=tuple(sorted(profiles, key=lambda p: p.id)),
        odometer_m=pose.odometer_m,
    )


_TREND = {Health.NORMAL: HealthTrend.STABLE, Health.ELEVATED: HealthTrend.DEGRADING, Health.EMERGENCY: HealthTrend.CRITICAL}


def update_world_model(prev: WorldModel, sit: SituationModel, tick: int) -> WorldModel:
    """Abstract the scene into the long-horizon model.

    Passenger projections depend only on the actors and stored profiles, so
    applying the same scene twice is a no-op beyond the first application.
    """
    if sit.tick != tick:
        raise ValueError(f"situation tick {sit.tick} != {tick}")
    profiles = {p.id: p for p in prev.profiles}
    old = dict(prev.passenger_projection)
    proj = []
    for a in sit.actors:
        if a.role != ActorRole.PASSENGER or a.zone not in CABIN_ZONES:
            continue
        prof = profiles.get(a.id)
        since = old[a.id].onboard_since if a.id in old else tick
        proj.append(
            (
                a.id,
                PassengerProjection(
                    health_trend=_TREND[a.health],
                    onboard_since=since,
                    max_ride_duration=prof.max_ride_duration if prof else math.inf,
                    needs_platform=prof.needs_platform if prof else False,
                ),
            )
        )
    pose = sit.self_representation.pose
    out = replace(
        prev,
        tick=tick,
        position=pose,
        range_remaining=max(0.0, pose.range_m),
        odometer_m=pose.odometer_m,
        passenger_projection=tuple(proj),
        blocked_edges=sit.conditions.blocked_edges,
    )
    if pose != prev.position:
        out = replace(out, eta_current_goal=_eta(out.map, pose, out.active_route))
    return out


# ---------------------------------------------------------------------------
# Prediction


@dataclass(frozen=True)
class GoalProjection:
    goal: str
    route: Tuple[str, ...]
    travel_time: float
    arrival_health: Tuple[Tuple[str, HealthTrend], ...]
    range_feasible: bool
    in_horizon: bool
    onward_s: Optional[float] = None
    care_facility: bool = False
    has_stop: bool = False
    platform_ok: bool = False
    known_to: FrozenSet[str] = frozenset()
    platform_users: FrozenSet[str] = frozenset()


@dataclass(frozen=True)
class WorldProjection:
    tick: int
    horizon: float
    entries: Tuple[Tuple[str, GoalProjection], ...]
    unreachable: Tuple[str, ...] = ()
    current_node: Optional[str] = None
    mission_goal: Optional[str] = None

    def get(self, goal: str) -> Optional[GoalProjection]:
        return dict(self.entries).get(goal)

    def __contains__(self, goal: str) -> bool:
        return goal in dict(self.entries)


def predict_world(
    w: WorldModel,
    horizon: float,
    extra_goals: Iterable[str] = (),
    constraints=None,
    mission_goal: Optional[str] = None,
) -> WorldProjection:
    """Project travel time, passenger condition and range feasibility per candidate goal."""
    from .strategic import RouteConstraints, plan_from_pose, plan_route
    from .errors import PlanningError

    if horizon <= 0:
        raise ValueError("horizon must be positive")
    constraints = constraints or RouteConstraints()
    if w.blocked_edges:
        constraints = replace(constraints, excluded_edges=constraints.excluded_edges | frozenset(w.blocked_edges))
    goals = {n for n in w.map.nodes if w.map.is_goal_candidate(n)} | set(extra_goals)
    if w.position.node is not None:
        goals.add(w.position.node)
    goals = sorted(goals)
    platform_users = frozenset(pid for pid, p in w.passenger_projection if p.needs_platform)
    entries = []
    unreachable = []
    for g in goals:
        try:
            route = plan_from_pose(w.map, w.position, g, constraints)
        except PlanningError:
            unreachable.append(g)
            continue
        t = route.cost_s
        arrival = []
        for pid, p in w.passenger_projection:
            remaining = w.max_remaining_onboard_time(pid)
            if p.health_trend == HealthTrend.CRITICAL:
                trend = HealthTrend.CRITICAL
            elif t > remaining:
                trend = HealthTrend.CRITICAL if p.health_trend == HealthTrend.DEGRADING else HealthTrend.DEGRADING
            else:
                trend = p.health_trend
            arrival.append((pid, trend))
        onward = None
        if mission_goal is not None:
            try:
                onward = 0.0 if g == mission_goal else plan_route(w.map, g, mission_goal, constraints).cost_s
            except PlanningError:
                onward = None
        moving = t > 0
        entries.append(
            (
                g,
                GoalProjection(
                    goal=g,
                    route=route.nodes,
                    travel_time=t,
                    arrival_health=tuple(arrival),
                    range_feasible=(not moving) or (w.range_remaining > 0 and t * NOMINAL_SPEED_MPS <= w.range_remaining),
                    in_horizon=t <= horizon,
                    onward_s=onward,
                    care_facility=w.map.nodes[g].care_facility,
                    has_stop=bool(w.map.stops_at(g)),
                    platform_ok=w.map.suitable_for_platform(g),
                    known_to=w.map.nodes[g].known_to,
                    platform_users=platform_users,
                ),
            )
        )
    return WorldProjection(
        w.tick, horizon, tuple(entries), tuple(unreachable), current_node=w.position.node, mission_goal=mission_goal
    )


# ---------------------------------------------------------------------------
# Hazards


@dataclass(frozen=True)
class Hazard:
    kind: HazardKind
    subject: str
    severity: int
    evidence: Tuple[FeatureKind, ...] = ()

    def __post_init__(self):
        if self.severity not in (0, 1, 2, 3):
            raise ValueError("severity must be 0..3")
        if self.severity > 0 and not self.evidence:
            raise ValueError("hazards above severity 0 need evidence")


def _faulted(faults: Iterable) -> set:
    out = set()
    for f in faults:
        out.add(f.subsystem if isinstance(f, SubsystemFault) else Subsystem(f))
    return out


def assess_hazards(
    sit: SituationModel, vehicle_faults: Iterable = (), profiles: Sequence[PassengerProfile] = ()
) -> List[Hazard]:
    """Hazards per passenger, ordered by severity (descending) then subject."""
    prof = {p.id: p for p in profiles}
    faulted = _faulted(vehicle_faults)
    snap = sit.self_representation
    passengers = [a for a in sit.actors if a.role == ActorRole.PASSENGER]
    onboard = [a for a in passengers if a.zone in CABIN_ZONES]
    out: List[Hazard] = []

    for a in passengers:
        if a.health == Health.EMERGENCY:
            out.append(Hazard(HazardKind.MEDICAL_EMERGENCY, a.id, 3, a.health_evidence or (FeatureKind.HEART_RATE,)))

    if Subsystem.DOOR in faulted and snap.lock == LockState.LOCKED and onboard:
        capable = any(
            Capability.CAN_OPERATE_MANUAL_RELEASE in prof[a.id].capabilities for a in onboard if a.id in prof
        )
        if not capable:
            for a in onboard:
                out.append(
                    Hazard(HazardKind.TRAPPED_RISK, a.id, 2, (FeatureKind.SUBSYSTEM_HEALTH, FeatureKind.LOCK_STATE))
                )

    if Subsystem.DRIVETRAIN in faulted:
        for a in onboard:
            out.append(Hazard(HazardKind.STRANDING_RISK, a.id, 1, (FeatureKind.SUBSYSTEM_HEALTH,)))

    for a in passengers:
        if a.ambient_temp is None or a.zone == Zone.ABSENT:
            continue
        if _outside(a.ambient_temp, SAFE_BAND):
            out.append(Hazard(HazardKind.EXPOSURE_RISK, a.id, 2, (FeatureKind.BODY_TEMP,)))
        elif _outside(a.ambient_temp, COMFORT_BAND):
            out.append(Hazard(HazardKind.EXPOSURE_RISK, a.id, 1, (FeatureKind.BODY_TEMP,)))

    here = snap.pose.node
    if here is not None:
        for a in onboard:
            p = prof.get(a.id)
            if p is not None and p.known_nodes and here not in p.known_nodes:
                out.append(Hazard(HazardKind.UNKNOWN_AREA_RISK, a.id, 1, (FeatureKind.VEHICLE_POSE,)))

    out.sort(key=lambda h: (-h.severity, h.subject, h.kind.value))
    return out
