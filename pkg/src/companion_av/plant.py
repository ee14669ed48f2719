"""Simulated vehicle, passengers and surroundings.

The plant is the only place where time passes physically: it integrates the
vehicle along the road graph, moves the door, lock and platform, walks
passengers in and out, and renders everything as a sensor frame. Disturbances
are injected here and nowhere else.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Any, Dict, FrozenSet, Iterable, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from .common import (
    OPERATIONAL_PERIOD_MS,
    TACTICAL_PERIOD_MS,
    DoorState,
    FeatureKind,
    LockState,
    PlatformState,
    Subsystem,
    Zone,
)
from .roadmap import RoadGraph, edge_key
from .signals import ActuatorCommand, ActuatorReport, Reading, SensorFrame, VehiclePose

DT = OPERATIONAL_PERIOD_MS / 1000.0
DOOR_STEPS = 20  # two seconds end to end
PLATFORM_STEPS = 50  # five seconds per platform movement
SLOT_SHIFT_M = 10.0
STANDSTILL = 0.05
SNAP_SPEED = 0.1
SNAP_DISTANCE_M = 0.1

CATEGORIES = ("ENV", "VEH", "PAX")

# Seconds a cooperative passenger takes for each move.
WALK_S = {
    "to_platform": 2.0,
    "to_doorway": 2.0,
    "enter": 2.0,
    "seat": 5.0,
    "unseat": 3.0,
    "exit": 2.0,
    "leave": 10.0,
}

DEFAULT_SENSORS: Dict[str, FrozenSet[FeatureKind]] = {
    "odometry": frozenset({FeatureKind.VEHICLE_POSE}),
    "door_encoder": frozenset({FeatureKind.DOOR_POSITION}),
    "lock_sensor": frozenset({FeatureKind.LOCK_STATE}),
    "platform_sensor": frozenset({FeatureKind.PLATFORM_POSITION}),
    "cabin_camera": frozenset({FeatureKind.POSTURE, FeatureKind.FALLEN}),
    "exterior_camera": frozenset({FeatureKind.POSTURE}),
    "hr_camera": frozenset({FeatureKind.HEART_RATE}),
    "cabin_thermometer": frozenset({FeatureKind.CABIN_TEMP}),
    "ambient_thermometer": frozenset({FeatureKind.AMBIENT_TEMP}),
    "lane_radar": frozenset({FeatureKind.TRAFFIC_OCCUPANCY}),
    "v2x": frozenset({FeatureKind.EXTERNAL_INFO}),
}

FIXED_ENTITIES = frozenset({"vehicle", "door", "lock", "platform", "cabin", "ambient", "environment"})


def _freeze(value):
    if isinstance(value, Mapping):
        return tuple(sorted((k, _freeze(v)) for k, v in value.items()))
    if isinstance(value, (list, tuple)):
        return tuple(_freeze(v) for v in value)
    return value


@dataclass(frozen=True)
class Disturbance:
    category: str
    subtype: str
    onset: int
    params: Tuple[Tuple[str, Any], ...] = ()
    expiry: Optional[int] = None

    def __post_init__(self):
        if self.category not in CATEGORIES:
            raise ValueError(f"unknown disturbance category {self.category!r}")
        if not self.subtype.startswith(self.category + "_"):
            raise ValueError(f"subtype {self.subtype!r} does not belong to {self.category}")
        if self.onset < 0:
            raise ValueError("onset must be non-negative")
        if self.expiry is not None and self.expiry <= self.onset:
            raise ValueError("expiry must follow onset")
        object.__setattr__(self, "params", _freeze(dict(self.params)))

    def param(self, key: str, default=None):
        return dict(self.params).get(key, default)

    def active_at(self, tick: int) -> bool:
        return self.onset <= tick and (self.expiry is None or tick < self.expiry)


def make_disturbance(subtype: str, onset: int, params: Optional[Mapping] = None, expiry: Optional[int] = None):
    return Disturbance(subtype.split("_", 1)[0], subtype, onset, tuple((params or {}).items()), expiry)


def activate_disturbances(schedule: Sequence[Disturbance], tick: int) -> Tuple[Disturbance, ...]:
    """Disturbances in effect at ``tick``; the schedule must be ordered by onset."""
    if any(b.onset < a.onset for a, b in zip(schedule, schedule[1:])):
        raise ValueError("disturbance schedule must be sorted by onset")
    return tuple(d for d in schedule if d.active_at(tick))


# ---------------------------------------------------------------------------
# State


@dataclass(frozen=True)
class VehicleState:
    node: Optional[str]
    edge_from: Optional[str] = None
    edge_to: Optional[str] = None
    offset_m: float = 0.0
    speed: float = 0.0
    slot: Optional[str] = None
    shift_to: Optional[str] = None
    shift_left_m: float = 0.0
    door_steps: int = 0
    door_target: str = "CLOSE"
    lock: LockState = LockState.LOCKED
    platform: PlatformState = PlatformState.STOWED
    platform_left: int = 0
    range_m: float = 100_000.0
    odometer_m: float = 0.0
    # Last setpoint each actuator accepted.
    accepted: Tuple[Tuple[str, Any], ...] = (
        ("BRAKE", 0.0),
        ("DOOR", "CLOSE"),
        ("DRIVETRAIN", 0.0),
        ("LOCK", "LOCKED"),
        ("PLATFORM", "HOLD"),
        ("STEERING", None),
    )

    @property
    def door(self) -> DoorState:
        if self.door_steps == 0:
            return DoorState.CLOSED
        if self.door_steps == DOOR_STEPS:
            return DoorState.OPEN
        return DoorState.OPENING if self.door_target == "OPEN" else DoorState.CLOSING

    def setpoint(self, sub: Subsystem):
        return dict(self.accepted)[sub.value]


@dataclass(frozen=True)
class PassengerTruth:
    id: str
    zone: Zone
    distance: float = 0.0
    needs_platform: bool = False
    intent: str = "RIDE"  # RIDE, BOARD, DEBOARD or LEAVE
    pending: Optional[Zone] = None
    pending_due: int = 0
    hr_base: float = 72.0
    hr: float = 72.0
    fallen: bool = False
    resume_zone: Optional[Zone] = None


@dataclass(frozen=True)
class ExternalTruth:
    id: str
    zone: Zone = Zone.ABSENT
    distance: float = 100.0


@dataclass(frozen=True)
class PlantState:
    tick: int
    vehicle: VehicleState
    passengers: Tuple[PassengerTruth, ...] = ()
    externals: Tuple[ExternalTruth, ...] = ()
    weather: FrozenSet[str] = frozenset()
    blocked: FrozenSet[Tuple[str, str]] = frozenset()
    ever_blocked: FrozenSet[Tuple[str, str]] = frozenset()
    cabin_temp: float = 21.0
    ambient_temp: float = 15.0
    obstructed: bool = False
    faulted: FrozenSet[Subsystem] = frozenset()
    applied: FrozenSet[Tuple[str, int]] = frozenset()
    traffic: Tuple[Tuple[str, Tuple[Tuple[int, int], ...]], ...] = ()

    def passenger(self, pid: str) -> PassengerTruth:
        for p in self.passengers:
            if p.id == pid:
                return p
        raise KeyError(pid)

    def pose(self, graph: RoadGraph) -> VehiclePose:
        v = self.vehicle
        length = graph.length_m(v.edge_from, v.edge_to) if v.node is None else 0.0
        return VehiclePose(
            node=v.node,
            edge_from=v.edge_from,
            edge_to=v.edge_to,
            offset_m=round(v.offset_m, 6),
            edge_len_m=length,
            speed=round(v.speed, 6),
            slot=v.slot,
            range_m=round(v.range_m, 3),
            odometer_m=round(v.odometer_m, 3),
        )


def initial_plant(
    node: str,
    slot: Optional[str],
    passengers: Iterable[PassengerTruth],
    externals: Iterable[str] = (),
    range_m: float = 100_000.0,
    cabin_temp: float = 21.0,
    ambient_temp: float = 15.0,
    tick: int = 0,
) -> PlantState:
    return PlantState(
        tick=tick,
        vehicle=VehicleState(node=node, slot=slot, range_m=range_m),
        passengers=tuple(sorted(passengers, key=lambda p: p.id)),
        externals=tuple(ExternalTruth(e) for e in sorted(externals)),
        cabin_temp=cabin_temp,
        ambient_temp=ambient_temp,
    )


# ---------------------------------------------------------------------------
# Environment and faults


_FAULT_SUBSYSTEMS = {
    "VEH_DOOR_ACTUATOR_FAULT": (Subsystem.DOOR, Subsystem.LOCK),
    "VEH_PLATFORM_FAULT": (Subsystem.PLATFORM,),
    "VEH_DRIVETRAIN_FAULT": (Subsystem.DRIVETRAIN,),
    "VEH_BRAKE_FAULT": (Subsystem.BRAKE,),
}


def _environment(state: PlantState, active: Sequence[Disturbance]) -> PlantState:
    weather, blocked, faulted = set(), set(), set()
    cabin, ambient = state.cabin_temp, state.ambient_temp
    obstructed = False
    traffic: Dict[str, List[Tuple[int, int]]] = {}
    v = state.vehicle
    applied = set(state.applied)
    for d in active:
        st = d.subtype
        if st == "ENV_WEATHER":
            flags = d.param("flags", (d.param("flag", "STORM"),))
            weather.update(flags if isinstance(flags, tuple) else (flags,))
        elif st == "ENV_BLOCKED_EDGE":
            blocked.add(edge_key(d.param("a"), d.param("b")))
        elif st == "ENV_TEMPERATURE":
            cabin = float(d.param("cabin_temp", cabin))
            ambient = float(d.param("ambient_temp", ambient))
        elif st == "ENV_PLATFORM_OBSTRUCTION":
            obstructed = True
        elif st == "ENV_TRAFFIC":
            busy = [(int(round(a * 1000)), int(round(b * 1000))) for a, b in d.param("busy", ())]
            traffic.setdefault(d.param("slot"), []).extend(busy)
        elif st in _FAULT_SUBSYSTEMS:
            subs = d.param("subsystems")
            faulted.update(Subsystem(s) for s in subs) if subs else faulted.update(_FAULT_SUBSYSTEMS[st])
        elif st == "VEH_RANGE_LOSS":
            key = (st, d.onset)
            if key not in applied:
                applied.add(key)
                v = replace(v, range_m=max(0.0, v.range_m - float(d.param("metres", 0.0))))
        # Unknown subtypes are ignored by the plant; PAX_* are handled per passenger.
    return replace(
        state,
        vehicle=v,
        weather=frozenset(weather),
        blocked=frozenset(blocked),
        ever_blocked=state.ever_blocked | frozenset(blocked),
        cabin_temp=cabin,
        ambient_temp=ambient,
        obstructed=obstructed,
        faulted=frozenset(faulted),
        applied=frozenset(applied),
        traffic=tuple(sorted((k, tuple(sorted(iv))) for k, iv in traffic.items())),
    )


# ---------------------------------------------------------------------------
# Actuators


def _accept(state: PlantState, commands: Sequence[ActuatorCommand], tick: int):
    """Resolve which setpoints each actuator takes; faulted or interlocked ones keep the old value."""
    v = state.vehicle
    acc = dict(v.accepted)
    by_sub = {c.subsystem: c.setpoint for c in commands}
    on_platform = any(p.zone == Zone.ON_PLATFORM for p in state.passengers)
    reports = []
    # Lock before door so an unlock and open in the same tick both succeed.
    order = [Subsystem.DRIVETRAIN, Subsystem.BRAKE, Subsystem.STEERING, Subsystem.LOCK, Subsystem.DOOR, Subsystem.PLATFORM]
    for sub in order:
        if sub not in by_sub:
            continue
        want = by_sub[sub]
        ok = sub not in state.faulted
        if ok and sub == Subsystem.LOCK and want == LockState.LOCKED.value:
            ok = v.door_steps == 0
        if ok and sub == Subsystem.DOOR and want == "OPEN":
            ok = v.speed <= STANDSTILL and acc["LOCK"] == LockState.UNLOCKED.value
        if ok and sub == Subsystem.DOOR and want == "CLOSE":
            ok = v.platform == PlatformState.STOWED or v.door_steps == 0
        if ok and sub == Subsystem.PLATFORM and want != "HOLD":
            ok = v.speed <= STANDSTILL and v.door_steps == DOOR_STEPS
            if want == "STOW" and on_platform:
                ok = False
        if ok:
            acc[sub.value] = want
        reports.append(ActuatorReport(sub, want, acc[sub.value], tick))
    return acc, reports


def _move_door(v: VehicleState, acc: Dict[str, Any], frozen: bool) -> VehicleState:
    cmd = acc["DOOR"]
    target = v.door_target
    if cmd == "OPEN":
        target = "OPEN"
    elif cmd == "CLOSE":
        target = "CLOSE"
    elif cmd == "HOLD" and v.door_steps > 0:
        target = "OPEN"
    steps = v.door_steps
    if not frozen:
        steps = min(DOOR_STEPS, steps + 1) if target == "OPEN" else max(0, steps - 1)
    return replace(v, door_target=target, door_steps=steps)


_PLATFORM_MOTION = {
    "DEPLOY": ({PlatformState.STOWED}, PlatformState.DEPLOYING, PlatformState.DEPLOYED),
    "LIFT": ({PlatformState.DEPLOYED}, PlatformState.LIFTING, PlatformState.LIFTED),
    "STOW": ({PlatformState.DEPLOYED, PlatformState.LIFTED}, PlatformState.STOWING, PlatformState.STOWED),
}


def _move_platform(v: VehicleState, cmd: str, frozen: bool) -> VehicleState:
    if frozen or cmd not in _PLATFORM_MOTION:
        return v
    start, moving, end = _PLATFORM_MOTION[cmd]
    if v.platform in start:
        return replace(v, platform=moving, platform_left=PLATFORM_STEPS - 1)
    if v.platform == moving:
        left = v.platform_left - 1
        if left <= 0:
            return replace(v, platform=end, platform_left=0)
        return replace(v, platform_left=left)
    return v


def _drive(v: VehicleState, acc: Dict[str, Any], graph: RoadGraph, blocked: FrozenSet) -> VehicleState:
    accel = float(acc["DRIVETRAIN"] or 0.0)
    brake = float(acc["BRAKE"] or 0.0)
    steer = acc["STEERING"]
    if v.range_m <= 0.0:
        accel = 0.0
    if v.door_steps > 0:
        accel, brake = 0.0, max(brake, 3.0)
    v_new = max(0.0, v.speed + (accel - brake) * DT)
    if accel == 0.0 and brake > 0.0 and v_new < SNAP_SPEED:
        v_new = 0.0
    ds = 0.5 * (v.speed + v_new) * DT
    moved = ds

    if v.node is not None:
        node = v.node
        if isinstance(steer, str) and steer.startswith("slot:"):
            target = steer[5:]
            slots = {s.lateral_slot for s in graph.stops_at(node)}
            if target == v.slot or target not in slots:
                return replace(v, speed=0.0, shift_to=None, shift_left_m=0.0)
            left = v.shift_left_m if v.shift_to == target else SLOT_SHIFT_M
            left -= ds
            if left <= 0.0:
                v = replace(v, slot=target, shift_to=None, shift_left_m=0.0, speed=0.0)
            else:
                v = replace(v, shift_to=target, shift_left_m=left, speed=v_new)
            return _spend(v, moved)
        if steer in dict(graph.neighbors(node)) and edge_key(node, steer) not in blocked and v_new > 0.0:
            v = replace(
                v, node=None, edge_from=node, edge_to=steer, offset_m=ds, slot=None, speed=v_new, shift_to=None
            )
            return _spend(_arrive_if_done(v, steer, graph, blocked), moved)
        return replace(v, speed=0.0)

    length = graph.length_m(v.edge_from, v.edge_to)
    if steer == v.edge_from and v.speed == 0.0 and v_new == 0.0:
        return replace(v, edge_from=v.edge_to, edge_to=v.edge_from, offset_m=length - v.offset_m)
    v = replace(v, offset_m=v.offset_m + ds, speed=v_new)
    if v_new == 0.0 and length - v.offset_m <= SNAP_DISTANCE_M:
        v = replace(v, offset_m=length)
    return _spend(_arrive_if_done(v, steer, graph, blocked), moved)


def _arrive_if_done(v: VehicleState, steer, graph: RoadGraph, blocked: FrozenSet) -> VehicleState:
    length = graph.length_m(v.edge_from, v.edge_to)
    if v.offset_m < length:
        return v
    leftover = v.offset_m - length
    node = v.edge_to
    slot = None
    if isinstance(steer, str) and steer.startswith("slot:"):
        if steer[5:] in {s.lateral_slot for s in graph.stops_at(node)}:
            slot = steer[5:]
    arrived = replace(v, node=node, edge_from=None, edge_to=None, offset_m=0.0, slot=slot)
    if slot is None and steer in dict(graph.neighbors(node)) and edge_key(node, steer) not in blocked:
        if v.speed > 0.0:
            onward = replace(arrived, node=None, edge_from=node, edge_to=steer, offset_m=leftover)
            return _arrive_if_done(onward, steer, graph, blocked)
    return replace(arrived, speed=0.0)


def _spend(v: VehicleState, ds: float) -> VehicleState:
    return replace(v, range_m=max(0.0, v.range_m - ds), odometer_m=v.odometer_m + ds)


# ---------------------------------------------------------------------------
# Passengers


def _cooperative_target(p: PassengerTruth, v: VehicleState) -> Tuple[Optional[Zone], float]:
    door_open = v.door_steps == DOOR_STEPS
    still = v.speed == 0.0
    z = p.zone
    if p.intent == "BOARD":
        if z == Zone.OUTSIDE_NEAR and door_open and still:
            if p.needs_platform:
                if v.platform == PlatformState.DEPLOYED:
                    return Zone.ON_PLATFORM, WALK_S["to_platform"]
            else:
                return Zone.DOORWAY, WALK_S["to_doorway"]
        if z == Zone.DOORWAY:
            return Zone.CABIN_UNSECURED, WALK_S["enter"]
        if z == Zone.ON_PLATFORM and v.platform == PlatformState.LIFTED:
            return Zone.CABIN_UNSECURED, WALK_S["enter"]
        if z == Zone.CABIN_UNSECURED:
            return Zone.CABIN_SEATED, WALK_S["seat"]
    elif p.intent == "DEBOARD":
        if z == Zone.CABIN_SEATED and door_open and still:
            return Zone.CABIN_UNSECURED, WALK_S["unseat"]
        if z == Zone.CABIN_UNSECURED and door_open and still:
            if p.needs_platform:
                if v.platform == PlatformState.DEPLOYED:
                    return Zone.ON_PLATFORM, WALK_S["to_platform"]
            else:
                return Zone.DOORWAY, WALK_S["to_doorway"]
        if z == Zone.ON_PLATFORM and v.platform == PlatformState.LIFTED:
            return Zone.OUTSIDE_NEAR, WALK_S["exit"]
        if z == Zone.DOORWAY:
            return Zone.OUTSIDE_NEAR, WALK_S["exit"]
    elif p.intent == "LEAVE" and z == Zone.OUTSIDE_NEAR and v.door_steps == 0:
        return Zone.ABSENT, WALK_S["leave"]
    return None, 0.0


_ZONE_DISTANCE = {
    Zone.CABIN_SEATED: 0.0,
    Zone.CABIN_UNSECURED: 0.0,
    Zone.ON_PLATFORM: 0.5,
    Zone.DOORWAY: 0.5,
    Zone.OUTSIDE_NEAR: 2.0,
    Zone.ABSENT: 100.0,
}


def _settle(p: PassengerTruth, zone: Zone) -> PassengerTruth:
    intent = p.intent
    if intent == "BOARD" and zone == Zone.CABIN_SEATED:
        intent = "RIDE"
    elif intent == "DEBOARD" and zone == Zone.OUTSIDE_NEAR:
        intent = "LEAVE"
    elif intent == "LEAVE" and zone == Zone.ABSENT:
        intent = "RIDE"
    return replace(p, zone=zone, distance=_ZONE_DISTANCE[zone], pending=None, intent=intent)


def step_passengers(
    state: PlantState,
    active: Sequence[Disturbance],
    tick: int,
    rng: np.random.Generator,
    cues: Mapping[str, str] = {},
) -> PlantState:
    """Cooperative movement, scripted overrides and seeded physiology for every passenger."""
    v = state.vehicle
    medical = {d.param("passenger"): d for d in active if d.subtype == "PAX_MEDICAL_EVENT"}
    moves = {d.param("passenger"): d for d in active if d.subtype == "PAX_UNSCRIPTED_MOVEMENT"}
    sample = tick % TACTICAL_PERIOD_MS == 0
    out = []
    for p in state.passengers:
        if p.id in cues:
            p = replace(p, intent=cues[p.id], pending=None)
        # Physiology: one draw per passenger per second keeps the stream aligned.
        if sample:
            jitter = float(rng.integers(-2, 3))
            med = medical.get(p.id)
            hr = float(med.param("hr")) if med is not None and med.param("hr") is not None else p.hr_base + jitter
            fallen = bool(med.param("fallen", False)) if med is not None else False
            p = replace(p, hr=hr, fallen=fallen)
            if fallen and p.zone == Zone.CABIN_SEATED:
                p = replace(p, zone=Zone.CABIN_UNSECURED)

        move = moves.get(p.id)
        if move is not None:
            if p.resume_zone is None:
                p = replace(p, resume_zone=p.zone, pending=None)
            zone = Zone(move.param("zone"))
            p = replace(p, zone=zone, distance=float(move.param("distance", _ZONE_DISTANCE[zone])))
            out.append(p)
            continue
        if p.resume_zone is not None:
            p = replace(p, zone=p.resume_zone, distance=_ZONE_DISTANCE[p.resume_zone], resume_zone=None)

        if p.fallen:
            out.append(replace(p, pending=None))
            continue
        target, delay = _cooperative_target(p, v)
        if target is None:
            p = replace(p, pending=None)
        elif p.pending != target:
            p = replace(p, pending=target, pending_due=tick + int(delay * 1000))
        elif tick >= p.pending_due:
            p = _settle(p, target)
        out.append(p)

    externals = []
    people = {d.param("person"): d for d in active if d.subtype == "ENV_EXTERNAL_PERSON"}
    for e in state.externals:
        d = people.get(e.id)
        if d is None:
            externals.append(replace(e, zone=Zone.ABSENT, distance=100.0))
        else:
            zone = Zone(d.param("zone", Zone.OUTSIDE_NEAR.value))
            externals.append(replace(e, zone=zone, distance=float(d.param("distance", _ZONE_DISTANCE[zone]))))
    return replace(state, passengers=tuple(out), externals=tuple(externals))


# ---------------------------------------------------------------------------
# Step and sensing


def sense(state: PlantState, graph: RoadGraph, extra: Sequence[Reading] = ()) -> SensorFrame:
    v = state.vehicle
    tick = state.tick
    r: List[Reading] = [
        Reading("odometry", FeatureKind.VEHICLE_POSE, "vehicle", state.pose(graph)),
        Reading("door_encoder", FeatureKind.DOOR_POSITION, "door", v.door.value),
        Reading("lock_sensor", FeatureKind.LOCK_STATE, "lock", v.lock.value),
        Reading("platform_sensor", FeatureKind.PLATFORM_POSITION, "platform", (v.platform.value, state.obstructed)),
    ]
    for p in state.passengers:
        r.append(Reading("cabin_camera", FeatureKind.POSTURE, p.id, (p.zone.value, p.distance)))
    for e in state.externals:
        r.append(Reading("exterior_camera", FeatureKind.POSTURE, e.id, (e.zone.value, e.distance)))
    if tick % TACTICAL_PERIOD_MS == 0:
        for p in state.passengers:
            if p.zone != Zone.ABSENT:
                r.append(Reading("hr_camera", FeatureKind.HEART_RATE, p.id, p.hr))
                r.append(Reading("cabin_camera", FeatureKind.FALLEN, p.id, p.fallen))
        r.append(Reading("cabin_thermometer", FeatureKind.CABIN_TEMP, "cabin", state.cabin_temp))
        r.append(Reading("ambient_thermometer", FeatureKind.AMBIENT_TEMP, "ambient", state.ambient_temp))
        for slot, busy in state.traffic:
            r.append(Reading("lane_radar", FeatureKind.TRAFFIC_OCCUPANCY, slot, busy))
        r.append(Reading("v2x", FeatureKind.EXTERNAL_INFO, "environment", ("WEATHER", tuple(sorted(state.weather)))))
        for a, b in sorted(state.ever_blocked):
            active = (a, b) in state.blocked
            r.append(Reading("v2x", FeatureKind.EXTERNAL_INFO, "environment", ("BLOCKED_EDGE", a, b, active)))
    r.extend(extra)
    return SensorFrame(tick, tuple(r))


def step_plant(
    state: PlantState,
    commands: Sequence[ActuatorCommand],
    active: Sequence[Disturbance],
    tick: int,
    graph: RoadGraph,
    rng: np.random.Generator,
    cues: Mapping[str, str] = {},
) -> Tuple[PlantState, SensorFrame, List[ActuatorReport]]:
    """Advance the world by one operational period to ``tick``.

    Commands are those issued on the previous tick. Returns the new state, what
    the sensors see, and one actuator report per command.
    """
    if tick < state.tick:
        raise ValueError("plant time cannot go backwards")
    state = _environment(replace(state, tick=tick), active)
    acc, reports = _accept(state, commands, tick)
    v = replace(state.vehicle, accepted=tuple(sorted(acc.items())))
    if Subsystem.DRIVETRAIN in state.faulted:
        acc = dict(acc, DRIVETRAIN=0.0)
    v = _drive(v, acc, graph, state.blocked)
    v = replace(v, lock=LockState(acc["LOCK"]))
    v = _move_door(v, acc, Subsystem.DOOR in state.faulted)
    v = _move_platform(v, acc["PLATFORM"], Subsystem.PLATFORM in state.faulted or state.obstructed)
    state = step_passengers(replace(state, vehicle=v), active, tick, rng, cues)
    return state, sense(state, graph), reports
