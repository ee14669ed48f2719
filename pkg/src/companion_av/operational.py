"""Lowest level of mission execution: turn a tactical directive into actuator
setpoints every 100 ms, apply reflex overrides, and report actuator health."""

from __future__ import annotations

import math
from dataclasses import replace
from typing import List, Optional, Sequence

from .common import (
    DoorState,
    FeatureKind,
    LockState,
    PlatformState,
    ReportStatus,
    Subsystem,
    Zone,
)
from .perception import detect_subsystem_faults
from .signals import ActuatorCommand, ActuatorReport, FeatureSet, VehiclePose
from .strategic import PerformanceReport
from .tactical import Maneuver, PlatformCmd, TacticalDirective

SPEED_GAIN = 1.5
MAX_ACCEL = 2.0
MAX_DECEL = 3.0
PLAN_DECEL = 1.0  # comfortable deceleration used for the stopping profile
CREEP_MPS = 0.5
SLOT_SHIFT_MPS = 1.0
AT_STANDSTILL = 0.05


def _latest(fs: FeatureSet, kind: FeatureKind, default=None):
    found = fs.of_kind(kind)
    return found[-1].value if found else default


def _distance_to_stop(pose: VehiclePose, d: TacticalDirective) -> float:
    if d.stop_node is None:
        return math.inf
    if pose.node is not None:
        return 0.0 if pose.node == d.stop_node else math.inf
    if pose.edge_to == d.stop_node:
        return pose.remaining_on_edge_m
    return math.inf


def _next_node(pose: VehiclePose, route: Sequence[str]) -> Optional[str]:
    """Node to steer for: the next hop at a node, or the hop after the current edge."""
    route = list(route)
    if pose.node is not None:
        if pose.node in route:
            i = route.index(pose.node)
            return route[i + 1] if i + 1 < len(route) else None
        return route[0] if route else None
    if pose.edge_to in route:
        i = route.index(pose.edge_to)
        if i > 0 and route[i - 1] == pose.edge_from:
            return route[i + 1] if i + 1 < len(route) else pose.edge_to
        # Heading the wrong way along a route edge: turn around.
        if pose.edge_from in route:
            return pose.edge_from
        return route[i + 1] if i + 1 < len(route) else pose.edge_to
    if pose.edge_from in route:
        return pose.edge_from
    return pose.edge_to


def _steering(pose: VehiclePose, d: TacticalDirective) -> str:
    stop = d.target_stop
    if stop is not None:
        if pose.node == stop.node:
            return f"slot:{stop.lateral_slot}"
        final_leg = not d.route or d.route[-1] == stop.node
        if pose.node is None and pose.edge_to == stop.node and final_leg:
            return f"slot:{stop.lateral_slot}"
    if d.route:
        nxt = _next_node(pose, d.route)
        if nxt is not None:
            return nxt
    return pose.heading_node


def _target_speed(pose: VehiclePose, d: TacticalDirective, door: DoorState, lock: LockState, steer: str) -> float:
    if d.maneuver in (Maneuver.HOLD, Maneuver.PULL_OVER):
        return 0.0
    if door != DoorState.CLOSED or lock != LockState.LOCKED:
        return 0.0
    if pose.node is None and steer == pose.edge_from:
        return 0.0  # stop first, the plant turns us around at standstill
    if steer.startswith("slot:") and pose.node is not None:
        return SLOT_SHIFT_MPS if pose.slot != steer[5:] else 0.0
    dist = _distance_to_stop(pose, d)
    if dist == 0.0:
        return 0.0
    v = d.speed_limit_mps
    if math.isfinite(dist):
        v = min(v, max(math.sqrt(2.0 * PLAN_DECEL * dist), CREEP_MPS))
    return v


def execute(directive: TacticalDirective, fs: FeatureSet, tick: int) -> List[ActuatorCommand]:
    """Setpoints for every subsystem, from the directive and the latest vehicle features."""
    pose: VehiclePose = _latest(fs, FeatureKind.VEHICLE_POSE)
    if pose is None:
        raise ValueError("operational control needs a vehicle pose in every feature set")
    door = DoorState(_latest(fs, FeatureKind.DOOR_POSITION, DoorState.CLOSED.value))
    lock = LockState(_latest(fs, FeatureKind.LOCK_STATE, LockState.LOCKED.value))
    platform_raw = _latest(fs, FeatureKind.PLATFORM_POSITION, (PlatformState.STOWED.value, False))
    platform = PlatformState(platform_raw[0] if isinstance(platform_raw, tuple) else platform_raw)
    still = pose.speed <= AT_STANDSTILL

    steer = _steering(pose, directive)
    v_ref = _target_speed(pose, directive, door, lock, steer)
    accel = max(-MAX_DECEL, min(MAX_ACCEL, SPEED_GAIN * (v_ref - pose.speed)))
    if v_ref == 0.0 and pose.speed == 0.0:
        accel = 0.0
    cmds = [
        ActuatorCommand(Subsystem.DRIVETRAIN, round(max(accel, 0.0), 6)),
        ActuatorCommand(Subsystem.BRAKE, round(max(-accel, 0.0), 6)),
        ActuatorCommand(Subsystem.STEERING, steer),
    ]

    sched = directive.door_schedule
    if sched is not None and still and tick >= sched.unlock_at:
        lock_cmd = LockState.UNLOCKED
        door_cmd = "OPEN" if tick >= sched.open_at else "CLOSE"
    elif platform != PlatformState.STOWED and door != DoorState.CLOSED:
        lock_cmd, door_cmd = LockState.UNLOCKED, "HOLD"
    else:
        door_cmd = "CLOSE"
        lock_cmd = LockState.LOCKED if door == DoorState.CLOSED else LockState.UNLOCKED
    cmds.append(ActuatorCommand(Subsystem.DOOR, door_cmd))
    cmds.append(ActuatorCommand(Subsystem.LOCK, lock_cmd.value))

    pcmd = directive.platform_cmd
    if pcmd != PlatformCmd.NONE and still and door == DoorState.OPEN:
        cmds.append(ActuatorCommand(Subsystem.PLATFORM, pcmd.value))
    else:
        cmds.append(ActuatorCommand(Subsystem.PLATFORM, "HOLD"))
    return cmds


def reflex_check(proposed: Sequence[ActuatorCommand], fs: FeatureSet) -> List[ActuatorCommand]:
    """Same-tick safety overrides; commands pass through unchanged when nothing applies.

    A closing door holds while anyone is in the doorway. Platform motion holds
    while the platform is obstructed, and stowing holds while anyone stands on it.
    """
    zones = set()
    for f in fs.of_kind(FeatureKind.POSTURE):
        v = f.value
        zones.add(Zone(v[0] if isinstance(v, (tuple, list)) else v))
    raw = _latest(fs, FeatureKind.PLATFORM_POSITION)
    obstructed = bool(raw[1]) if isinstance(raw, tuple) else False

    out = []
    for c in proposed:
        if c.subsystem == Subsystem.DOOR and c.setpoint == "CLOSE" and Zone.DOORWAY in zones:
            c = replace(c, setpoint="HOLD")
        elif c.subsystem == Subsystem.PLATFORM and c.setpoint != "HOLD":
            if obstructed or (c.setpoint == "STOW" and Zone.ON_PLATFORM in zones):
                c = replace(c, setpoint="HOLD")
        out.append(c)
    return out


def report_actuation(window: Sequence[Sequence[ActuatorReport]]) -> PerformanceReport:
    """FAILED with one reason per debounced subsystem fault, else NOMINAL."""
    faults = detect_subsystem_faults(window)
    if not faults:
        return PerformanceReport("OPERATIONAL")
    reasons = tuple(sorted(f"ACTUATOR_FAULT:{f.subsystem.value}" for f in faults))
    return PerformanceReport("OPERATIONAL", ReportStatus.FAILED, reasons)
