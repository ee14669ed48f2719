"""Middle level of mission execution: stop selection, door timing against
adjacent traffic, the boarding/deboarding sequence, and behaviour planning."""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Dict, FrozenSet, List, Optional, Sequence, Tuple, Union

from .common import (
    NOMINAL_SPEED_MPS,
    OUTSIDE_ZONES,
    STATIONARY_SPEED_MPS,
    DoorState,
    LockState,
    PlatformState,
    ReportStatus,
    Zone,
)
from .errors import NoSuitableStopError
from .odd import PassengerProfile
from .representation import SituationModel, route_progress
from .roadmap import RoadGraph, StopPoint
from .signals import InfoOutput
from .strategic import Action, PerformanceReport, StrategyPlan

CLEAR_GAP_MS = 3_000
DOOR_LOOKAHEAD_MS = 60_000
BOARDING_ALLOWANCE_S = 120.0
GUARD_TIMEOUT_MS = 120_000
ALIGN_RADIUS_M = 50.0
ALIGN_SPEED_MPS = 2.0


class Maneuver(str, Enum):
    FOLLOW_ROUTE = "FOLLOW_ROUTE"
    PULL_OVER = "PULL_OVER"
    HOLD = "HOLD"
    ALIGN_TO_STOP = "ALIGN_TO_STOP"


class PlatformCmd(str, Enum):
    NONE = "NONE"
    DEPLOY = "DEPLOY"
    LIFT = "LIFT"
    STOW = "STOW"


class BoardingPhase(str, Enum):
    ALIGN_TO_STOP = "ALIGN_TO_STOP"
    DOOR_OPENING = "DOOR_OPENING"
    PLATFORM_DEPLOY = "PLATFORM_DEPLOY"
    PLATFORM_LIFT = "PLATFORM_LIFT"
    PASSENGER_SECURING = "PASSENGER_SECURING"
    PLATFORM_STOW = "PLATFORM_STOW"
    DOOR_CLOSING = "DOOR_CLOSING"
    READY = "READY"
    FAILED = "FAILED"


PHASE_ORDER = [p for p in BoardingPhase if p != BoardingPhase.FAILED]
PLATFORM_PHASES = frozenset({BoardingPhase.PLATFORM_DEPLOY, BoardingPhase.PLATFORM_LIFT, BoardingPhase.PLATFORM_STOW})


class Direction(str, Enum):
    BOARD = "BOARD"
    DEBOARD = "DEBOARD"


@dataclass(frozen=True)
class DoorSchedule:
    unlock_at: int
    open_at: int

    def __post_init__(self):
        if self.open_at < self.unlock_at:
            raise ValueError("doors cannot open before they unlock")


@dataclass(frozen=True)
class Deferred:
    reason: str = "DOOR_BLOCKED_BY_TRAFFIC"
    checked_until: int = 0


@dataclass(frozen=True)
class TacticalDirective:
    maneuver: Maneuver
    target_stop: Optional[StopPoint] = None
    door_schedule: Optional[DoorSchedule] = None
    platform_cmd: PlatformCmd = PlatformCmd.NONE
    speed_limit_mps: float = 0.0
    route: Tuple[str, ...] = ()
    stop_node: Optional[str] = None
    eta_s: Optional[float] = None

    def __post_init__(self):
        if self.platform_cmd != PlatformCmd.NONE and self.maneuver not in (Maneuver.HOLD, Maneuver.ALIGN_TO_STOP):
            raise ValueError("platform commands need a held or aligning vehicle")


HOLD = TacticalDirective(Maneuver.HOLD)


# ---------------------------------------------------------------------------
# Stops and doors


def select_stop(
    goal_node: str,
    candidates: Sequence[StopPoint],
    manifest_profiles: Sequence[PassengerProfile],
    exclude: FrozenSet[str] = frozenset(),
) -> StopPoint:
    """Flattest usable stop at the node; platform users restrict to platform-usable stops."""
    pool = [s for s in candidates if s.node == goal_node and s.lateral_slot not in exclude]
    if any(p.needs_platform for p in manifest_profiles):
        pool = [s for s in pool if s.platform_usable]
    if not pool:
        raise NoSuitableStopError(f"no suitable stop at {goal_node}")
    return min(pool, key=lambda s: (s.slope_deg, s.lateral_slot))


def schedule_door(
    sit: SituationModel,
    traffic: Sequence[Tuple[int, int]],
    now: int,
    unlock_lead_ms: int = 0,
) -> Union[DoorSchedule, Deferred]:
    """Earliest opening with a clear adjacent-lane gap of at least three seconds.

    ``traffic`` is a list of busy ``[start, end)`` intervals in ticks.
    """
    if sit.self_representation.speed > STATIONARY_SPEED_MPS:
        raise ValueError("door scheduling needs a stationary vehicle")
    busy = sorted((int(a), int(b)) for a, b in traffic if b > a)
    t = now
    moved = True
    while moved and t - now <= DOOR_LOOKAHEAD_MS:
        moved = False
        for a, b in busy:
            if a < t + CLEAR_GAP_MS and b > t:
                t = b
                moved = True
    if t - now > DOOR_LOOKAHEAD_MS:
        return Deferred(checked_until=now + DOOR_LOOKAHEAD_MS)
    return DoorSchedule(unlock_at=max(now, t - unlock_lead_ms), open_at=t)


# ---------------------------------------------------------------------------
# Boarding sequence


@dataclass(frozen=True)
class BoardingState:
    direction: Direction
    stop: StopPoint
    passengers: Tuple[str, ...]
    platform_users: Tuple[str, ...] = ()
    phase: BoardingPhase = BoardingPhase.ALIGN_TO_STOP
    phase_since: int = 0
    trace: Tuple[BoardingPhase, ...] = (BoardingPhase.ALIGN_TO_STOP,)
    door_schedule: Optional[DoorSchedule] = None
    deferred: bool = False
    resume_closing: bool = False
    failure: Optional[str] = None
    unlock_lead_ms: int = 0

    @property
    def active(self) -> bool:
        return self.phase not in (BoardingPhase.READY, BoardingPhase.FAILED)

    @property
    def uses_platform(self) -> bool:
        return bool(self.platform_users)


def start_boarding(
    direction: Direction,
    stop: StopPoint,
    passengers: Sequence[str],
    profiles: Sequence[PassengerProfile],
    now: int,
    unlock_lead_ms: int = 0,
) -> BoardingState:
    prof = {p.id: p for p in profiles}
    users = tuple(sorted(p for p in passengers if p in prof and prof[p].needs_platform))
    return BoardingState(
        direction=direction,
        stop=stop,
        passengers=tuple(sorted(passengers)),
        platform_users=users,
        phase_since=now,
        unlock_lead_ms=unlock_lead_ms,
    )


def _goto(state: BoardingState, phase: BoardingPhase, now: int, **changes) -> BoardingState:
    return replace(state, phase=phase, phase_since=now, trace=state.trace + (phase,), **changes)


def _stationary_at(sit: SituationModel, stop: StopPoint) -> bool:
    pose = sit.self_representation.pose
    return pose.node == stop.node and pose.slot == stop.lateral_slot and pose.speed == 0.0


def _zones(sit: SituationModel, ids) -> List[Zone]:
    zones = {a.id: a.zone for a in sit.actors}
    return [zones.get(i, Zone.ABSENT) for i in ids]


def _boarding_directive(state: BoardingState) -> TacticalDirective:
    phase = state.phase
    if phase == BoardingPhase.ALIGN_TO_STOP:
        return TacticalDirective(
            Maneuver.ALIGN_TO_STOP, target_stop=state.stop, speed_limit_mps=ALIGN_SPEED_MPS, stop_node=state.stop.node
        )
    cmd = {
        BoardingPhase.PLATFORM_DEPLOY: PlatformCmd.DEPLOY,
        BoardingPhase.PLATFORM_LIFT: PlatformCmd.LIFT,
        BoardingPhase.PLATFORM_STOW: PlatformCmd.STOW,
    }.get(phase, PlatformCmd.NONE)
    doors_open = phase not in (BoardingPhase.DOOR_CLOSING, BoardingPhase.READY, BoardingPhase.FAILED)
    return TacticalDirective(
        Maneuver.HOLD,
        target_stop=state.stop,
        door_schedule=state.door_schedule if doors_open else None,
        platform_cmd=cmd,
        stop_node=state.stop.node,
    )


def step_boarding(
    state: BoardingState,
    sit: SituationModel,
    actuator_status: Optional[PerformanceReport] = None,
    now: Optional[int] = None,
) -> Tuple[BoardingState, TacticalDirective]:
    """Advance the boarding/deboarding sequence by at most one guarded transition.

    Platform phases are skipped when nobody needs the platform. A person in
    the doorway while the doors close sends the sequence back to DOOR_OPENING.
    """
    now = sit.tick if now is None else now
    if not state.active:
        return state, _boarding_directive(state)
    snap = sit.self_representation
    phase = state.phase
    stationary = snap.speed <= STATIONARY_SPEED_MPS

    if phase != BoardingPhase.ALIGN_TO_STOP and now - state.phase_since >= GUARD_TIMEOUT_MS:
        state = _goto(state, BoardingPhase.FAILED, now, failure="GUARD_TIMEOUT")
        return state, _boarding_directive(state)

    if phase == BoardingPhase.ALIGN_TO_STOP:
        if _stationary_at(sit, state.stop):
            sched = schedule_door(sit, sit.occupancy(state.stop.lateral_slot), now, state.unlock_lead_ms)
            if isinstance(sched, Deferred):
                state = replace(state, deferred=True)
            else:
                state = _goto(state, BoardingPhase.DOOR_OPENING, now, door_schedule=sched, deferred=False)
        elif now - state.phase_since >= GUARD_TIMEOUT_MS:
            state = _goto(state, BoardingPhase.FAILED, now, failure="GUARD_TIMEOUT")

    elif phase == BoardingPhase.DOOR_OPENING:
        if snap.door == DoorState.OPEN and stationary:
            if state.resume_closing:
                if Zone.DOORWAY not in _zones(sit, [a.id for a in sit.actors]):
                    state = _goto(state, BoardingPhase.DOOR_CLOSING, now, resume_closing=False)
            elif state.uses_platform:
                state = _goto(state, BoardingPhase.PLATFORM_DEPLOY, now)
            else:
                state = _goto(state, BoardingPhase.PASSENGER_SECURING, now)

    elif phase == BoardingPhase.PLATFORM_DEPLOY:
        if snap.platform == PlatformState.DEPLOYED and all(
            z == Zone.ON_PLATFORM for z in _zones(sit, state.platform_users)
        ):
            state = _goto(state, BoardingPhase.PLATFORM_LIFT, now)

    elif phase == BoardingPhase.PLATFORM_LIFT:
        if snap.platform == PlatformState.LIFTED:
            state = _goto(state, BoardingPhase.PASSENGER_SECURING, now)

    elif phase == BoardingPhase.PASSENGER_SECURING:
        target = {Zone.CABIN_SEATED} if state.direction == Direction.BOARD else OUTSIDE_ZONES
        if all(z in target for z in _zones(sit, state.passengers)):
            nxt = BoardingPhase.PLATFORM_STOW if state.uses_platform else BoardingPhase.DOOR_CLOSING
            state = _goto(state, nxt, now)

    elif phase == BoardingPhase.PLATFORM_STOW:
        if snap.platform == PlatformState.STOWED:
            state = _goto(state, BoardingPhase.DOOR_CLOSING, now)

    elif phase == BoardingPhase.DOOR_CLOSING:
        if Zone.DOORWAY in _zones(sit, [a.id for a in sit.actors]):
            state = _goto(
                state, BoardingPhase.DOOR_OPENING, now, resume_closing=True, door_schedule=DoorSchedule(now, now)
            )
        elif snap.door == DoorState.CLOSED and snap.lock == LockState.LOCKED:
            state = _goto(state, BoardingPhase.READY, now)

    directive = _boarding_directive(state)
    if directive.platform_cmd == PlatformCmd.STOW and Zone.ON_PLATFORM in _zones(sit, [a.id for a in sit.actors]):
        directive = replace(directive, platform_cmd=PlatformCmd.NONE)
    return state, directive


# ---------------------------------------------------------------------------
# Behaviour


def plan_behavior(
    plan: StrategyPlan,
    sit: SituationModel,
    boarding: Optional[BoardingState],
    graph: RoadGraph,
    profiles: Sequence[PassengerProfile] = (),
    target_stop: Optional[StopPoint] = None,
) -> TacticalDirective:
    """Directive for the current tick outside of (or around) an active boarding task."""
    if boarding is not None and boarding.active:
        return _boarding_directive(boarding)
    if plan.action == Action.STOP_IMMEDIATELY:
        return TacticalDirective(Maneuver.PULL_OVER, speed_limit_mps=0.0)

    snap = sit.self_representation
    pose = snap.pose
    prog = route_progress(graph, pose, plan.route)
    allowance = BOARDING_ALLOWANCE_S if any(p.needs_platform for p in profiles if p.id in plan.manifest) else 0.0
    if prog is None:
        return TacticalDirective(Maneuver.HOLD, eta_s=None)
    eta = prog.remaining_s + allowance
    end = plan.route[-1]
    at_end = pose.node == end
    if at_end and pose.speed == 0.0 and (target_stop is None or pose.slot == target_stop.lateral_slot):
        return TacticalDirective(Maneuver.HOLD, target_stop=target_stop, stop_node=end, eta_s=eta)
    if snap.door != DoorState.CLOSED or snap.lock != LockState.LOCKED:
        if pose.speed == 0.0:
            return TacticalDirective(Maneuver.HOLD, stop_node=pose.node, eta_s=eta)
    if prog.remaining_m <= ALIGN_RADIUS_M and target_stop is not None:
        return TacticalDirective(
            Maneuver.ALIGN_TO_STOP,
            target_stop=target_stop,
            speed_limit_mps=ALIGN_SPEED_MPS if at_end else NOMINAL_SPEED_MPS,
            route=prog.ahead if not prog.uturn else plan.route,
            stop_node=end,
            eta_s=eta,
        )
    return TacticalDirective(
        Maneuver.FOLLOW_ROUTE,
        target_stop=target_stop,
        speed_limit_mps=NOMINAL_SPEED_MPS,
        route=prog.ahead if not prog.uturn else plan.route,
        stop_node=end,
        eta_s=eta,
    )


# ---------------------------------------------------------------------------
# Reporting


@dataclass(frozen=True)
class TacticalIssues:
    door_deferred: bool = False
    no_suitable_stop: bool = False
    guard_timeout: bool = False
    operational: Optional[PerformanceReport] = None


def report_performance(issues: TacticalIssues) -> PerformanceReport:
    degraded, failed = [], []
    if issues.door_deferred:
        degraded.append("DOOR_BLOCKED_BY_TRAFFIC")
    if issues.no_suitable_stop:
        failed.append("NO_SUITABLE_STOP")
    if issues.guard_timeout:
        failed.append("GUARD_TIMEOUT")
    op = issues.operational
    if op is not None and op.status != ReportStatus.NOMINAL:
        (failed if op.status == ReportStatus.FAILED else degraded).extend(op.reasons)
    reasons = tuple(sorted(set(degraded + failed)))
    if failed:
        return PerformanceReport("TACTICAL", ReportStatus.FAILED, reasons)
    if degraded:
        return PerformanceReport("TACTICAL", ReportStatus.DEGRADED, reasons)
    return PerformanceReport("TACTICAL")


# ---------------------------------------------------------------------------
# Stateful wrapper used by the simulation loop


@dataclass(frozen=True)
class TacticalOutput:
    directive: TacticalDirective
    report: PerformanceReport
    infos: Tuple[InfoOutput, ...] = ()
    transitions: Tuple[Tuple[str, str, str], ...] = ()  # (task, from, to)


@dataclass
class TacticalController:
    """Owns the boarding task and the mission phase between strategic plans.

    Phases: START (passengers may still need to board), EN_ROUTE, BOARDING,
    DEBOARDING, DONE (deboarded at the mission goal) and ARRIVED (reached a
    diversion or return goal).
    """

    graph: RoadGraph
    profiles: Dict[str, PassengerProfile]
    unlock_lead_ms: int = 0
    phase: str = "START"
    boarding: Optional[BoardingState] = None
    pull_over: bool = False
    hold_request: Optional[Dict[str, object]] = None
    deferred_slots: set = field(default_factory=set)

    def request_stop(self, duration_ms: int) -> None:
        self.hold_request = {"node": None, "until": None, "duration": duration_ms}

    def emergency_stop(self) -> None:
        self.pull_over = True

    def _profiles(self, ids) -> List[PassengerProfile]:
        return [self.profiles[i] for i in ids if i in self.profiles]

    def _start(self, direction: Direction, stop: StopPoint, ids, tick: int) -> InfoOutput:
        self.boarding = start_boarding(direction, stop, ids, self._profiles(ids), tick, self.unlock_lead_ms)
        self.phase = "BOARDING" if direction == Direction.BOARD else "DEBOARDING"
        return InfoOutput(tick, "TACTICAL", "ONBOARD", direction.value, tuple(sorted(ids)))

    def step(
        self, plan: StrategyPlan, sit: SituationModel, op_report: Optional[PerformanceReport], tick: int
    ) -> TacticalOutput:
        infos: List[InfoOutput] = []
        moves: List[Tuple[str, str, str]] = []
        deferred = no_stop = timeout = False
        pose = sit.self_representation.pose
        zones = {a.id: a.zone for a in sit.actors}
        directive: Optional[TacticalDirective] = None
        door_fault = op_report is not None and any(
            r in ("ACTUATOR_FAULT:DOOR", "ACTUATOR_FAULT:LOCK") for r in op_report.reasons
        )

        if self.phase == "START":
            boarders = [p for p in plan.manifest if zones.get(p, Zone.ABSENT) == Zone.OUTSIDE_NEAR]
            self.phase = "EN_ROUTE"
            if boarders and pose.node is not None and plan.action != Action.STOP_IMMEDIATELY:
                try:
                    stop = select_stop(pose.node, self.graph.stops_at(pose.node), self._profiles(boarders))
                    infos.append(self._start(Direction.BOARD, stop, boarders, tick))
                except NoSuitableStopError:
                    no_stop = True

        if self.boarding is not None and self.boarding.active:
            before = self.boarding
            state, d = step_boarding(before, sit, op_report, tick)
            if state.deferred:
                deferred = True
                exclude = frozenset(self.deferred_slots | {state.stop.lateral_slot})
                try:
                    alt = select_stop(
                        state.stop.node, self.graph.stops_at(state.stop.node), self._profiles(state.passengers), exclude
                    )
                    self.deferred_slots.add(state.stop.lateral_slot)
                    moves.append(("STOP", state.stop.lateral_slot, alt.lateral_slot))
                    state = replace(state, stop=alt, deferred=False, phase_since=tick)
                    d = _boarding_directive(state)
                except NoSuitableStopError:
                    pass
            if state.phase != before.phase:
                moves.append((state.direction.value, before.phase.value, state.phase.value))
            timeout = state.phase == BoardingPhase.FAILED
            self.boarding = state
            if state.phase == BoardingPhase.READY:
                self.phase = "EN_ROUTE" if state.direction == Direction.BOARD else "DONE"
                self.boarding = None
            else:
                directive = d

        if directive is None:
            if self.phase in ("DONE", "ARRIVED"):
                directive = HOLD
            elif self.pull_over or plan.action == Action.STOP_IMMEDIATELY:
                directive = TacticalDirective(Maneuver.PULL_OVER)
            else:
                directive, no_stop_here, arrived = self._en_route(plan, sit, door_fault, tick)
                no_stop = no_stop or no_stop_here
                if arrived is not None:
                    infos.extend(arrived)

        report = report_performance(TacticalIssues(deferred, no_stop, timeout, op_report))
        return TacticalOutput(directive, report, tuple(infos), tuple(moves))

    def _en_route(self, plan: StrategyPlan, sit: SituationModel, door_fault: bool, tick: int):
        pose = sit.self_representation.pose
        goal = plan.goal_node
        onboard = [p for p in sit.onboard() if p in plan.manifest]
        target = None
        no_stop = False
        try:
            target = select_stop(goal, self.graph.stops_at(goal), self._profiles(onboard or plan.manifest))
        except NoSuitableStopError:
            no_stop = True
        manifest_profiles = self._profiles(plan.manifest)
        d = plan_behavior(plan, sit, None, self.graph, manifest_profiles, target)

        if self.hold_request is not None:
            req = self.hold_request
            here = pose.node if pose.node is not None else pose.edge_to
            if req["node"] is None:
                req["node"] = here
            if pose.node == req["node"] and pose.speed == 0.0:
                if req["until"] is None:
                    req["until"] = tick + int(req["duration"])
                if tick < req["until"]:
                    return replace(d, maneuver=Maneuver.HOLD, stop_node=pose.node), no_stop, None
                self.hold_request = None
            elif req["node"] != goal:
                d = replace(d, maneuver=Maneuver.FOLLOW_ROUTE, target_stop=None, stop_node=req["node"])

        if door_fault and pose.speed == 0.0:
            # Never leave with doors whose state cannot be verified.
            return replace(d, maneuver=Maneuver.HOLD, route=(), stop_node=pose.node), no_stop, None

        aligned = target is None or pose.slot == target.lateral_slot
        if pose.node == goal and pose.speed == 0.0 and aligned and not no_stop:
            if plan.action == Action.CONTINUE and goal == plan.mission_goal:
                leaving = [p for p in onboard]
                if leaving:
                    info = self._start(Direction.DEBOARD, target, leaving, tick)
                    return _boarding_directive(self.boarding), no_stop, [info]
                self.phase = "DONE"
                return HOLD, no_stop, None
            if plan.action in (Action.DIVERT, Action.RETURN):
                self.phase = "ARRIVED"
                return HOLD, no_stop, None
        return d, no_stop, None
