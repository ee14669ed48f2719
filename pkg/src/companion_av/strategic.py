"""Top level of mission execution: mission intake, route planning and
harm-minimising selection among the four courses of action."""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, replace
from enum import Enum
from typing import Collection, FrozenSet, List, Optional, Sequence, Tuple, Union

from .common import NOMINAL_SPEED_MPS, FeatureKind, HazardKind, HealthTrend, ReportStatus
from .errors import DurationExceededError, NoRouteError, PlanningError
from .odd import Assistant, OddSpec, PassengerProfile, Violation, area_exclusions, check_mission
from .representation import GoalProjection, Hazard, WorldModel, WorldProjection, predict_world
from .roadmap import RoadGraph, edge_key
from .signals import VehiclePose

# Options are projected this far ahead; hazard resolution beyond it counts as never.
PROJECTION_HORIZON_S = 4 * 3600.0


class Urgency(str, Enum):
    LEISURE = "LEISURE"
    NORMAL = "NORMAL"
    URGENT = "URGENT"


class Action(str, Enum):
    CONTINUE = "CONTINUE"
    DIVERT = "DIVERT"
    RETURN = "RETURN"
    STOP_IMMEDIATELY = "STOP_IMMEDIATELY"


ACTION_ORDER = {a: i for i, a in enumerate(Action)}


class AlertRecipient(str, Enum):
    CONTROL_ROOM = "CONTROL_ROOM"
    RESCUE = "RESCUE"


@dataclass(frozen=True)
class MissionObjective:
    goal_node: str
    manifest: Tuple[str, ...]
    urgency: Urgency = Urgency.NORMAL
    requester: Optional[str] = None
    deadline: Optional[float] = None

    def __post_init__(self):
        if not self.manifest:
            raise ValueError("mission manifest must not be empty")


@dataclass(frozen=True)
class Route:
    nodes: Tuple[str, ...]
    cost_s: float


@dataclass(frozen=True)
class RouteConstraints:
    excluded_nodes: FrozenSet[str] = frozenset()
    excluded_edges: FrozenSet[Tuple[str, str]] = frozenset()
    max_duration: Optional[float] = None

    def __post_init__(self):
        object.__setattr__(self, "excluded_edges", frozenset(edge_key(a, b) for a, b in self.excluded_edges))


@dataclass(frozen=True, order=True)
class HarmScore:
    """Lexicographically ordered: severity, then time to resolution, then delay."""

    severity: int
    time_to_resolution: float
    mission_delay: float


@dataclass(frozen=True)
class AlertRequest:
    recipient: AlertRecipient
    hazard: Hazard


@dataclass(frozen=True)
class ScoredOption:
    action: Action
    goal: Optional[str]
    score: HarmScore


@dataclass(frozen=True)
class StrategyPlan:
    action: Action
    goal_node: str
    route: Tuple[str, ...]
    alert: Optional[AlertRequest] = None
    rationale: Tuple[ScoredOption, ...] = ()
    mission_goal: str = ""
    departure_node: str = ""
    manifest: Tuple[str, ...] = ()
    constraints: RouteConstraints = RouteConstraints()
    # Set when a person forced the stop; the strategic level will not lift it.
    override: bool = False

    def __post_init__(self):
        if self.action == Action.STOP_IMMEDIATELY:
            if self.route:
                raise ValueError("STOP_IMMEDIATELY plans carry no route")
        elif not self.route or self.route[-1] != self.goal_node:
            raise ValueError("route must end at the goal node")


@dataclass(frozen=True)
class Rejection:
    violations: Tuple[Violation, ...]


@dataclass(frozen=True)
class PerformanceReport:
    level: str
    status: ReportStatus = ReportStatus.NOMINAL
    reasons: Tuple[str, ...] = ()

    def __post_init__(self):
        if (self.status == ReportStatus.NOMINAL) != (not self.reasons):
            raise ValueError("NOMINAL reports carry no reasons; others need at least one")


NOMINAL_TACTICAL = PerformanceReport("TACTICAL")


# ---------------------------------------------------------------------------
# Route planning


def plan_route(
    graph: RoadGraph, start: str, goal: str, constraints: Optional[RouteConstraints] = None
) -> Route:
    """Minimum travel-time path avoiding the exclusions.

    Equal-cost paths are ranked by their node-id sequence, smallest first. The
    start node is exempt from node exclusions (the vehicle is already there).
    """
    if start not in graph.nodes or goal not in graph.nodes:
        raise ValueError(f"unknown node in {start!r} -> {goal!r}")
    c = constraints or RouteConstraints()
    if goal in c.excluded_nodes and goal != start:
        raise NoRouteError(f"goal {goal} is excluded")
    if start == goal:
        return Route((start,), 0.0)
    done = set()
    heap: List[Tuple[float, Tuple[str, ...]]] = [(0.0, (start,))]
    while heap:
        cost, path = heapq.heappop(heap)
        node = path[-1]
        if node in done:
            continue
        done.add(node)
        if node == goal:
            if c.max_duration is not None and cost > c.max_duration:
                raise DurationExceededError(
                    f"best route {'-'.join(path)} takes {cost:g} s > {c.max_duration:g} s", cost
                )
            return Route(path, cost)
        for nxt, t in graph.neighbors(node):
            if nxt in done or nxt in c.excluded_nodes or edge_key(node, nxt) in c.excluded_edges:
                continue
            heapq.heappush(heap, (cost + t, path + (nxt,)))
    raise NoRouteError(f"no route {start} -> {goal}")


def plan_from_pose(
    graph: RoadGraph, pose: VehiclePose, goal: str, constraints: Optional[RouteConstraints] = None
) -> Route:
    """Route from wherever the vehicle is; mid-edge it may continue or turn back.

    The returned cost includes the partial edge. The route starts at the node
    the vehicle is heading to, or at the edge origin when turning back is cheaper.
    """
    if pose.node is not None:
        return plan_route(graph, pose.node, goal, constraints)
    c = constraints or RouteConstraints()
    options = []
    for node, partial_m in ((pose.edge_to, pose.remaining_on_edge_m), (pose.edge_from, pose.offset_m)):
        try:
            r = plan_route(graph, node, goal, replace(c, max_duration=None))
        except PlanningError:
            continue
        options.append((r.cost_s + partial_m / NOMINAL_SPEED_MPS, len(options), r.nodes))
    if not options:
        raise NoRouteError(f"no route from edge {pose.edge_from}-{pose.edge_to} to {goal}")
    cost, _, nodes = min(options)
    if c.max_duration is not None and cost > c.max_duration:
        raise DurationExceededError(f"best route takes {cost:g} s > {c.max_duration:g} s", cost)
    return Route(nodes, cost)


# ---------------------------------------------------------------------------
# Mission intake


def accept_mission(
    obj: MissionObjective,
    profiles: Sequence[PassengerProfile],
    odd: OddSpec,
    w: WorldModel,
    env_flags: Collection[str] = (),
    assistants: Sequence[Assistant] = (),
) -> Union[StrategyPlan, Rejection]:
    """Plan the mission route within the passengers' allowed area and gate it on the ODD."""
    if obj.goal_node not in w.map.nodes:
        raise ValueError(f"goal {obj.goal_node!r} is not on the map")
    manifest = [p for p in profiles if p.id in set(obj.manifest)]
    constraints = RouteConstraints(
        excluded_nodes=area_exclusions(odd, manifest, w.map), excluded_edges=frozenset(w.blocked_edges)
    )
    route = plan_from_pose(w.map, w.position, obj.goal_node, constraints)
    verdict = check_mission(odd, obj, profiles, route, w.map, env_flags, assistants)
    if not verdict.ok:
        return Rejection(verdict.violations)
    here = route.nodes[0]
    return StrategyPlan(
        action=Action.CONTINUE,
        goal_node=obj.goal_node,
        route=route.nodes,
        mission_goal=obj.goal_node,
        departure_node=here,
        manifest=tuple(obj.manifest),
        constraints=constraints,
    )


# ---------------------------------------------------------------------------
# Option scoring


def _resolves(h: Hazard, entry: Optional[GoalProjection]) -> bool:
    if entry is None:
        return False
    if h.kind == HazardKind.MEDICAL_EMERGENCY:
        return entry.care_facility
    if h.kind == HazardKind.EXPOSURE_RISK:
        return entry.has_stop
    if h.kind == HazardKind.STRANDING_RISK:
        return entry.platform_ok if h.subject in entry.platform_users else entry.has_stop
    if h.kind == HazardKind.UNKNOWN_AREA_RISK:
        return h.subject in entry.known_to
    return False  # TRAPPED_RISK needs outside intervention


def score_option(
    candidate: Tuple[Action, Optional[str]], proj: WorldProjection, hazards: Sequence[Hazard]
) -> HarmScore:
    """Harm of one course of action under the projection.

    ``candidate`` is ``(action, goal)``; STOP_IMMEDIATELY takes no goal and is
    evaluated where the vehicle stands.
    """
    action, goal = candidate
    if action == Action.STOP_IMMEDIATELY:
        entry = proj.get(proj.current_node) if proj.current_node else None
        if entry is not None:
            entry = replace(entry, travel_time=0.0, range_feasible=True)
        travel = 0.0
    else:
        entry = proj.get(goal)
        if entry is None:
            sev = max([h.severity for h in hazards] + [1])
            return HarmScore(sev, math.inf, math.inf)
        travel = entry.travel_time

    hazards = sorted(hazards, key=lambda h: (-h.severity, h.subject, h.kind.value))
    residual = [h.severity for h in hazards if not _resolves(h, entry)]
    severity = max(residual, default=0)
    if entry is not None and action != Action.STOP_IMMEDIATELY:
        if not entry.range_feasible:
            severity = max(severity, 2)
        if any(t == HealthTrend.CRITICAL for _, t in entry.arrival_health) and not any(
            h.kind == HazardKind.MEDICAL_EMERGENCY for h in hazards
        ):
            severity = max(severity, 2)

    if not hazards:
        ttr = 0.0 if (entry is None or entry.range_feasible or action == Action.STOP_IMMEDIATELY) else math.inf
    elif _resolves(hazards[0], entry) and (entry.range_feasible or travel == 0):
        ttr = travel
    else:
        ttr = math.inf

    if action in (Action.CONTINUE, Action.STOP_IMMEDIATELY):
        delay = 0.0
    else:
        base = proj.get(proj.mission_goal) if proj.mission_goal else None
        if base is None or entry.onward_s is None:
            delay = math.inf
        else:
            delay = max(0.0, travel + entry.onward_s - base.travel_time)
    return HarmScore(severity, ttr, delay)


def perf_hazards(perf: PerformanceReport, w: WorldModel) -> List[Hazard]:
    """Hazards implied by a subordinate report (no usable stop at the destination)."""
    if "NO_SUITABLE_STOP" not in perf.reasons:
        return []
    return [
        Hazard(HazardKind.STRANDING_RISK, pid, 1, (FeatureKind.VEHICLE_POSE,))
        for pid, p in w.passenger_projection
        if p.needs_platform
    ]


def _route_still_valid(plan: StrategyPlan, w: WorldModel) -> bool:
    if plan.action == Action.STOP_IMMEDIATELY:
        return True
    blocked = set(w.blocked_edges) | set(plan.constraints.excluded_edges)
    return not any(edge_key(a, b) in blocked for a, b in zip(plan.route, plan.route[1:]))


def _alert_for(hazards: Sequence[Hazard]) -> Optional[AlertRequest]:
    if not hazards:
        return None
    dominant = sorted(hazards, key=lambda h: (-h.severity, h.subject, h.kind.value))[0]
    if dominant.severity < 2:
        return None
    recipient = AlertRecipient.RESCUE if dominant.kind == HazardKind.MEDICAL_EMERGENCY else AlertRecipient.CONTROL_ROOM
    return AlertRequest(recipient, dominant)


def stop_plan(current: StrategyPlan, w: WorldModel, hazards: Sequence[Hazard] = (), override: bool = False) -> StrategyPlan:
    return replace(
        current,
        action=Action.STOP_IMMEDIATELY,
        goal_node=w.position.heading_node,
        route=(),
        alert=_alert_for(hazards),
        rationale=(),
        override=override or current.override,
    )


def replan(
    current: StrategyPlan,
    w: WorldModel,
    hazards: Sequence[Hazard],
    perf: PerformanceReport = NOMINAL_TACTICAL,
    stop_requested: bool = False,
) -> StrategyPlan:
    """Re-evaluate the four courses of action and keep the least harmful.

    With no hazards, a nominal subordinate and a still-valid route the current
    plan is returned unchanged. A person-requested stop overrides scoring.
    """
    hazards = list(hazards)
    if stop_requested or (current.action == Action.STOP_IMMEDIATELY and current.override):
        return stop_plan(current, w, hazards, override=True)
    if not hazards and perf.status == ReportStatus.NOMINAL and _route_still_valid(current, w):
        return current if current.alert is None else replace(current, alert=None)

    considered = hazards + perf_hazards(perf, w)
    constraints = replace(current.constraints, excluded_edges=current.constraints.excluded_edges | frozenset(w.blocked_edges))
    proj = predict_world(
        w,
        PROJECTION_HORIZON_S,
        extra_goals=[current.mission_goal, current.departure_node],
        constraints=constraints,
        mission_goal=current.mission_goal,
    )
    platform_users = {pid for pid, p in w.passenger_projection if p.needs_platform}

    candidates: List[Tuple[Action, Optional[str]]] = [(Action.CONTINUE, current.mission_goal)]
    diverts = []
    for goal, entry in proj.entries:
        if goal in (current.mission_goal, current.departure_node):
            continue
        if platform_users and not entry.platform_ok:
            continue
        diverts.append((score_option((Action.DIVERT, goal), proj, considered), goal))
    if diverts:
        candidates.append((Action.DIVERT, min(diverts)[1]))
    candidates.append((Action.RETURN, current.departure_node))
    candidates.append((Action.STOP_IMMEDIATELY, None))

    scored = [ScoredOption(a, g, score_option((a, g), proj, considered)) for a, g in candidates]
    best = min(scored, key=lambda o: (o.score, ACTION_ORDER[o.action]))
    alert = _alert_for(hazards)
    if best.action == Action.STOP_IMMEDIATELY:
        return replace(stop_plan(current, w, hazards), alert=alert, rationale=tuple(scored))
    entry = proj.get(best.goal)
    return replace(
        current,
        action=best.action,
        goal_node=best.goal,
        route=entry.route,
        alert=alert,
        rationale=tuple(scored),
        override=False,
    )
