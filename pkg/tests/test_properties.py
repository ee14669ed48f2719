"""Property-based checks of the module invariants."""

from dataclasses import replace

import numpy as np
from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st

from companion_av.common import Capability, FeatureKind, HazardKind, Health, LockState, ReportStatus, Subsystem, Zone
from companion_av.errors import NoRouteError
from companion_av.odd import AreaMode, OddSpec, check_mission
from companion_av.operational import reflex_check
from companion_av.perception import extract_features
from companion_av.plant import DEFAULT_SENSORS, PassengerTruth, initial_plant, make_disturbance, step_plant
from companion_av.representation import Hazard, assess_hazards, initial_world, update_world_model
from companion_av.roadmap import NodeInfo, RoadGraph
from companion_av.signals import ActuatorCommand, Feature, FeatureSet, Reading, SensorFrame, SubsystemFault
from companion_av.strategic import (
    Action,
    MissionObjective,
    PerformanceReport,
    Route,
    RouteConstraints,
    StrategyPlan,
    plan_route,
    replan,
)
from companion_av.tactical import TacticalIssues, report_performance

from conftest import G0_EDGES, G0_NODES, G0_STOPS, adult, at, on_edge, situation
from oracles import brute_force_route

NAMES = [chr(ord("a") + i) for i in range(10)]


@st.composite
def graphs(draw):
    n = draw(st.integers(2, 10))
    nodes = NAMES[:n]
    pairs = [(a, b) for i, a in enumerate(nodes) for b in nodes[i + 1:]]
    chosen = draw(st.lists(st.sampled_from(pairs), min_size=1, max_size=min(20, len(pairs)), unique=True))
    edges = [(a, b, draw(st.integers(1, 50))) for a, b in chosen]
    start, goal = draw(st.sampled_from(nodes)), draw(st.sampled_from(nodes))
    excluded = draw(st.sets(st.sampled_from(nodes), max_size=3)) - {start, goal}
    return nodes, edges, start, goal, excluded


def _plan(nodes, edges, start, goal, excluded):
    try:
        r = plan_route(RoadGraph.build(nodes, edges), start, goal, RouteConstraints(excluded_nodes=frozenset(excluded)))
    except NoRouteError:
        return None
    return r.cost_s, list(r.nodes)


@settings(max_examples=200, deadline=None)
@given(graphs())
def test_route_matches_brute_force(g):
    nodes, edges, start, goal, excluded = g
    assert _plan(*g) == brute_force_route(nodes, edges, start, goal, excluded_nodes=excluded)


@settings(max_examples=100, deadline=None)
@given(graphs(), st.integers(2, 9))
def test_route_scaling_invariance(g, k):
    nodes, edges, start, goal, excluded = g
    base = _plan(*g)
    scaled = _plan(nodes, [(a, b, t * k) for a, b, t in edges], start, goal, excluded)
    if base is None:
        assert scaled is None
    else:
        assert scaled == (base[0] * k, base[1])


def _g0_scaled(k):
    nodes = [NodeInfo(n, x, y, care) for n, (x, y, care) in G0_NODES.items()]
    return RoadGraph.build(nodes, [(a, b, t * k) for a, b, t in G0_EDGES], G0_STOPS)


@settings(max_examples=15, deadline=None)
@given(st.sampled_from([0.5, 2.0, 3.0, 10.0]), st.sampled_from(["A", "B", "C"]))
def test_replan_action_is_scale_invariant(k, node):
    emergency = Hazard(HazardKind.MEDICAL_EMERGENCY, "p1", 3, (FeatureKind.HEART_RATE,))
    current = StrategyPlan(Action.CONTINUE, "C", (node, "C") if node != "C" else ("C",),
                           mission_goal="C", departure_node="A", manifest=("p1",))
    actions = []
    for g in (_g0_scaled(1), _g0_scaled(k)):
        sit = situation(at(node))
        a = replace(sit.actors[0], health=Health.EMERGENCY, health_evidence=(FeatureKind.HEART_RATE,))
        w = update_world_model(initial_world(g, at(node), [adult()]), replace(sit, actors=(a,)), 0)
        out = replan(current, w, [emergency])
        actions.append((out.action, out.goal_node))
    assert actions[0] == actions[1]


hazard_st = st.builds(
    Hazard,
    st.sampled_from(list(HazardKind)),
    st.sampled_from(["p1", "p2"]),
    st.integers(1, 3),
    st.just((FeatureKind.HEART_RATE,)),
)


@settings(max_examples=60, deadline=None)
@given(st.lists(hazard_st, max_size=3), st.sampled_from(["A", "B"]))
def test_replan_closed_world_and_alert_soundness(hazards, node):
    w = initial_world(RoadGraph.build([NodeInfo(n, x, y, c) for n, (x, y, c) in G0_NODES.items()], G0_EDGES, G0_STOPS),
                      at(node), [adult(), adult("p2")])
    current = StrategyPlan(Action.CONTINUE, "C", (node, "C") if node == "B" else ("A", "B", "C"),
                           mission_goal="C", departure_node="A", manifest=("p1", "p2"))
    out = replan(current, w, hazards)
    assert out.action in set(Action)
    assert (out.alert is not None) == any(h.severity >= 2 for h in hazards)


zone_st = st.sampled_from([Zone.CABIN_SEATED, Zone.CABIN_UNSECURED, Zone.OUTSIDE_NEAR, Zone.DOORWAY])


@settings(max_examples=60, deadline=None, suppress_health_check=[HealthCheck.function_scoped_fixture])
@given(st.floats(0, 3000), zone_st, st.floats(0, 10))
def test_world_update_is_idempotent(g0, offset, zone, speed):
    pose = on_edge("A", "B", offset, g0, speed=speed)
    sit = situation(pose, {"p1": zone})
    once = update_world_model(initial_world(g0, pose, [adult()]), sit, 0)
    assert update_world_model(once, sit, 0) == once


@settings(max_examples=100, deadline=None)
@given(
    st.dictionaries(st.sampled_from(["p1", "p2"]), zone_st, min_size=1),
    st.sampled_from(list(Health)),
    st.sampled_from(list(LockState)),
    st.sets(st.sampled_from(list(Subsystem))),
    st.sampled_from(list(Subsystem)),
    st.booleans(),
)
def test_adding_a_fault_never_removes_a_hazard(zones, health, lock, faults, extra, capable):
    sit = situation(at("C"), zones)
    actors = tuple(replace(a, health=health, health_evidence=(FeatureKind.HEART_RATE,)) for a in sit.actors)
    sit = replace(sit, actors=actors, self_representation=replace(sit.self_representation, lock=lock))
    caps = frozenset({Capability.CAN_OPERATE_MANUAL_RELEASE}) if capable else frozenset()
    profiles = [adult(pid, capabilities=caps) for pid in zones]
    before = assess_hazards(sit, [SubsystemFault(s, "STUCK") for s in faults], profiles)
    after = assess_hazards(sit, [SubsystemFault(s, "STUCK") for s in faults | {extra}], profiles)
    assert {(h.kind, h.subject) for h in before} <= {(h.kind, h.subject) for h in after}


command_st = st.one_of(
    st.builds(ActuatorCommand, st.just(Subsystem.DOOR), st.sampled_from(["OPEN", "CLOSE", "HOLD"])),
    st.builds(ActuatorCommand, st.just(Subsystem.PLATFORM), st.sampled_from(["DEPLOY", "LIFT", "STOW", "HOLD"])),
    st.builds(ActuatorCommand, st.just(Subsystem.DRIVETRAIN), st.floats(0, 2)),
    st.builds(ActuatorCommand, st.just(Subsystem.BRAKE), st.floats(0, 3)),
)


@given(st.lists(command_st, max_size=6),
       st.lists(st.sampled_from([Zone.CABIN_SEATED, Zone.CABIN_UNSECURED, Zone.OUTSIDE_NEAR, Zone.ABSENT]), max_size=3))
def test_reflex_is_identity_without_triggers(cmds, zones):
    fs = FeatureSet(0, tuple(
        [Feature(FeatureKind.PLATFORM_POSITION, "platform", ("STOWED", False), "platform_sensor")]
        + [Feature(FeatureKind.POSTURE, f"p{i}", (z.value, 0.0), "cabin_camera") for i, z in enumerate(zones)]
    ))
    assert reflex_check(cmds, fs) == cmds


reading_st = st.one_of(
    st.builds(Reading, st.just("hr_camera"), st.just(FeatureKind.HEART_RATE), st.sampled_from(["p1", "p2"]),
              st.integers(30, 200)),
    st.builds(Reading, st.just("cabin_camera"), st.just(FeatureKind.POSTURE), st.sampled_from(["p1", "p2"]),
              st.tuples(st.sampled_from([z.value for z in Zone]), st.floats(0, 50))),
    st.builds(Reading, st.just("cabin_thermometer"), st.just(FeatureKind.CABIN_TEMP), st.just("cabin"),
              st.floats(-10, 45)),
    st.builds(Reading, st.just("ambient_thermometer"), st.just(FeatureKind.AMBIENT_TEMP), st.just("ambient"),
              st.floats(-30, 45)),
    st.builds(Reading, st.just("door_encoder"), st.just(FeatureKind.DOOR_POSITION), st.just("door"),
              st.sampled_from(["OPEN", "CLOSED"])),
)


@given(st.lists(reading_st, max_size=12))
def test_features_never_fewer_than_readings(readings):
    fs = extract_features(SensorFrame(0, tuple(readings)), DEFAULT_SENSORS)
    assert len(fs.features) >= len(readings)
    assert sum(not f.derived for f in fs.features) == len(readings)


spec_st = st.builds(
    OddSpec,
    min_solo_age=st.integers(1, 18),
    allowed_nodes_mode=st.sampled_from([AreaMode.ALL, AreaMode.KNOWN_TO_ALL_PASSENGERS]),
    excluded_nodes=st.frozensets(st.sampled_from(list(G0_NODES)), max_size=2),
    max_trip_duration=st.integers(100, 2000),
    max_trip_distance=st.integers(1000, 20_000),
    env_conditions=st.frozensets(st.sampled_from(["CLEAR", "RAIN", "FOG", "STORM"])),
)


def _tighten(spec, which):
    if which == "age":
        return replace(spec, min_solo_age=spec.min_solo_age + 3)
    if which == "duration":
        return replace(spec, max_trip_duration=spec.max_trip_duration / 2)
    if which == "distance":
        return replace(spec, max_trip_distance=spec.max_trip_distance / 2)
    if which == "env":
        return replace(spec, env_conditions=frozenset(sorted(spec.env_conditions)[1:]))
    if which == "excluded":
        return replace(spec, excluded_nodes=spec.excluded_nodes | {"B"})
    return replace(spec, allowed_nodes_mode=AreaMode.KNOWN_TO_ALL_PASSENGERS)


@settings(max_examples=150, suppress_health_check=[HealthCheck.function_scoped_fixture])
@given(spec_st, st.sampled_from(["age", "duration", "distance", "env", "excluded", "area"]),
       st.integers(5, 70), st.sampled_from([("A", "B", "C"), ("A", "D", "C")]),
       st.frozensets(st.sampled_from(["CLEAR", "RAIN", "FOG", "STORM"])))
def test_tightening_never_removes_violations(g0, spec, which, age, nodes, env):
    p = adult(age=age, known_nodes=frozenset({"A", "B", "C"}))
    route = Route(nodes, 600.0 if "B" in nodes else 1200.0)
    obj = MissionObjective("C", ("p1",))
    loose = check_mission(spec, obj, [p], route, g0, env)
    tight = check_mission(_tighten(spec, which), obj, [p], route, g0, env)
    assert {(v.dimension, v.subject) for v in loose.violations} <= {(v.dimension, v.subject) for v in tight.violations}


@given(st.booleans(), st.booleans(), st.booleans(),
       st.one_of(st.none(), st.sampled_from([
           PerformanceReport("OPERATIONAL"),
           PerformanceReport("OPERATIONAL", ReportStatus.FAILED, ("ACTUATOR_FAULT:DOOR",)),
       ])))
def test_report_status_iff_reasons(deferred, no_stop, guard, op):
    r = report_performance(TacticalIssues(deferred, no_stop, guard, op))
    assert (r.status == ReportStatus.NOMINAL) == (r.reasons == ())


plant_cmd_st = st.lists(
    st.tuples(st.floats(0, 2), st.floats(0, 3), st.sampled_from(["OPEN", "CLOSE", "HOLD"]),
              st.sampled_from(["LOCKED", "UNLOCKED"]), st.sampled_from(["DEPLOY", "LIFT", "STOW", "HOLD"]),
              st.sampled_from(["B", "D", "A"])),
    min_size=1, max_size=60,
)


@settings(max_examples=60, deadline=None, suppress_health_check=[HealthCheck.function_scoped_fixture])
@given(plant_cmd_st, st.booleans(), st.integers(0, 2**16))
def test_plant_invariants_under_arbitrary_commands(g0, script, door_fault, seed):
    people = [PassengerTruth("p1", Zone.CABIN_SEATED), PassengerTruth("p2", Zone.OUTSIDE_NEAR, 2.0, intent="BOARD")]
    state = initial_plant("A", "A1", people)
    active = [make_disturbance("VEH_DOOR_ACTUATOR_FAULT", 0)] if door_fault else []
    rng = np.random.default_rng(seed)
    for drive, brake, door, lock, platform, steer in script:
        prev = state
        cmds = [ActuatorCommand(Subsystem.DRIVETRAIN, drive), ActuatorCommand(Subsystem.BRAKE, brake),
                ActuatorCommand(Subsystem.STEERING, steer), ActuatorCommand(Subsystem.DOOR, door),
                ActuatorCommand(Subsystem.LOCK, lock), ActuatorCommand(Subsystem.PLATFORM, platform)]
        state, _, reports = step_plant(state, cmds, active, state.tick + 100, g0, rng)
        v = state.vehicle
        assert len(state.passengers) == 2
        assert v.range_m <= prev.vehicle.range_m
        if v.door.value != "CLOSED":
            assert v.speed <= 0.5
        if v.platform.value in ("DEPLOYING", "LIFTING", "STOWING"):
            assert v.door.value == "OPEN"
        if door_fault:
            rep = {r.subsystem: r for r in reports}[Subsystem.DOOR]
            assert rep.achieved == prev.vehicle.setpoint(Subsystem.DOOR)
