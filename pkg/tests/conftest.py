import pytest

from companion_av.common import Capability, Zone
from companion_av.odd import PassengerProfile
from companion_av.representation import initial_situation, initial_world
from companion_av.roadmap import NodeInfo, RoadGraph, StopPoint
from companion_av.signals import VehiclePose

G0_NODES = {
    "A": (0, 0, False),
    "B": (3000, 0, False),
    "C": (6000, 0, False),
    "D": (3000, -5200, False),
    "H": (3000, 1200, True),
}
G0_EDGES = [("A", "B", 300), ("B", "C", 300), ("A", "D", 600), ("D", "C", 600), ("B", "H", 120)]
G0_STOPS = [
    StopPoint("A", "A1", 1, 12),
    StopPoint("C", "C1", 2, 12),
    StopPoint("C", "C2", 8, 15),
    StopPoint("H", "H1", 1, 10),
]


def make_g0(stops=G0_STOPS) -> RoadGraph:
    nodes = [NodeInfo(n, x, y, care) for n, (x, y, care) in G0_NODES.items()]
    return RoadGraph.build(nodes, G0_EDGES, stops)


def adult(pid="p1", **kw) -> PassengerProfile:
    kw.setdefault("capabilities", frozenset({Capability.CAN_CLIMB_STEP, Capability.CAN_OPERATE_MANUAL_RELEASE}))
    kw.setdefault("known_nodes", frozenset(G0_NODES))
    return PassengerProfile(pid, kw.pop("age", 35), **kw)


def at(node, slot=None, speed=0.0, range_m=100_000.0) -> VehiclePose:
    return VehiclePose(node=node, slot=slot, speed=speed, range_m=range_m)


def on_edge(a, b, offset_m, graph=None, speed=10.0, range_m=100_000.0) -> VehiclePose:
    graph = graph or make_g0()
    return VehiclePose(None, a, b, offset_m, graph.length_m(a, b), speed, range_m=range_m)


def situation(pose, zones=None, entities=None, **kw):
    zones = zones if zones is not None else {"p1": Zone.CABIN_SEATED}
    ents = set(entities or ()) | set(zones) | {"vehicle", "door", "lock", "platform", "cabin", "ambient", "environment"}
    return initial_situation(pose, zones, ents, **kw)


@pytest.fixture
def g0():
    return make_g0()


@pytest.fixture
def world_at(g0):
    def build(pose, profiles=(), tick=0):
        return initial_world(g0, pose, list(profiles) or [adult()], tick)
    return build


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for n in sorted(RESULTS):
            terminalreporter.write_line(RESULTS[n])
