from dataclasses import replace

import pytest

from companion_av.common import Capability
from companion_av.odd import (
    DIMENSION_FIELDS,
    AreaMode,
    Assistant,
    Dimension,
    OddSpec,
    area_exclusions,
    check_mission,
    check_runtime,
    spec_field_names,
)
from companion_av.strategic import MissionObjective, Route

from conftest import adult, at, on_edge

OBJ = MissionObjective("C", ("p1",))
A_B_C = Route(("A", "B", "C"), 600.0)
A_D_C = Route(("A", "D", "C"), 1200.0)


class TestCheckMission:
    def test_adult_on_direct_route(self, g0):
        assert check_mission(OddSpec(), OBJ, [adult()], A_B_C, g0).ok

    def test_route_through_unknown_area(self, g0):
        p = adult(known_nodes=frozenset({"A", "B", "C"}))
        spec = OddSpec(allowed_nodes_mode=AreaMode.KNOWN_TO_ALL_PASSENGERS)
        v = check_mission(spec, OBJ, [p], A_D_C, g0)
        assert [(x.dimension, x.subject) for x in v.violations] == [(Dimension.UNKNOWN_AREA, "D")]

    def test_young_solo_child(self, g0):
        child = adult(age=9)
        v = check_mission(OddSpec(min_solo_age=10), OBJ, [child], A_B_C, g0)
        assert v.dimensions() == [Dimension.MIN_AGE]

    def test_child_with_adult_is_fine(self, g0):
        obj = MissionObjective("C", ("p1", "p2"))
        assert check_mission(OddSpec(min_solo_age=10), obj, [adult(age=9), adult("p2")], A_B_C, g0).ok

    def test_missing_pooled_capability(self, g0):
        spec = OddSpec(required_capabilities_solo=frozenset({Capability.CAN_OPERATE_HMI}))
        v = check_mission(spec, OBJ, [adult()], A_B_C, g0)
        assert [(x.dimension, x.subject) for x in v.violations] == [(Dimension.CAPABILITY, "CAN_OPERATE_HMI")]

    def test_long_route(self, g0):
        v = check_mission(OddSpec(max_trip_duration=900), OBJ, [adult()], A_D_C, g0)
        assert v.dimensions() == [Dimension.DURATION]

    def test_storm_at_dispatch(self, g0):
        v = check_mission(OddSpec(), OBJ, [adult()], A_B_C, g0, env_flags={"STORM"})
        assert v.dimensions() == [Dimension.ENV]

    def test_assistant_check_needs_graph(self):
        with pytest.raises(ValueError):
            check_mission(OddSpec(assistant_radius=100), OBJ, [adult()], A_B_C)


class TestCheckRuntime:
    def test_duration_overrun(self, world_at):
        v = check_runtime(OddSpec(), world_at(at("B")), 3700)
        assert v.dimensions() == [Dimension.DURATION]

    def test_storm(self, world_at):
        v = check_runtime(OddSpec(), world_at(at("B")), 10, env_flags={"STORM", "RAIN"})
        assert [(x.dimension, x.subject) for x in v.violations] == [(Dimension.ENV, "STORM")]

    def test_assistant_too_far(self, world_at):
        v = check_runtime(OddSpec(assistant_radius=500), world_at(at("A")), 10, assistants=[Assistant("a1", 800, 0)])
        assert v.dimensions() == [Dimension.ASSISTANT]
        assert "800" in v.violations[0].detail

    def test_assistant_close_enough(self, world_at):
        v = check_runtime(OddSpec(assistant_radius=500), world_at(at("A")), 10, assistants=[Assistant("a1", 300, 400)])
        assert v.ok

    def test_distance(self, world_at, g0):
        pose = replace(on_edge("A", "B", 10, g0), odometer_m=60_000)
        assert check_runtime(OddSpec(), world_at(pose), 10).dimensions() == [Dimension.DISTANCE]


def test_every_field_belongs_to_one_dimension():
    owned = [f for names in DIMENSION_FIELDS.values() for f in names]
    assert sorted(owned) == sorted(spec_field_names())
    assert len(owned) == len(set(owned))
    assert set(DIMENSION_FIELDS) == set(Dimension)


def test_area_exclusions_known_mode(g0):
    p = adult(known_nodes=frozenset({"A", "B", "C"}))
    spec = OddSpec(allowed_nodes_mode=AreaMode.KNOWN_TO_ALL_PASSENGERS, excluded_nodes=frozenset({"H"}))
    assert area_exclusions(spec, [p], g0) == {"D", "H"}


@pytest.mark.parametrize("kw", [
    {"min_solo_age": 0},
    {"max_trip_duration": -1},
    {"assistant_radius": 0},
    {"allowed_nodes_mode": AreaMode.EXPLICIT_LIST},
])
def test_spec_validation(kw):
    with pytest.raises(ValueError):
        OddSpec(**kw)


def test_platform_user_cannot_climb():
    with pytest.raises(ValueError):
        adult(needs_platform=True)
