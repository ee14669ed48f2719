from dataclasses import replace

import pytest

from companion_av.common import DoorState, LockState, PlatformState, ReportStatus, Zone
from companion_av.errors import NoSuitableStopError
from companion_av.roadmap import StopPoint
from companion_av.strategic import Action, PerformanceReport, StrategyPlan
from companion_av.tactical import (
    BOARDING_ALLOWANCE_S,
    GUARD_TIMEOUT_MS,
    PHASE_ORDER,
    BoardingPhase as P,
    Deferred,
    Direction,
    DoorSchedule,
    Maneuver,
    PlatformCmd,
    TacticalDirective,
    TacticalIssues,
    plan_behavior,
    report_performance,
    schedule_door,
    select_stop,
    start_boarding,
    step_boarding,
)

from conftest import adult, at, on_edge, situation
from oracles import earliest_gap

C1 = StopPoint("C", "C1", 2, 12)
C2 = StopPoint("C", "C2", 8, 15)
WHEELCHAIR = adult(capabilities=frozenset(), needs_platform=True)


class TestSelectStop:
    def test_platform_user_gets_flat_stop(self):
        assert select_stop("C", [C2, C1], [WHEELCHAIR]) == C1

    def test_min_slope_without_platform_need(self):
        assert select_stop("C", [C2, C1], [adult()]) == C1

    def test_only_steep_stop(self):
        with pytest.raises(NoSuitableStopError):
            select_stop("C", [C2], [WHEELCHAIR])

    def test_slot_breaks_slope_ties(self):
        a, b = StopPoint("C", "Cb", 2, 0), StopPoint("C", "Ca", 2, 0)
        assert select_stop("C", [a, b], [adult()]) == b


class TestScheduleDoor:
    def test_clear_lane(self):
        assert schedule_door(situation(at("A")), [], 5000) == DoorSchedule(5000, 5000)

    def test_busy_first_twelve_seconds(self):
        busy = [(0, 12_000)]
        # interval-scan oracle gives 12 s
        assert earliest_gap(busy, 0, 3000, 60_000) == 12_000
        assert schedule_door(situation(at("A")), busy, 0) == DoorSchedule(12_000, 12_000)

    @pytest.mark.parametrize(
        "busy",
        [
            [(1000, 2000), (4500, 6000)],
            [(2000, 4000), (5000, 8000), (10_500, 11_000)],
            [(0, 1000), (3500, 4000), (6000, 6500)],
        ],
    )
    def test_gaps_match_oracle(self, busy):
        expected = earliest_gap(busy, 0, 3000, 60_000)
        assert schedule_door(situation(at("A")), busy, 0).open_at == expected

    def test_saturated_window_defers(self):
        out = schedule_door(situation(at("A")), [(0, 61_000)], 0)
        assert isinstance(out, Deferred) and out.reason == "DOOR_BLOCKED_BY_TRAFFIC"

    def test_unlock_lead(self):
        assert schedule_door(situation(at("A")), [(0, 12_000)], 0, unlock_lead_ms=2000) == DoorSchedule(10_000, 12_000)

    def test_refuses_moving_vehicle(self):
        with pytest.raises(ValueError):
            schedule_door(situation(at("A", speed=3.0)), [], 0)

    def test_open_not_before_unlock(self):
        with pytest.raises(ValueError):
            DoorSchedule(unlock_at=10, open_at=5)


def scene(tick, zones, door=DoorState.CLOSED, lock=LockState.LOCKED, platform=PlatformState.STOWED, slot="C1"):
    sit = situation(at("C", slot=slot), zones)
    snap = replace(sit.self_representation, door=door, lock=lock, platform=platform)
    return replace(sit, tick=tick, self_representation=snap)


def run_script(state, script):
    """Apply a list of scenes; return the phase trace."""
    for sit in script:
        state, _ = step_boarding(state, sit)
    return state


class TestBoarding:
    def test_platform_trace_has_all_eight_states(self):
        st = start_boarding(Direction.BOARD, C1, ["p1"], [WHEELCHAIR], 0)
        out = run_script(st, [
            scene(0, {"p1": Zone.OUTSIDE_NEAR}),
            scene(2000, {"p1": Zone.OUTSIDE_NEAR}, DoorState.OPEN, LockState.UNLOCKED),
            scene(7000, {"p1": Zone.ON_PLATFORM}, DoorState.OPEN, LockState.UNLOCKED, PlatformState.DEPLOYED),
            scene(12_000, {"p1": Zone.ON_PLATFORM}, DoorState.OPEN, LockState.UNLOCKED, PlatformState.LIFTED),
            scene(20_000, {"p1": Zone.CABIN_SEATED}, DoorState.OPEN, LockState.UNLOCKED, PlatformState.LIFTED),
            scene(25_000, {"p1": Zone.CABIN_SEATED}, DoorState.OPEN, LockState.UNLOCKED),
            scene(27_000, {"p1": Zone.CABIN_SEATED}),
        ])
        assert list(out.trace) == PHASE_ORDER
        assert out.trace[-2] == P.DOOR_CLOSING

    def test_able_bodied_trace_skips_platform(self):
        st = start_boarding(Direction.BOARD, C1, ["p2"], [adult("p2")], 0)
        out = run_script(st, [
            scene(0, {"p2": Zone.OUTSIDE_NEAR}),
            scene(2000, {"p2": Zone.OUTSIDE_NEAR}, DoorState.OPEN, LockState.UNLOCKED),
            scene(9000, {"p2": Zone.CABIN_SEATED}, DoorState.OPEN, LockState.UNLOCKED),
            scene(11_000, {"p2": Zone.CABIN_SEATED}),
        ])
        assert list(out.trace) == [P.ALIGN_TO_STOP, P.DOOR_OPENING, P.PASSENGER_SECURING, P.DOOR_CLOSING, P.READY]

    def test_doorway_during_closing_reopens(self):
        st = start_boarding(Direction.BOARD, C1, ["p2"], [adult("p2")], 0)
        st = run_script(st, [
            scene(0, {"p2": Zone.OUTSIDE_NEAR}),
            scene(2000, {"p2": Zone.OUTSIDE_NEAR}, DoorState.OPEN, LockState.UNLOCKED),
            scene(9000, {"p2": Zone.CABIN_SEATED}, DoorState.OPEN, LockState.UNLOCKED),
        ])
        assert st.phase == P.DOOR_CLOSING
        st, d = step_boarding(st, scene(9500, {"p2": Zone.DOORWAY}, DoorState.CLOSING, LockState.UNLOCKED))
        assert st.phase == P.DOOR_OPENING
        assert d.door_schedule == DoorSchedule(9500, 9500)

    def test_no_stow_while_on_platform(self):
        st = start_boarding(Direction.BOARD, C1, ["p1"], [WHEELCHAIR], 0)
        st = replace(st, phase=P.PLATFORM_STOW, trace=st.trace + (P.PLATFORM_STOW,))
        _, d = step_boarding(st, scene(1000, {"p1": Zone.ON_PLATFORM}, DoorState.OPEN, LockState.UNLOCKED,
                                          PlatformState.LIFTED))
        assert d.platform_cmd == PlatformCmd.NONE

    def test_guard_timeout(self):
        st = start_boarding(Direction.BOARD, C1, ["p1"], [WHEELCHAIR], 0)
        st = run_script(st, [
            scene(0, {"p1": Zone.OUTSIDE_NEAR}),
            scene(2000, {"p1": Zone.OUTSIDE_NEAR}, DoorState.OPEN, LockState.UNLOCKED),
        ])
        assert st.phase == P.PLATFORM_DEPLOY
        stuck = scene(2000 + GUARD_TIMEOUT_MS, {"p1": Zone.OUTSIDE_NEAR}, DoorState.OPEN, LockState.UNLOCKED,
                      PlatformState.DEPLOYING)
        st, _ = step_boarding(st, stuck)
        assert st.phase == P.FAILED and st.failure == "GUARD_TIMEOUT"

    def test_deploy_waits_for_open_door(self):
        st = start_boarding(Direction.BOARD, C1, ["p1"], [WHEELCHAIR], 0)
        st, _ = step_boarding(st, scene(0, {"p1": Zone.OUTSIDE_NEAR}))
        st, d = step_boarding(st, scene(1000, {"p1": Zone.OUTSIDE_NEAR}, DoorState.OPENING, LockState.UNLOCKED))
        assert st.phase == P.DOOR_OPENING and d.platform_cmd == PlatformCmd.NONE


def _plan(route=("A", "B", "C"), action=Action.CONTINUE):
    return StrategyPlan(action, route[-1], route, mission_goal="C", departure_node="A", manifest=("p1",))


class TestPlanBehavior:
    def test_follow_route(self, g0):
        d = plan_behavior(_plan(), situation(on_edge("A", "B", 100, g0)), None, g0, [adult()])
        assert d.maneuver == Maneuver.FOLLOW_ROUTE and d.speed_limit_mps == 10.0

    def test_stop_immediately_pulls_over(self, g0):
        plan = StrategyPlan(Action.STOP_IMMEDIATELY, "B", ())
        d = plan_behavior(plan, situation(on_edge("A", "B", 100, g0)), None, g0)
        assert d.maneuver == Maneuver.PULL_OVER and d.speed_limit_mps == 0

    def test_eta_includes_platform_allowance(self, g0):
        sit = situation(at("A"))
        plain = plan_behavior(_plan(), sit, None, g0, [adult()])
        wheel = plan_behavior(_plan(), sit, None, g0, [WHEELCHAIR])
        assert plain.eta_s == 600
        assert wheel.eta_s - plain.eta_s == BOARDING_ALLOWANCE_S

    def test_align_near_stop(self, g0):
        d = plan_behavior(_plan(("B", "C")), situation(on_edge("B", "C", 2960, g0)), None, g0, target_stop=C1)
        assert d.maneuver == Maneuver.ALIGN_TO_STOP

    def test_hold_during_boarding(self, g0):
        st = replace(start_boarding(Direction.BOARD, C1, ["p1"], [adult()], 0), phase=P.PASSENGER_SECURING)
        d = plan_behavior(_plan(), situation(at("C", "C1")), st, g0)
        assert d.maneuver == Maneuver.HOLD

    def test_platform_cmd_only_when_held(self):
        with pytest.raises(ValueError):
            TacticalDirective(Maneuver.FOLLOW_ROUTE, platform_cmd=PlatformCmd.DEPLOY)


class TestReport:
    def test_nominal(self):
        r = report_performance(TacticalIssues())
        assert r.status == ReportStatus.NOMINAL and r.reasons == ()

    def test_deferred_door_degrades(self):
        r = report_performance(TacticalIssues(door_deferred=True))
        assert (r.status, r.reasons) == (ReportStatus.DEGRADED, ("DOOR_BLOCKED_BY_TRAFFIC",))

    def test_guard_timeout_fails(self):
        r = report_performance(TacticalIssues(guard_timeout=True))
        assert (r.status, r.reasons) == (ReportStatus.FAILED, ("GUARD_TIMEOUT",))

    def test_operational_failure_passes_up(self):
        op = PerformanceReport("OPERATIONAL", ReportStatus.FAILED, ("ACTUATOR_FAULT:DOOR",))
        r = report_performance(TacticalIssues(door_deferred=True, operational=op))
        assert r.status == ReportStatus.FAILED
        assert r.reasons == ("ACTUATOR_FAULT:DOOR", "DOOR_BLOCKED_BY_TRAFFIC")
