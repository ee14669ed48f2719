"""Randomized disturbance schedules on a compact copy of the G0 layout.

Travel times are short so a full trip takes about a minute of simulated time,
which keeps batches of runs cheap. Every generated scenario goes through the
normal parser, so it obeys the same validation as hand-written files.
"""

from __future__ import annotations

from typing import Dict, List

import numpy as np
import yaml

from .scenario import ScenarioSpec, parse_scenario

_MAP = {
    "nodes": {
        "A": {"x": 0, "y": 0},
        "B": {"x": 200, "y": 0},
        "C": {"x": 400, "y": 0},
        "D": {"x": 200, "y": -350},
        "H": {"x": 200, "y": 80, "care_facility": True},
    },
    "edges": [["A", "B", 20], ["B", "C", 20], ["A", "D", 40], ["D", "C", 40], ["B", "H", 8]],
}

_STOPS = [
    {"node": "A", "lateral_slot": "A1", "slope_deg": 1, "curb_height_cm": 12},
    {"node": "A", "lateral_slot": "A2", "slope_deg": 3, "curb_height_cm": 14},
    {"node": "C", "lateral_slot": "C1", "slope_deg": 2, "curb_height_cm": 12},
    {"node": "C", "lateral_slot": "C2", "slope_deg": 8, "curb_height_cm": 15},
    {"node": "H", "lateral_slot": "H1", "slope_deg": 1, "curb_height_cm": 10},
]

HORIZON_S = 400


def _disturbance(rng: np.random.Generator, kind: str, onset: int) -> Dict:
    life = int(rng.integers(3, 40)) * 1000
    d: Dict = {"subtype": kind, "onset": onset}
    if kind == "ENV_WEATHER":
        d.update(expiry=onset + life, params={"flag": str(rng.choice(["RAIN", "STORM", "FOG"]))})
    elif kind == "ENV_BLOCKED_EDGE":
        a, b = _MAP["edges"][int(rng.integers(0, 4))][:2]
        d.update(expiry=onset + life, params={"a": a, "b": b})
    elif kind == "ENV_TRAFFIC":
        start = onset / 1000
        d.update(params={"slot": str(rng.choice(["A1", "C1"])), "busy": [[start, start + life / 1000]]})
    elif kind == "ENV_PLATFORM_OBSTRUCTION":
        d.update(expiry=onset + life)
    elif kind in ("VEH_DOOR_ACTUATOR_FAULT", "VEH_PLATFORM_FAULT", "VEH_DRIVETRAIN_FAULT", "VEH_BRAKE_FAULT"):
        d.update(expiry=onset + life)
    elif kind == "PAX_MEDICAL_EVENT":
        d.update(params={"passenger": "p1", "hr": int(rng.choice([40, 125, 160])),
                         "fallen": bool(rng.random() < 0.3)})
        if rng.random() < 0.5:
            d["expiry"] = onset + life
    elif kind == "PAX_UNSCRIPTED_MOVEMENT":
        zone = str(rng.choice(["DOORWAY", "CABIN_UNSECURED", "ON_PLATFORM"]))
        d.update(expiry=onset + int(rng.integers(1, 6)) * 1000, params={"passenger": "p1", "zone": zone})
    elif kind == "ENV_EXTERNAL_PERSON":
        d.update(expiry=onset + life, params={"person": "x1", "zone": "DOORWAY"})
    return d


KINDS = (
    "ENV_WEATHER", "ENV_BLOCKED_EDGE", "ENV_TRAFFIC", "ENV_PLATFORM_OBSTRUCTION",
    "VEH_DOOR_ACTUATOR_FAULT", "VEH_PLATFORM_FAULT", "VEH_DRIVETRAIN_FAULT", "VEH_BRAKE_FAULT",
    "PAX_MEDICAL_EVENT", "PAX_UNSCRIPTED_MOVEMENT", "ENV_EXTERNAL_PERSON",
)


def random_document(seed: int, max_disturbances: int = 4) -> Dict:
    rng = np.random.default_rng(seed)
    needs_platform = bool(rng.random() < 0.4)
    caps = ["CAN_OPERATE_HMI"] if needs_platform else ["CAN_CLIMB_STEP"]
    if rng.random() < 0.5:
        caps.append("CAN_OPERATE_MANUAL_RELEASE")
    onboard = bool(rng.random() < 0.3)
    dist: List[Dict] = []
    for _ in range(int(rng.integers(1, max_disturbances + 1))):
        kind = str(rng.choice(KINDS))
        onset = int(rng.integers(0, 90)) * 1000 + int(rng.integers(0, 10)) * 100
        dist.append(_disturbance(rng, kind, onset))
    dist.sort(key=lambda d: (d["onset"], d["subtype"]))
    return {
        "name": f"random-{seed}",
        "seed": seed,
        "horizon": HORIZON_S,
        "map": _MAP,
        "stops": _STOPS,
        "profiles": [{
            "id": "p1", "age": int(rng.integers(20, 85)), "capabilities": caps,
            "needs_platform": needs_platform, "known_nodes": list(_MAP["nodes"]),
        }],
        "mission": {"goal_node": "C", "manifest": ["p1"], "requester": "p1"},
        "initial": {"node": "A", "slot": "A1", "zones": {"p1": "CABIN_SEATED" if onboard else "OUTSIDE_NEAR"}},
        "actors": {"p1": "ADULT"},
        "externals": [{"id": "x1"}],
        "disturbances": dist,
    }


def random_scenario(seed: int, max_disturbances: int = 4) -> ScenarioSpec:
    doc = random_document(seed, max_disturbances)
    return parse_scenario(yaml.safe_dump(doc, sort_keys=False), source=f"random:{seed}")
