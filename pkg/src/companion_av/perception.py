"""Feature extraction from simulated sensor frames and external messages,
plus debounced detection of actuator subsystem faults."""

from __future__ import annotations

from collections import deque
from typing import Collection, Deque, Iterable, List, Mapping, Optional, Sequence

from .common import CABIN_ZONES, OPERATIONAL_PERIOD_MS, FeatureKind, Origin, Zone
from .errors import UnauthorizedOriginError, UnknownSensorError
from .signals import (
    ActuatorReport,
    ExternalMessage,
    Feature,
    FeatureSet,
    SensorFrame,
    SubsystemFault,
)

FAULT_WINDOW_TICKS = 3

# Which passenger zones a shared thermometer also describes.
_TEMP_CONTEXT_ZONES = {
    FeatureKind.CABIN_TEMP: CABIN_ZONES,
    FeatureKind.AMBIENT_TEMP: frozenset({Zone.DOORWAY, Zone.ON_PLATFORM, Zone.OUTSIDE_NEAR}),
}


def _zone_of(posture_value) -> Zone:
    zone = posture_value[0] if isinstance(posture_value, (tuple, list)) else posture_value
    return Zone(zone)


def extract_features(
    frame: SensorFrame,
    sensors: Mapping[str, Collection[FeatureKind]],
    passengers: Optional[Collection[str]] = None,
) -> FeatureSet:
    """One feature per reading, plus per-passenger temperature context.

    ``sensors`` maps each declared sensor id to the channels it may report.
    A CABIN_TEMP reading is also a BODY_TEMP context feature for every passenger
    whose posture in the same frame places them in the cabin; AMBIENT_TEMP does
    the same for passengers in the doorway, on the platform or just outside.
    """
    features: List[Feature] = []
    zones = {}
    for r in frame.readings:
        allowed = sensors.get(r.sensor_id)
        if allowed is None or r.channel not in allowed:
            raise UnknownSensorError(f"sensor {r.sensor_id!r} cannot report {r.channel.value}")
        features.append(Feature(r.channel, r.subject, r.raw_value, r.sensor_id, frame.tick))
        if r.channel == FeatureKind.POSTURE and (passengers is None or r.subject in passengers):
            zones[r.subject] = _zone_of(r.raw_value)
    for r in frame.readings:
        ctx = _TEMP_CONTEXT_ZONES.get(r.channel)
        if ctx is None:
            continue
        for pid in sorted(zones):
            if zones[pid] in ctx:
                features.append(
                    Feature(FeatureKind.BODY_TEMP, pid, r.raw_value, r.sensor_id, frame.tick, derived=True)
                )
    return FeatureSet(frame.tick, tuple(features))


def ingest_external(msg: ExternalMessage, authorized: Collection[Origin]) -> FeatureSet:
    if msg.origin not in authorized:
        raise UnauthorizedOriginError(f"origin {msg.origin.value} is not authorized")
    tagged = tuple(
        Feature(f.kind, f.subject, f.value, msg.origin.value, msg.tick, f.derived) for f in msg.payload
    )
    return FeatureSet(msg.tick, tagged)


def detect_subsystem_faults(window: Sequence[Sequence[ActuatorReport]]) -> List[SubsystemFault]:
    """Faults whose reports diverged on each of the last three consecutive ticks.

    ``window`` holds one list of reports per operational tick, oldest first;
    only the last three entries are consulted.
    """
    if len(window) < FAULT_WINDOW_TICKS:
        return []
    recent = list(window)[-FAULT_WINDOW_TICKS:]
    ticks = []
    for reports in recent:
        if not reports:
            return []
        ticks.append(reports[0].tick)
    if any(b - a != OPERATIONAL_PERIOD_MS for a, b in zip(ticks, ticks[1:])):
        return []
    by_tick = [{r.subsystem: r for r in reports} for reports in recent]
    faults = []
    for sub in sorted(by_tick[-1], key=lambda s: s.value):
        seq = [m.get(sub) for m in by_tick]
        if all(r is not None and r.diverged for r in seq):
            stuck = len({repr(r.achieved) for r in seq}) == 1
            faults.append(SubsystemFault(sub, "STUCK" if stuck else "ERRATIC"))
    return faults


class FaultMonitor:
    """Owns the three-tick report window for a single caller."""

    def __init__(self):
        self.window: Deque[List[ActuatorReport]] = deque(maxlen=FAULT_WINDOW_TICKS)

    def update(self, reports: Iterable[ActuatorReport]) -> List[SubsystemFault]:
        self.window.append(list(reports))
        return detect_subsystem_faults(self.window)
