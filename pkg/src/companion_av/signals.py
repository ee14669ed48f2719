"""Value types exchanged between the plant, perception and operational levels."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Optional, Tuple

from .common import FeatureKind, Origin, Subsystem


@dataclass(frozen=True)
class Feature:
    kind: FeatureKind
    subject: str
    value: Any
    source: str
    tick: int = 0
    # True for context features expanded from a shared sensor (e.g. ambient temperature per passenger).
    derived: bool = False


@dataclass(frozen=True)
class FeatureSet:
    tick: int
    features: Tuple[Feature, ...] = ()

    def of_kind(self, kind: FeatureKind):
        return [f for f in self.features if f.kind == kind]

    def merged(self, other: "FeatureSet") -> "FeatureSet":
        return FeatureSet(max(self.tick, other.tick), self.features + other.features)


@dataclass(frozen=True)
class Reading:
    sensor_id: str
    channel: FeatureKind
    subject: str
    raw_value: Any


@dataclass(frozen=True)
class SensorFrame:
    tick: int
    readings: Tuple[Reading, ...] = ()


@dataclass(frozen=True)
class ExternalMessage:
    tick: int
    origin: Origin
    payload: Tuple[Feature, ...] = ()


@dataclass(frozen=True)
class VehiclePose:
    """Where the vehicle is: at ``node``, or ``offset_m`` along the edge ``edge_from -> edge_to``."""

    node: Optional[str]
    edge_from: Optional[str] = None
    edge_to: Optional[str] = None
    offset_m: float = 0.0
    edge_len_m: float = 0.0
    speed: float = 0.0
    slot: Optional[str] = None
    range_m: float = 0.0
    odometer_m: float = 0.0

    @property
    def on_edge(self) -> bool:
        return self.node is None

    @property
    def heading_node(self) -> str:
        return self.node if self.node is not None else self.edge_to

    @property
    def remaining_on_edge_m(self) -> float:
        return 0.0 if self.node is not None else self.edge_len_m - self.offset_m


@dataclass(frozen=True)
class ActuatorCommand:
    subsystem: Subsystem
    setpoint: Any


@dataclass(frozen=True)
class ActuatorReport:
    subsystem: Subsystem
    commanded: Any
    achieved: Any
    tick: int

    @property
    def diverged(self) -> bool:
        return self.commanded != self.achieved


@dataclass(frozen=True)
class SubsystemFault:
    subsystem: Subsystem
    mode: str


@dataclass(frozen=True)
class InfoOutput:
    """Information surfaced to people: passengers, remote parties or other road users."""

    tick: int
    level: str
    audience: str
    content: str
    payload: Tuple[str, ...] = ()

    def __post_init__(self):
        if self.audience == "REMOTE" and self.level != "STRATEGIC":
            raise ValueError("only strategic outputs address remote parties")
        if self.audience == "OTHER_ROAD_USERS" and self.level != "TACTICAL":
            raise ValueError("only tactical outputs address other road users")
