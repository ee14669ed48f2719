"""Enumerations and timing constants shared by every level of the stack."""

from __future__ import annotations

from enum import Enum

# All simulation time is integer milliseconds.
OPERATIONAL_PERIOD_MS = 100
TACTICAL_PERIOD_MS = 1_000
STRATEGIC_PERIOD_MS = 10_000

NOMINAL_SPEED_MPS = 10.0
STATIONARY_SPEED_MPS = 0.5
OUTSIDE_NEAR_RADIUS_M = 3.0
ADULT_AGE = 18


def ms(seconds: float) -> int:
    return int(round(seconds * 1000))


def seconds(ticks_ms: int) -> float:
    return ticks_ms / 1000.0


class FeatureKind(str, Enum):
    SPEECH = "SPEECH"
    IDENTITY = "IDENTITY"
    GESTURE = "GESTURE"
    POSTURE = "POSTURE"
    FALLEN = "FALLEN"
    BODY_TEMP = "BODY_TEMP"
    HEART_RATE = "HEART_RATE"
    BREATH_RATE = "BREATH_RATE"
    CABIN_TEMP = "CABIN_TEMP"
    AMBIENT_TEMP = "AMBIENT_TEMP"
    DOOR_POSITION = "DOOR_POSITION"
    LOCK_STATE = "LOCK_STATE"
    PLATFORM_POSITION = "PLATFORM_POSITION"
    VEHICLE_POSE = "VEHICLE_POSE"
    TRAFFIC_OCCUPANCY = "TRAFFIC_OCCUPANCY"
    SUBSYSTEM_HEALTH = "SUBSYSTEM_HEALTH"
    EXTERNAL_INFO = "EXTERNAL_INFO"


class Zone(str, Enum):
    CABIN_SEATED = "CABIN_SEATED"
    CABIN_UNSECURED = "CABIN_UNSECURED"
    ON_PLATFORM = "ON_PLATFORM"
    DOORWAY = "DOORWAY"
    OUTSIDE_NEAR = "OUTSIDE_NEAR"
    ABSENT = "ABSENT"


CABIN_ZONES = frozenset({Zone.CABIN_SEATED, Zone.CABIN_UNSECURED})
OUTSIDE_ZONES = frozenset({Zone.OUTSIDE_NEAR, Zone.ABSENT})


class Health(str, Enum):
    NORMAL = "NORMAL"
    ELEVATED = "ELEVATED"
    EMERGENCY = "EMERGENCY"


class ActorRole(str, Enum):
    PASSENGER = "PASSENGER"
    EXTERNAL_HELPER = "EXTERNAL_HELPER"
    EXTERNAL_OTHER = "EXTERNAL_OTHER"


class HealthTrend(str, Enum):
    STABLE = "STABLE"
    DEGRADING = "DEGRADING"
    CRITICAL = "CRITICAL"


class HazardKind(str, Enum):
    MEDICAL_EMERGENCY = "MEDICAL_EMERGENCY"
    TRAPPED_RISK = "TRAPPED_RISK"
    STRANDING_RISK = "STRANDING_RISK"
    EXPOSURE_RISK = "EXPOSURE_RISK"
    UNKNOWN_AREA_RISK = "UNKNOWN_AREA_RISK"


class Origin(str, Enum):
    CONTROL_ROOM = "CONTROL_ROOM"
    GUARDIAN_REMOTE = "GUARDIAN_REMOTE"
    INFRASTRUCTURE = "INFRASTRUCTURE"
    OTHER_VEHICLE = "OTHER_VEHICLE"


class Subsystem(str, Enum):
    DRIVETRAIN = "DRIVETRAIN"
    BRAKE = "BRAKE"
    STEERING = "STEERING"
    DOOR = "DOOR"
    LOCK = "LOCK"
    PLATFORM = "PLATFORM"


class DoorState(str, Enum):
    CLOSED = "CLOSED"
    OPENING = "OPENING"
    OPEN = "OPEN"
    CLOSING = "CLOSING"


class LockState(str, Enum):
    LOCKED = "LOCKED"
    UNLOCKED = "UNLOCKED"


class PlatformState(str, Enum):
    STOWED = "STOWED"
    DEPLOYING = "DEPLOYING"
    DEPLOYED = "DEPLOYED"
    LIFTING = "LIFTING"
    LIFTED = "LIFTED"
    STOWING = "STOWING"


PLATFORM_MOVING = frozenset({PlatformState.DEPLOYING, PlatformState.LIFTING, PlatformState.STOWING})


class Capability(str, Enum):
    CAN_CLIMB_STEP = "CAN_CLIMB_STEP"
    CAN_OPERATE_MANUAL_RELEASE = "CAN_OPERATE_MANUAL_RELEASE"
    CAN_OPERATE_HMI = "CAN_OPERATE_HMI"


class Level(str, Enum):
    STRATEGIC = "STRATEGIC"
    TACTICAL = "TACTICAL"
    OPERATIONAL = "OPERATIONAL"


class ReportStatus(str, Enum):
    NOMINAL = "NOMINAL"
    DEGRADED = "DEGRADED"
    FAILED = "FAILED"
