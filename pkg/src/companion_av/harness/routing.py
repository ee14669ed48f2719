"""Permission-checked routing of scripted human and remote inputs to a level."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

from ..common import Level
from ..errors import PermissionDeniedError
from .scenario import EventKind, PermissionRule, UserEvent

# Where each kind of input lands; nothing is ever written to actuators directly.
TARGETS = {
    EventKind.SET_MISSION: "strategic",
    EventKind.CHANGE_DESTINATION: "strategic",
    EventKind.REQUEST_STOP: "tactical",
    EventKind.EMERGENCY_STOP: "tactical",
    EventKind.EXTERNAL_MESSAGE: "perception",
}


@dataclass(frozen=True)
class RoutedInput:
    event: UserEvent
    target: str
    # EMERGENCY_STOP becomes a tactical PULL_OVER request.
    request: str


def is_allowed(permissions: Sequence[PermissionRule], role: Optional[str], level: Level, kind: EventKind) -> bool:
    for rule in permissions:
        if rule.role == role and rule.level == level and rule.kind == kind:
            return rule.allow
    return False


def route_user_event(ev: UserEvent, permissions: Sequence[PermissionRule], role: Optional[str]) -> RoutedInput:
    """Turn a permitted event into an input for its level; raise PermissionDeniedError otherwise."""
    if not is_allowed(permissions, role, ev.level, ev.kind):
        raise PermissionDeniedError(f"role {role} may not issue {ev.kind.value} at {ev.level.value} level")
    request = "PULL_OVER" if ev.kind == EventKind.EMERGENCY_STOP else ev.kind.value
    return RoutedInput(ev, TARGETS[ev.kind], request)
