"""Road graph with passenger-related node annotations and stop points."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Dict, FrozenSet, Iterable, List, Optional, Tuple

from .common import NOMINAL_SPEED_MPS

PLATFORM_MAX_SLOPE_DEG = 5.0
PLATFORM_MAX_CURB_CM = 20.0


def edge_key(a: str, b: str) -> Tuple[str, str]:
    return (a, b) if a <= b else (b, a)


@dataclass(frozen=True)
class StopPoint:
    node: str
    lateral_slot: str
    slope_deg: float = 0.0
    curb_height_cm: float = 0.0

    @property
    def platform_usable(self) -> bool:
        return self.slope_deg <= PLATFORM_MAX_SLOPE_DEG and self.curb_height_cm <= PLATFORM_MAX_CURB_CM


@dataclass(frozen=True)
class NodeInfo:
    id: str
    x: float = 0.0
    y: float = 0.0
    care_facility: bool = False
    goal_candidate: Optional[bool] = None
    known_to: FrozenSet[str] = frozenset()


@dataclass(frozen=True)
class RoadGraph:
    """Undirected graph; edge weights are travel seconds at nominal speed."""

    nodes: Dict[str, NodeInfo]
    edges: Dict[Tuple[str, str], float]
    stops: Dict[str, Tuple[StopPoint, ...]] = field(default_factory=dict)

    def __post_init__(self):
        adj: Dict[str, List[Tuple[str, float]]] = {n: [] for n in self.nodes}
        for (a, b), t in self.edges.items():
            adj[a].append((b, t))
            adj[b].append((a, t))
        for n in adj:
            adj[n].sort()
        object.__setattr__(self, "_adj", adj)

    @classmethod
    def build(
        cls,
        nodes: Iterable,
        edges: Iterable[Tuple[str, str, float]],
        stops: Iterable[StopPoint] = (),
    ) -> "RoadGraph":
        infos = {}
        for n in nodes:
            info = n if isinstance(n, NodeInfo) else NodeInfo(id=n)
            infos[info.id] = info
        emap = {edge_key(a, b): float(t) for a, b, t in edges}
        smap: Dict[str, List[StopPoint]] = {}
        for s in stops:
            smap.setdefault(s.node, []).append(s)
        return cls(infos, emap, {n: tuple(sorted(v, key=lambda s: s.lateral_slot)) for n, v in smap.items()})

    def neighbors(self, node: str) -> List[Tuple[str, float]]:
        return self._adj[node]

    def has_edge(self, a: str, b: str) -> bool:
        return edge_key(a, b) in self.edges

    def travel_s(self, a: str, b: str) -> float:
        return self.edges[edge_key(a, b)]

    def length_m(self, a: str, b: str) -> float:
        return self.travel_s(a, b) * NOMINAL_SPEED_MPS

    def stops_at(self, node: str) -> Tuple[StopPoint, ...]:
        return self.stops.get(node, ())

    def stop(self, slot: str) -> StopPoint:
        for group in self.stops.values():
            for s in group:
                if s.lateral_slot == slot:
                    return s
        raise KeyError(slot)

    def suitable_for_platform(self, node: str) -> bool:
        return any(s.platform_usable for s in self.stops_at(node))

    def is_goal_candidate(self, node: str) -> bool:
        flag = self.nodes[node].goal_candidate
        return bool(self.stops_at(node)) if flag is None else flag

    def distance_xy(self, node: str, x: float, y: float) -> float:
        info = self.nodes[node]
        return math.hypot(info.x - x, info.y - y)

    def with_known_to(self, known: Dict[str, Iterable[str]]) -> "RoadGraph":
        """Annotate nodes with the passengers who know them (pid -> nodes)."""
        who: Dict[str, set] = {n: set() for n in self.nodes}
        for pid, nodes in known.items():
            for n in nodes:
                who[n].add(pid)
        infos = {n: replace(info, known_to=frozenset(who[n])) for n, info in self.nodes.items()}
        return RoadGraph(infos, dict(self.edges), dict(self.stops))

    def scaled(self, factor: float) -> "RoadGraph":
        return RoadGraph(dict(self.nodes), {k: v * factor for k, v in self.edges.items()}, dict(self.stops))
