"""Line-delimited JSON event logs: serialization, ordering and hierarchy audits.

The first line is a header naming the scenario, its digest, the seed and the
run limit. Each further line is one record::

    {"tick": 1200, "module": "tactical", "type": "directive", "payload": {...},
     "flow": {"kind": "command", "to": "operational"}}

``flow`` is present only on records that cross levels. Infinite values are
written as the string ``"inf"``.
"""

from __future__ import annotations

import dataclasses
import json
import math
from enum import Enum
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, Sequence, Tuple

from ..errors import LogFormatError

LOG_FORMAT = "companion-av-log/1"

MODULE_PRIORITY = ("plant", "perception", "representation", "operational", "tactical", "strategic", "odd", "harness")
PRIORITY = {m: i for i, m in enumerate(MODULE_PRIORITY)}

COMMAND_EDGES = frozenset({("strategic", "tactical"), ("tactical", "operational"), ("operational", "plant")})
REPORT_EDGES = frozenset({("plant", "operational"), ("operational", "tactical"), ("tactical", "strategic")})


def to_jsonable(value: Any) -> Any:
    if isinstance(value, Enum):
        return value.value
    if dataclasses.is_dataclass(value) and not isinstance(value, type):
        return {f.name: to_jsonable(getattr(value, f.name)) for f in dataclasses.fields(value)}
    if isinstance(value, dict):
        return {str(to_jsonable(k)): to_jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [to_jsonable(v) for v in value]
    if isinstance(value, (set, frozenset)):
        return sorted((to_jsonable(v) for v in value), key=repr)
    if isinstance(value, float):
        if math.isinf(value):
            return "inf" if value > 0 else "-inf"
        if math.isnan(value):
            return "nan"
        return round(value, 6) + 0.0  # folds -0.0
    if hasattr(value, "item"):  # numpy scalars
        return to_jsonable(value.item())
    return value


def dumps(obj: Any) -> str:
    return json.dumps(to_jsonable(obj), sort_keys=True, separators=(",", ":"), allow_nan=False)


@dataclasses.dataclass(frozen=True)
class Record:
    tick: int
    module: str
    type: str
    payload: Any
    flow: Optional[Tuple[str, str]] = None  # (kind, to)

    def line(self) -> str:
        d = {"tick": self.tick, "module": self.module, "type": self.type, "payload": self.payload}
        if self.flow is not None:
            d["flow"] = {"kind": self.flow[0], "to": self.flow[1]}
        return dumps(d)


@dataclasses.dataclass
class EventLog:
    header: Dict[str, Any]
    records: List[Record] = dataclasses.field(default_factory=list)
    verdict: Optional[Dict[str, Any]] = None
    alerts: List[str] = dataclasses.field(default_factory=list)

    def lines(self) -> List[str]:
        out = [dumps(dict(self.header, format=LOG_FORMAT))]
        out.extend(r.line() for r in self.records)
        return out

    def text(self) -> str:
        return "\n".join(self.lines()) + "\n"

    def write(self, path) -> None:
        Path(path).write_text(self.text())

    def of_type(self, type_: str, module: Optional[str] = None) -> List[Record]:
        return [r for r in self.records if r.type == type_ and (module is None or r.module == module)]

    @property
    def outcome(self) -> Optional[str]:
        return None if self.verdict is None else self.verdict["outcome"]


class TickBuffer:
    """Collects one tick's records and releases them in module-priority order."""

    def __init__(self):
        self.pending: List[Record] = []

    def add(self, rec: Record) -> None:
        if rec.module not in PRIORITY:
            raise ValueError(f"unknown module {rec.module!r}")
        self.pending.append(rec)

    def flush(self) -> List[Record]:
        out = sorted(self.pending, key=lambda r: PRIORITY[r.module])
        self.pending = []
        return out


def parse_lines(lines: Sequence[str]) -> Tuple[Dict[str, Any], List[Dict[str, Any]]]:
    """Header and raw record dicts; raises LogFormatError on anything malformed."""
    if not lines:
        raise LogFormatError("empty log")
    try:
        header = json.loads(lines[0])
    except json.JSONDecodeError as exc:
        raise LogFormatError(f"line 1: {exc}") from None
    if not isinstance(header, dict) or header.get("format") != LOG_FORMAT:
        raise LogFormatError("line 1: not a companion-av log header")
    for key in ("scenario", "seed"):
        if key not in header:
            raise LogFormatError(f"line 1: header lacks {key!r}")
    records = []
    for i, raw in enumerate(lines[1:], start=2):
        try:
            rec = json.loads(raw)
        except json.JSONDecodeError as exc:
            raise LogFormatError(f"line {i}: {exc}") from None
        if not isinstance(rec, dict) or not {"tick", "module", "type", "payload"} <= rec.keys():
            raise LogFormatError(f"line {i}: record lacks tick/module/type/payload")
        records.append(rec)
    return header, records


def read_log(path) -> Tuple[Dict[str, Any], List[Dict[str, Any]], List[str]]:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise LogFormatError(str(exc)) from None
    lines = [l for l in text.split("\n") if l]
    header, records = parse_lines(lines)
    return header, records, lines


# ---------------------------------------------------------------------------
# Audits over raw records


def _raw(records: Iterable) -> List[Dict[str, Any]]:
    return [json.loads(r.line()) if isinstance(r, Record) else r for r in records]


def audit_order(records: Iterable) -> List[str]:
    """Records must be ordered by tick, then module priority."""
    out = []
    prev = None
    for i, r in enumerate(_raw(records)):
        key = (r["tick"], PRIORITY.get(r["module"], -1))
        if key[1] < 0:
            out.append(f"record {i}: unknown module {r['module']}")
        if prev is not None and key < prev:
            out.append(f"record {i}: {key} precedes {prev}")
        prev = key
    return out


def audit_hierarchy(records: Iterable) -> List[str]:
    """Every cross-level record must follow an adjacent command or report edge."""
    out = []
    for i, r in enumerate(_raw(records)):
        flow = r.get("flow")
        if flow is None:
            continue
        edge = (r["module"], flow.get("to"))
        allowed = COMMAND_EDGES if flow.get("kind") == "command" else REPORT_EDGES if flow.get("kind") == "report" else ()
        if edge not in allowed:
            out.append(f"record {i} at tick {r['tick']}: {flow.get('kind')} edge {edge[0]}->{edge[1]}")
    return out
