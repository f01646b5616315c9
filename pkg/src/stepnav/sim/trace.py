"""Per-step episode records and their CSV/JSONL serialization."""

from __future__ import annotations

import csv
import json
from dataclasses import asdict, dataclass, field

from ..errors import StepnavError


@dataclass
class StepRecord:
    index: int
    kind: str                       # walk | turn | stop | stand
    coarse_cell: tuple
    heading: int                    # sixteenth of a circle
    waypoint: tuple                 # fine cell
    d: float
    delta_theta: float
    v_apex: float
    v_switch: float
    t_total: float
    dy1: float
    dy2: float
    side_sign: float
    certified: bool
    verdicts: dict
    t_nd: str = "nominal"
    correction: int = 0             # lateral fine cells of waypoint shift
    recovery: dict | None = None
    disturbance: tuple | None = None
    obstacles: list = field(default_factory=list)
    belief: list = field(default_factory=list)
    com_samples: list = field(default_factory=list)
    time: float = 0.0


@dataclass
class Trace:
    steps: list = field(default_factory=list)
    collisions: int = 0
    uncertified: int = 0
    corrections: int = 0
    recoveries: int = 0
    goals_completed: int = 0
    turns: int = 0
    aborted: str | None = None
    meta: dict = field(default_factory=dict)

    def summary(self) -> dict:
        return {
            "steps": len(self.steps),
            "turns": self.turns,
            "collisions": self.collisions,
            "uncertified": self.uncertified,
            "waypoint_corrections": self.corrections,
            "recoveries": self.recoveries,
            "goals_completed": self.goals_completed,
            "aborted": self.aborted,
        }


CSV_FIELDS = ["index", "kind", "coarse_cell", "heading", "waypoint", "d",
              "delta_theta", "v_apex", "v_switch", "t_total", "dy1", "dy2",
              "side_sign", "certified", "t_nd", "correction", "time"]


def emit_trace(trace: Trace, path, fmt: str = "jsonl") -> None:
    """Write the trace; identical traces produce identical bytes."""
    if not trace.steps:
        raise StepnavError("refusing to emit an empty trace")
    if fmt == "jsonl":
        with open(path, "w") as fh:
            fh.write(json.dumps({"meta": trace.meta,
                                 "summary": trace.summary()},
                                sort_keys=True) + "\n")
            for s in trace.steps:
                fh.write(json.dumps(asdict(s), sort_keys=True) + "\n")
    elif fmt == "csv":
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(CSV_FIELDS)
            for s in trace.steps:
                d = asdict(s)
                w.writerow([d[k] for k in CSV_FIELDS])
    else:
        raise ValueError(f"unknown trace format {fmt!r}")


def parse_jsonl(path) -> Trace:
    with open(path) as fh:
        lines = fh.read().splitlines()
    head = json.loads(lines[0])
    trace = Trace(meta=head["meta"])
    for line in lines[1:]:
        d = json.loads(line)
        d["coarse_cell"] = tuple(d["coarse_cell"])
        d["waypoint"] = tuple(d["waypoint"])
        if d.get("disturbance") is not None:
            d["disturbance"] = tuple(d["disturbance"])
        trace.steps.append(StepRecord(**d))
    s = head["summary"]
    trace.collisions = s["collisions"]
    trace.uncertified = s["uncertified"]
    trace.corrections = s["waypoint_corrections"]
    trace.recoveries = s["recoveries"]
    trace.goals_completed = s["goals_completed"]
    trace.turns = s["turns"]
    trace.aborted = s["aborted"]
    return trace
