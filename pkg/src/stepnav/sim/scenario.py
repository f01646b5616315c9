"""Scenario files: schema, validation, and loading with overrides."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

from ..decider import DeciderConfig
from ..errors import ParseError, ValidationError
from ..games.world import CoarseWorld
from ..reach import DEFAULT_EXECUTION_DISTURBANCE, DisturbanceBound, GridSpec
from ..rom import GRAVITY, PipmParams
from ..safety import SafetyParams

FORMAT = "stepnav-scenario/1"


@dataclass
class Scenario:
    name: str
    world: CoarseWorld
    safety: SafetyParams
    pipm: PipmParams
    decider: DeciderConfig
    grid: GridSpec
    synth_dist: DisturbanceBound
    exec_dist: DisturbanceBound
    robot_init: tuple
    robot_heading: str
    obstacles: list
    obstacle_policy: dict
    disturbances: list               # (step index, dx, dxdot)
    seed: int = 0
    sample_dt: float = 0.01          # trace sampling period
    standstill_v: float = 0.05
    max_block: int = 25              # console fairness cap on blocking turns
    belief: bool = True
    raw: dict = field(default_factory=dict, repr=False)


def apply_overrides(doc: dict, overrides) -> dict:
    """key.path=value pairs applied to the parsed document."""
    for item in overrides or []:
        if "=" not in item:
            raise ValidationError("override", f"expected key=value, got {item!r}")
        key, value = item.split("=", 1)
        try:
            value = json.loads(value)
        except json.JSONDecodeError:
            pass  # keep as string
        node = doc
        parts = key.split(".")
        for p in parts[:-1]:
            node = node.setdefault(p, {})
        node[parts[-1]] = value
    return doc


def _build_world(doc: dict) -> CoarseWorld:
    try:
        return CoarseWorld(
            width=doc["width"], height=doc["height"],
            cell_size=doc.get("cell_size", 2.7),
            static_obstacles=frozenset(map(tuple, doc.get("static_obstacles", []))),
            goals=tuple(map(tuple, doc["goals"])),
            belief_regions=tuple(frozenset(map(tuple, r))
                                 for r in doc.get("belief_regions", [])),
            terrain_height=tuple((tuple(c), h)
                                 for c, h in doc.get("terrain_height", [])),
            visibility_radius=doc.get("visibility_radius", 2.5),
            fine_n=doc.get("fine_n", 26),
        )
    except (KeyError, TypeError) as exc:
        raise ValidationError("world", str(exc)) from exc
    except ValueError as exc:
        raise ValidationError("world", str(exc)) from exc


def load_scenario(source, overrides=None) -> Scenario:
    """Parse, apply overrides, then cross-validate a scenario document."""
    if isinstance(source, dict):
        doc = json.loads(json.dumps(source))
    else:
        path = Path(source)
        if not path.exists():
            raise ParseError(f"scenario file {path} does not exist")
        try:
            doc = json.loads(path.read_text())
        except json.JSONDecodeError as exc:
            raise ParseError(f"{path}: {exc}") from exc
    if doc.get("format") != FORMAT:
        raise ValidationError("format", f"expected {FORMAT!r}, got "
                                        f"{doc.get('format')!r}")
    doc = apply_overrides(doc, overrides)

    world = _build_world(doc.get("world", {}))

    rom = doc.get("rom", {})
    gravity = rom.get("gravity", GRAVITY)
    omega = rom.get("omega")
    h_apex = rom.get("h_apex")
    if omega is None and h_apex is None:
        raise ValidationError("rom", "need omega or h_apex")
    try:
        if omega is not None and h_apex is not None:
            pipm = PipmParams(omega=omega, h_apex=h_apex, gravity=gravity)
        elif omega is not None:
            pipm = PipmParams.from_omega(omega, gravity=gravity)
        else:
            pipm = PipmParams.from_apex_height(h_apex, gravity=gravity)
    except ValueError as exc:
        raise ValidationError("rom", str(exc)) from exc

    saf = doc.get("safety", {})
    try:
        safety = SafetyParams(
            v_apex_min=saf.get("v_apex_min", 0.2),
            v_apex_max=saf.get("v_apex_max", 0.7),
            v_max=saf.get("v_max", 1.5),
            omega=pipm.omega,
        )
    except ValueError as exc:
        raise ValidationError("safety", str(exc)) from exc

    dec = doc.get("decider", {})
    try:
        decider = DeciderConfig(**dec)
    except (TypeError, ValueError) as exc:
        raise ValidationError("decider", str(exc)) from exc

    if decider.b_safety >= world.cell_size * world.width / 2:
        raise ValidationError(
            "decider.b_safety",
            f"{decider.b_safety} m leaves no interior cells on a "
            f"{world.width}-cell-wide grid")

    g = doc.get("grid", {})
    try:
        grid = GridSpec(
            x_min=g.get("x_min", -0.12), x_max=g.get("x_max", 0.8),
            xdot_min=g.get("xdot_min", 0.0), xdot_max=g.get("xdot_max", 1.45),
            dx=g.get("dx", 0.004), dxdot=g.get("dxdot", 0.008),
            dt=g.get("dt", 0.025),
        )
    except ValueError as exc:
        raise ValidationError("grid", str(exc)) from exc

    dist = doc.get("disturbance", {})
    synth_dist = DisturbanceBound(dist.get("synth_pos", 0.01),
                                  dist.get("synth_vel", 0.02), "synthesis")
    exec_dist = DisturbanceBound(
        dist.get("exec_pos", DEFAULT_EXECUTION_DISTURBANCE[0]),
        dist.get("exec_vel", DEFAULT_EXECUTION_DISTURBANCE[1]), "execution")

    robot = doc.get("robot", {})
    robot_init = tuple(robot.get("cell", (0, 0)))
    if not world.is_free(robot_init):
        raise ValidationError("robot.cell", f"{robot_init} is not a free cell")
    heading = robot.get("heading", "E")
    if heading not in ("N", "E", "S", "W"):
        raise ValidationError("robot.heading", f"bad heading {heading!r}")

    obstacles = [tuple(c) for c in doc.get("obstacles", [])]
    for o in obstacles:
        if not world.is_free(o):
            raise ValidationError("obstacles", f"{o} is not a free cell")

    policy = doc.get("obstacle_policy") or {"kind": "scripted", "path": []}
    if policy.get("kind") not in ("scripted", "random", "retreat", "console"):
        raise ValidationError("obstacle_policy.kind",
                              f"unknown kind {policy.get('kind')!r}")

    disturbances = [tuple(d) for d in doc.get("disturbances", [])]
    for d in disturbances:
        if len(d) != 3:
            raise ValidationError("disturbances",
                                  f"expected [step, dx, dxdot], got {d}")

    return Scenario(
        name=doc.get("name", "scenario"),
        world=world, safety=safety, pipm=pipm, decider=decider, grid=grid,
        synth_dist=synth_dist, exec_dist=exec_dist,
        robot_init=robot_init, robot_heading=heading,
        obstacles=obstacles, obstacle_policy=policy,
        disturbances=disturbances,
        seed=doc.get("seed", 0),
        sample_dt=doc.get("sample_dt", 0.01),
        standstill_v=doc.get("standstill_v", 0.05),
        max_block=doc.get("max_block", 25),
        belief=doc.get("belief", True),
        raw=doc,
    )


def bundled_scenario_path(name: str) -> Path:
    base = resources.files("stepnav").joinpath("data")
    return Path(str(base.joinpath(f"{name}.json")))
