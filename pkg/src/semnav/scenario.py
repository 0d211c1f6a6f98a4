"""Scenario files: strict versioned schema, loading, saving, bundled worlds.

A scenario file is YAML with a ``version`` field; unknown keys are rejected
so schema drift fails fast. Polygons are flat lists of [x, y] vertex pairs in
counterclockwise order, meters.
"""

import math
from importlib import resources

import numpy as np
import yaml

from semnav.errors import ScenarioError
from semnav.control import Gains
from semnav.sim import RobotSpec, Scenario, SemanticEvent
from semnav.world import FamiliarObstacle, ObstacleCatalog, SensorSpec, UnknownObstacle

SCHEMA_VERSION = 1

_TOP_KEYS = {
    "version", "name", "seed", "workspace", "robot", "sensor", "gains",
    "familiar", "unknown", "goal", "target", "events", "integration",
    "margins", "clamp_target",
}
_ROBOT_KEYS = {"radius", "dynamics", "start", "heading"}
_SENSOR_KEYS = {"range", "angular_resolution"}
_GAINS_KEYS = {"k", "k_v", "k_omega"}
_FAMILIAR_KEYS = {"label", "polygon", "pose", "known_at_start"}
_UNKNOWN_KEYS = {"polygon"}
_TARGET_KEYS = {"waypoints", "speed", "loop"}
_EVENT_KEYS = {"action", "time", "region", "point"}
_INTEGRATION_KEYS = {"dt", "horizon"}
_MARGINS_KEYS = {"clearance"}


def _require_keys(mapping, allowed, context):
    if not isinstance(mapping, dict):
        raise ScenarioError(f"{context}: expected a mapping, got {type(mapping).__name__}")
    extra = set(mapping) - allowed
    if extra:
        raise ScenarioError(f"{context}: unknown field(s) {sorted(extra)}")


def _polygon(data, context):
    try:
        arr = np.asarray(data, dtype=float)
    except (TypeError, ValueError) as exc:
        raise ScenarioError(f"{context}: not a number array: {exc}") from exc
    if arr.ndim != 2 or arr.shape[1] != 2 or len(arr) < 3:
        raise ScenarioError(f"{context}: need at least 3 [x, y] pairs")
    return arr


def _point(data, context):
    arr = np.asarray(data, dtype=float)
    if arr.shape != (2,):
        raise ScenarioError(f"{context}: expected [x, y]")
    return tuple(float(v) for v in arr)


def scenario_from_dict(data: dict) -> Scenario:
    _require_keys(data, _TOP_KEYS, "scenario")
    if data.get("version") != SCHEMA_VERSION:
        raise ScenarioError(
            f"scenario: unsupported version {data.get('version')!r} (expected {SCHEMA_VERSION})"
        )
    if "workspace" not in data:
        raise ScenarioError("scenario: missing workspace")

    robot_data = data.get("robot", {})
    _require_keys(robot_data, _ROBOT_KEYS, "robot")
    robot = RobotSpec(
        radius=float(robot_data.get("radius", 0.2)),
        dynamics=robot_data.get("dynamics", "fully_actuated"),
        start=_point(robot_data.get("start", [0.0, 0.0]), "robot.start"),
        heading=float(robot_data.get("heading", 0.0)),
    )

    sensor_data = data.get("sensor", {})
    _require_keys(sensor_data, _SENSOR_KEYS, "sensor")
    sensor = SensorSpec(
        range=float(sensor_data.get("range", 3.0)),
        angular_resolution=float(sensor_data.get("angular_resolution", 0.15)),
    )

    gains_data = data.get("gains", {})
    _require_keys(gains_data, _GAINS_KEYS, "gains")
    gains = Gains(
        k=float(gains_data.get("k", 1.0)),
        k_v=float(gains_data.get("k_v", 1.0)),
        k_omega=float(gains_data.get("k_omega", 2.0)),
    )

    familiar = []
    for i, item in enumerate(data.get("familiar", []) or []):
        _require_keys(item, _FAMILIAR_KEYS, f"familiar[{i}]")
        if "label" not in item or "polygon" not in item:
            raise ScenarioError(f"familiar[{i}]: needs label and polygon")
        pose = item.get("pose", [0.0, 0.0, 0.0])
        if len(pose) != 3:
            raise ScenarioError(f"familiar[{i}].pose: expected [x, y, theta]")
        familiar.append(
            FamiliarObstacle(
                label=str(item["label"]),
                template=_polygon(item["polygon"], f"familiar[{i}].polygon"),
                pose=tuple(float(v) for v in pose),
                known_at_start=bool(item.get("known_at_start", False)),
            )
        )
    unknown = []
    for i, item in enumerate(data.get("unknown", []) or []):
        _require_keys(item, _UNKNOWN_KEYS, f"unknown[{i}]")
        unknown.append(UnknownObstacle(polygon=_polygon(item["polygon"], f"unknown[{i}].polygon")))

    goal = _point(data["goal"], "goal") if data.get("goal") is not None else None
    target = None
    if data.get("target") is not None:
        _require_keys(data["target"], _TARGET_KEYS, "target")
        target = {
            "waypoints": _polygon(data["target"]["waypoints"], "target.waypoints")
            if len(data["target"].get("waypoints", [])) >= 3
            else np.asarray(data["target"]["waypoints"], float),
            "speed": float(data["target"].get("speed", 0.3)),
            "loop": bool(data["target"].get("loop", False)),
        }
        if target["waypoints"].ndim != 2 or target["waypoints"].shape[1] != 2:
            raise ScenarioError("target.waypoints: expected [x, y] pairs")

    events = []
    for i, item in enumerate(data.get("events", []) or []):
        _require_keys(item, _EVENT_KEYS, f"events[{i}]")
        action = item.get("action")
        if action not in ("stop_and_return", "halt", "retarget"):
            raise ScenarioError(f"events[{i}].action: unknown action {action!r}")
        if action == "retarget" and "point" not in item:
            raise ScenarioError(f"events[{i}]: retarget needs a point")
        if "time" not in item and "region" not in item:
            raise ScenarioError(f"events[{i}]: needs a time or region trigger")
        events.append(
            SemanticEvent(
                action=action,
                time=float(item["time"]) if "time" in item else None,
                region=_polygon(item["region"], f"events[{i}].region")
                if "region" in item
                else None,
                retarget=_point(item["point"], f"events[{i}].point")
                if "point" in item
                else None,
            )
        )

    integ = data.get("integration", {})
    _require_keys(integ, _INTEGRATION_KEYS, "integration")
    margins = data.get("margins", {})
    _require_keys(margins, _MARGINS_KEYS, "margins")

    return Scenario(
        name=str(data.get("name", "unnamed")),
        workspace=_polygon(data["workspace"], "workspace"),
        catalog=ObstacleCatalog(familiar=tuple(familiar), unknown=tuple(unknown)),
        robot=robot,
        sensor=sensor,
        gains=gains,
        goal=goal,
        target=target,
        events=tuple(events),
        dt=float(integ.get("dt", 1.0 / 300.0)),
        horizon=float(integ.get("horizon", 60.0)),
        clearance_margin=float(margins.get("clearance", 0.1)),
        seed=int(data.get("seed", 0)),
        clamp_target=bool(data.get("clamp_target", True)),
    )


def scenario_to_dict(sc: Scenario) -> dict:
    out = {
        "version": SCHEMA_VERSION,
        "name": sc.name,
        "seed": sc.seed,
        "workspace": [[float(a), float(b)] for a, b in sc.workspace],
        "robot": {
            "radius": sc.robot.radius,
            "dynamics": sc.robot.dynamics,
            "start": list(sc.robot.start),
            "heading": sc.robot.heading,
        },
        "sensor": {
            "range": sc.sensor.range,
            "angular_resolution": sc.sensor.angular_resolution,
        },
        "gains": {"k": sc.gains.k, "k_v": sc.gains.k_v, "k_omega": sc.gains.k_omega},
        "integration": {"dt": sc.dt, "horizon": sc.horizon},
        "margins": {"clearance": sc.clearance_margin},
        "clamp_target": sc.clamp_target,
    }
    if sc.catalog.familiar:
        out["familiar"] = [
            {
                "label": f.label,
                "polygon": [[float(a), float(b)] for a, b in f.template],
                "pose": list(f.pose),
                "known_at_start": f.known_at_start,
            }
            for f in sc.catalog.familiar
        ]
    if sc.catalog.unknown:
        out["unknown"] = [
            {"polygon": [[float(a), float(b)] for a, b in u.polygon]}
            for u in sc.catalog.unknown
        ]
    if sc.goal is not None:
        out["goal"] = list(sc.goal)
    if sc.target is not None:
        out["target"] = {
            "waypoints": [[float(a), float(b)] for a, b in sc.target["waypoints"]],
            "speed": sc.target["speed"],
            "loop": sc.target.get("loop", False),
        }
    if sc.events:
        out["events"] = []
        for e in sc.events:
            item = {"action": e.action}
            if e.time is not None:
                item["time"] = e.time
            if e.region is not None:
                item["region"] = [[float(a), float(b)] for a, b in e.region]
            if e.retarget is not None:
                item["point"] = list(e.retarget)
            out["events"].append(item)
    return out


def load_scenario(path) -> Scenario:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            data = yaml.safe_load(fh)
    except yaml.YAMLError as exc:
        raise ScenarioError(f"{path}: YAML parse error: {exc}") from exc
    if not isinstance(data, dict):
        raise ScenarioError(f"{path}: scenario file must contain a mapping")
    try:
        return scenario_from_dict(data)
    except ScenarioError as exc:
        raise ScenarioError(f"{path}: {exc}") from exc


def save_scenario(sc: Scenario, path):
    with open(path, "w", encoding="utf-8") as fh:
        yaml.safe_dump(scenario_to_dict(sc), fh, sort_keys=False)


# -- bundled worlds --------------------------------------------------------------


def _rect(w, h):
    return [[-w / 2, -h / 2], [w / 2, -h / 2], [w / 2, h / 2], [-w / 2, h / 2]]


def make_empty(dynamics="fully_actuated", goal=(3.0, 1.0)) -> Scenario:
    """Obstacle-free box for reduction tests."""
    return Scenario(
        name="empty",
        workspace=np.array([[-6.0, -6.0], [6.0, -6.0], [6.0, 6.0], [-6.0, 6.0]]),
        catalog=ObstacleCatalog(),
        robot=RobotSpec(radius=0.2, dynamics=dynamics, start=(0.0, 0.0)),
        sensor=SensorSpec(range=8.0),
        gains=Gains(k=1.0, k_v=1.0, k_omega=2.0),
        goal=goal,
        dt=0.01,
        horizon=40.0,
    )


def make_apartment(dynamics="fully_actuated", start=(1.0, 1.2), goal=(11.0, 7.9)) -> Scenario:
    """Indoor layout: free-standing interior walls with known pose, catalogued
    furniture of unknown pose, and one alcove notch in the outer wall."""
    workspace = np.array(
        [
            [0.0, 0.0],
            [9.0, 0.0], [9.0, 0.8], [9.6, 0.8], [9.6, 0.0],
            [12.0, 0.0],
            [12.0, 9.0],
            [0.0, 9.0],
        ]
    )
    familiar = (
        FamiliarObstacle("wall_a_low", np.array(_rect(0.3, 2.4)), (5.75, 1.7, 0.0),
                         known_at_start=True),
        FamiliarObstacle("wall_a_high", np.array(_rect(0.3, 3.4)), (5.75, 7.0, 0.0),
                         known_at_start=True),
        FamiliarObstacle("wall_b_low", np.array(_rect(0.3, 2.0)), (8.75, 1.5, 0.0),
                         known_at_start=True),
        FamiliarObstacle("wall_b_high", np.array(_rect(0.3, 3.4)), (8.75, 6.8, 0.0),
                         known_at_start=True),
        FamiliarObstacle("table", np.array(_rect(1.4, 0.9)), (2.4, 5.6, 0.4)),
        FamiliarObstacle("crate", np.array(_rect(1.0, 1.0)), (3.2, 2.4, -0.3)),
        FamiliarObstacle(
            "couch",
            np.array([[0, 0], [2.0, 0], [2.0, 0.8], [1.4, 0.8], [1.4, 1.6], [0, 1.6]]) - [1.0, 0.8],
            (10.6, 3.4, 1.57),
        ),
        FamiliarObstacle("cart", np.array(_rect(0.8, 1.2)), (7.3, 7.4, 0.2)),
    )
    return Scenario(
        name="apartment",
        workspace=workspace,
        catalog=ObstacleCatalog(familiar=familiar),
        robot=RobotSpec(radius=0.2, dynamics=dynamics, start=start),
        sensor=SensorSpec(range=2.5),
        gains=Gains(k=1.5, k_v=1.5, k_omega=3.0),
        goal=goal,
        dt=0.01,
        horizon=120.0,
    )


def make_room(dynamics="fully_actuated", start=(-4.0, -2.8), goal=(4.1, 2.9)) -> Scenario:
    """Room cluttered with familiar non-convex and unknown convex obstacles."""
    workspace = np.array([[-5.0, -4.0], [5.0, -4.0], [5.0, 4.0], [-5.0, 4.0]])
    familiar = (
        FamiliarObstacle(
            "ushape",
            np.array([[0, 0], [2.4, 0], [2.4, 1.8], [1.6, 1.8], [1.6, 0.7],
                      [0.8, 0.7], [0.8, 1.8], [0.0, 1.8]]) - [1.2, 0.9],
            (-1.7, 0.6, 0.5),
        ),
        FamiliarObstacle("crate", np.array(_rect(1.1, 0.9)), (2.1, -1.9, 0.25)),
    )
    unknown = (
        UnknownObstacle(np.array([[1.2, 1.3], [2.2, 1.1], [2.8, 1.9], [2.0, 2.6], [1.2, 2.2]])),
        UnknownObstacle(np.array(_rect(0.9, 0.9)) + [-1.6, -2.4]),
    )
    return Scenario(
        name="room",
        workspace=workspace,
        catalog=ObstacleCatalog(familiar=familiar, unknown=unknown),
        robot=RobotSpec(radius=0.2, dynamics=dynamics, start=start),
        sensor=SensorSpec(range=2.2),
        gains=Gains(k=1.2, k_v=1.2, k_omega=2.5),
        goal=goal,
        dt=0.01,
        horizon=90.0,
    )


def make_narrow_passage(gap_factor: float = 1.5, dynamics="fully_actuated") -> Scenario:
    """Two familiar blocks forming a corridor of gap_factor x robot diameter."""
    robot_radius = 0.25
    diameter = 2 * robot_radius
    gap = gap_factor * diameter
    block = np.array(_rect(2.0, 1.6))
    y_off = gap / 2 + 0.8
    workspace = np.array([[0.0, -3.0], [10.0, -3.0], [10.0, 3.0], [0.0, 3.0]])
    familiar = (
        FamiliarObstacle("block_top", block, (5.0, y_off, 0.0)),
        FamiliarObstacle("block_bottom", block, (5.0, -y_off, 0.0)),
    )
    return Scenario(
        name=f"narrow_{gap_factor:g}",
        workspace=workspace,
        catalog=ObstacleCatalog(familiar=familiar),
        robot=RobotSpec(radius=robot_radius, dynamics=dynamics, start=(1.0, 0.0)),
        sensor=SensorSpec(range=2.5),
        gains=Gains(k=1.0, k_v=1.0, k_omega=2.5),
        goal=(9.0, 0.0),
        dt=0.01,
        horizon=120.0,
        clearance_margin=0.02,
    )


def make_trap(dynamics="fully_actuated", start=(-3.5, 0.0)) -> Scenario:
    """Non-convex unknown obstacle whose pocket traps head-on approaches."""
    workspace = np.array([[-5.0, -4.0], [5.0, -4.0], [5.0, 4.0], [-5.0, 4.0]])
    pocket = np.array(
        [[0.0, -1.2], [1.4, -1.2], [1.4, 1.2], [0.0, 1.2],
         [0.0, 0.8], [1.0, 0.8], [1.0, -0.8], [0.0, -0.8]]
    )
    unknown = (UnknownObstacle(pocket),)
    return Scenario(
        name="trap",
        workspace=workspace,
        catalog=ObstacleCatalog(unknown=unknown),
        robot=RobotSpec(radius=0.2, dynamics=dynamics, start=start),
        sensor=SensorSpec(range=2.0),
        gains=Gains(k=1.0),
        goal=(3.8, 0.0),
        dt=0.01,
        horizon=60.0,
    )


def make_stop_and_return(dynamics="fully_actuated") -> Scenario:
    """Track a moving target until the scripted stop signal, then return."""
    workspace = np.array([[-6.0, -4.0], [6.0, -4.0], [6.0, 4.0], [-6.0, 4.0]])
    familiar = (FamiliarObstacle("crate", np.array(_rect(1.2, 1.0)), (0.0, 1.6, 0.3)),)
    return Scenario(
        name="stop_and_return",
        workspace=workspace,
        catalog=ObstacleCatalog(familiar=familiar),
        robot=RobotSpec(radius=0.2, dynamics=dynamics, start=(-4.5, -2.5)),
        sensor=SensorSpec(range=3.0),
        gains=Gains(k=1.5, k_v=1.5, k_omega=3.0),
        target={
            "waypoints": np.array([[-2.0, -2.0], [2.0, -2.2], [4.2, 0.0], [2.0, 2.4], [-2.5, 2.0]]),
            "speed": 0.35,
            "loop": True,
        },
        events=(SemanticEvent(action="stop_and_return", time=9.0),),
        dt=0.01,
        horizon=80.0,
    )


_BUILDERS = {
    "empty": make_empty,
    "apartment": make_apartment,
    "room": make_room,
    "narrow": make_narrow_passage,
    "trap": make_trap,
    "stop_and_return": make_stop_and_return,
}


def bundled(name: str, **kwargs) -> Scenario:
    if name not in _BUILDERS:
        raise ScenarioError(f"unknown bundled scenario {name!r}; have {sorted(_BUILDERS)}")
    return _BUILDERS[name](**kwargs)


def bundled_names():
    return sorted(_BUILDERS)


def resolve_scenario(spec: str) -> Scenario:
    """Either a path to a YAML scenario file or a bundled scenario name."""
    import os

    if os.path.exists(spec):
        return load_scenario(spec)
    if spec in _BUILDERS:
        return bundled(spec)
    raise ScenarioError(f"scenario {spec!r}: no such file or bundled name")


def apply_gap_width(sc: Scenario, gap_factor: float) -> Scenario:
    """Re-pose a two-block corridor scenario to the given gap factor."""
    if len(sc.catalog.familiar) != 2:
        raise ScenarioError("gap-width sweeps need exactly two familiar obstacles")
    diameter = 2 * sc.robot.radius
    gap = gap_factor * diameter
    new_familiar = []
    for fam in sc.catalog.familiar:
        half_height = (fam.template[:, 1].max() - fam.template[:, 1].min()) / 2
        x, y, theta = fam.pose
        sign = 1.0 if y >= 0 else -1.0
        new_familiar.append(
            FamiliarObstacle(fam.label, fam.template,
                             (x, sign * (gap / 2 + half_height), theta),
                             fam.known_at_start)
        )
    from dataclasses import replace

    return replace(
        sc,
        name=f"{sc.name.split('_')[0]}_{gap_factor:g}",
        catalog=ObstacleCatalog(familiar=tuple(new_familiar), unknown=sc.catalog.unknown),
    )
