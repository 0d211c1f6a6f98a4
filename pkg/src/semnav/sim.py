"""Closed-loop episodes: integration, sensing guards, targets, events, traces.

One step runs sense -> guards -> control -> RK4 integration of the closed
loop -> target update (clamped to the non-adversarial speed bound) -> event
dispatch -> record. The physical state is continuous across mode switches;
only the model-space image jumps. Fixed-step RK4 keeps episodes bit-for-bit
reproducible for a given scenario.
"""

import math
import time
from dataclasses import dataclass, field, replace

import numpy as np

from semnav.errors import DomainError, ScenarioError
from semnav.control import (
    ControlCommand,
    Gains,
    TargetState,
    control_fully_actuated,
    control_unicycle,
    nonadversarial_check,
)
from semnav.diffeo import full_map, full_map_and_jacobian
from semnav.world import ObstacleCatalog, SensorSpec, WorldState

CONVERGENCE_TOL = 1e-3
SPURIOUS_FIELD_TOL = 1e-8
SPURIOUS_DISTANCE_TOL = 1e-2
MIN_CLEARANCE = 1e-4


@dataclass(frozen=True)
class RobotSpec:
    radius: float = 0.2
    dynamics: str = "fully_actuated"  # or "unicycle"
    start: tuple[float, float] = (0.0, 0.0)
    heading: float = 0.0

    def __post_init__(self):
        if self.dynamics not in ("fully_actuated", "unicycle"):
            raise ScenarioError(f"unknown dynamics {self.dynamics!r}")
        if self.radius <= 0:
            raise ScenarioError("robot radius must be positive")


class TargetTrack:
    """Piecewise-linear moving target with a constant commanded speed."""

    def __init__(self, waypoints, speed: float, loop: bool = False):
        self.waypoints = np.asarray(waypoints, float)
        if self.waypoints.ndim != 2 or len(self.waypoints) < 2:
            raise ScenarioError("a target script needs at least two waypoints")
        self.speed = float(speed)
        self.loop = loop
        self.segment = 0
        self.along = 0.0

    @property
    def done(self) -> bool:
        return not self.loop and self.segment >= len(self.waypoints) - 1

    def position(self) -> np.ndarray:
        if self.done:
            return self.waypoints[-1].copy()
        a = self.waypoints[self.segment]
        b = self.waypoints[(self.segment + 1) % len(self.waypoints)]
        length = float(np.linalg.norm(b - a))
        t = 0.0 if length == 0 else min(self.along / length, 1.0)
        return a + t * (b - a)

    def direction(self) -> np.ndarray:
        if self.done:
            return np.zeros(2)
        a = self.waypoints[self.segment]
        b = self.waypoints[(self.segment + 1) % len(self.waypoints)]
        length = float(np.linalg.norm(b - a))
        return (b - a) / length if length > 0 else np.zeros(2)

    def advance(self, dist: float):
        remaining = dist
        while remaining > 0 and not self.done:
            a = self.waypoints[self.segment]
            b = self.waypoints[(self.segment + 1) % len(self.waypoints)]
            length = float(np.linalg.norm(b - a))
            room = length - self.along
            if remaining < room:
                self.along += remaining
                return
            remaining -= room
            self.along = 0.0
            self.segment += 1
            if self.loop:
                self.segment %= len(self.waypoints)
            elif self.segment >= len(self.waypoints) - 1:
                return


@dataclass
class SemanticEvent:
    """One-shot scripted trigger mutating the goal specification."""

    action: str  # "stop_and_return" | "halt" | "retarget"
    time: float | None = None
    region: np.ndarray | None = None
    retarget: tuple[float, float] | None = None
    fired: bool = False

    def triggered(self, t: float, x) -> bool:
        if self.fired:
            return False
        if self.time is not None and t >= self.time:
            return True
        if self.region is not None:
            from semnav.geometry import polygon_contains

            return bool(polygon_contains(self.region, np.asarray(x)[None, :])[0])
        return False


@dataclass(frozen=True)
class Scenario:
    """Everything needed to reproduce an episode."""

    name: str
    workspace: np.ndarray
    catalog: ObstacleCatalog
    robot: RobotSpec
    sensor: SensorSpec
    gains: Gains = Gains()
    goal: tuple[float, float] | None = None
    target: dict | None = None  # waypoints/speed/loop
    events: tuple = ()
    dt: float = 1.0 / 300.0
    horizon: float = 60.0
    clearance_margin: float = 0.1
    seed: int = 0
    clamp_target: bool = True
    max_speed: float = 2.5
    max_turn_rate: float = 8.0

    def __post_init__(self):
        if self.dt <= 0 or self.horizon <= 0:
            raise ScenarioError("dt and horizon must be positive")
        if self.goal is None and self.target is None:
            raise ScenarioError("scenario needs a goal or a target script")


@dataclass
class TraceRecord:
    t: float
    x: np.ndarray
    psi: float
    model: np.ndarray
    lyapunov: float
    clearance: float
    n_modes: int
    event: str = ""


@dataclass
class Trace:
    records: list[TraceRecord] = field(default_factory=list)
    status: str = "running"  # converged | horizon | spurious-equilibrium | halted | error

    def to_csv(self) -> str:
        lines = ["t,x,y,psi,hx,hy,V,clearance,n_modes,event"]
        for r in self.records:
            lines.append(
                f"{r.t:.9f},{r.x[0]!r},{r.x[1]!r},{r.psi!r},{r.model[0]!r},"
                f"{r.model[1]!r},{r.lyapunov!r},{r.clearance!r},{r.n_modes},{r.event}"
            )
        return "\n".join(lines) + "\n"


@dataclass
class Metrics:
    status: str
    path_length: float
    min_clearance: float
    time_to_goal: float
    lyapunov_violations: int
    mode_switches: int
    mean_step_compute_ms: float
    steps: int

    def to_dict(self) -> dict:
        return {
            "status": self.status,
            "path_length": round(self.path_length, 9),
            "min_clearance": round(self.min_clearance, 9),
            "time_to_goal": round(self.time_to_goal, 9),
            "lyapunov_violations": self.lyapunov_violations,
            "mode_switches": self.mode_switches,
            "mean_step_compute_ms": round(self.mean_step_compute_ms, 6),
            "steps": self.steps,
        }


def _rk4_adaptive(f, state, dt, valid, depth: int = 0):
    """Fixed-step RK4, halving the step (up to 8 times) when a stage point or
    the step result leaves the valid domain of the field."""
    try:
        k1 = f(state)
        k2 = f(state + 0.5 * dt * k1)
        k3 = f(state + 0.5 * dt * k2)
        k4 = f(state + dt * k3)
        out = state + (dt / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        if not valid(out):
            raise DomainError("step result left the freespace")
        return out
    except DomainError:
        if depth >= 8:
            raise
        half = _rk4_adaptive(f, state, dt / 2.0, valid, depth + 1)
        return _rk4_adaptive(f, half, dt / 2.0, valid, depth + 1)


class Simulator:
    """Single-episode driver; deterministic for a fixed scenario."""

    def __init__(self, scenario: Scenario):
        self.scenario = scenario
        self.world = WorldState(
            scenario.workspace,
            scenario.catalog,
            scenario.sensor,
            scenario.robot.radius,
            scenario.clearance_margin,
        )
        self.x = np.asarray(scenario.robot.start, float)
        self.psi = float(scenario.robot.heading)
        if not self.world.in_freespace(self.x):
            raise ScenarioError(f"start position {self.x} is not in the freespace")
        self.track = (
            TargetTrack(
                scenario.target["waypoints"],
                scenario.target["speed"],
                scenario.target.get("loop", False),
            )
            if scenario.target
            else None
        )
        self.static_goal = (
            np.asarray(scenario.goal, float) if scenario.goal is not None else None
        )
        if self.static_goal is not None and not self.world.in_freespace(self.static_goal):
            raise ScenarioError("goal is not in the freespace")
        self.events = [replace(e) for e in scenario.events]
        self.t = 0.0
        self.trace = Trace()
        self.compute_times: list[float] = []
        self.start_position = self.x.copy()
        self._goal_override: np.ndarray | None = None
        self._halted = False

    # -- goal handling ----------------------------------------------------------

    def current_goal(self) -> np.ndarray:
        if self._goal_override is not None:
            return self._goal_override
        if self.track is not None:
            return self.track.position()
        return self.static_goal

    def goal_static(self) -> bool:
        if self._goal_override is not None:
            return True
        if self.track is not None:
            return self.track.done or self.track.speed == 0.0
        return True

    # -- stepping ---------------------------------------------------------------

    def _command(self, x, psi, goal, model) -> ControlCommand:
        if self.scenario.robot.dynamics == "unicycle":
            return control_unicycle(
                np.array([x[0], x[1], psi]), goal, self.world.chain, model,
                self.scenario.gains, self.world.sensor.range,
            )
        return control_fully_actuated(
            x, goal, self.world.chain, model, self.scenario.gains,
            self.world.sensor.range,
        )

    def _field(self, state, goal, model):
        # Integration refuses to evaluate the loop at physically invalid
        # states; the adaptive wrapper then resolves the boundary layer.
        if self.world.clearance(state[:2]) <= 0.0:
            raise DomainError("integration stage point left the freespace")
        # Commanded inputs saturate at the scenario's actuation limits: that
        # only reparametrizes time along the same integral curves, so descent
        # and invariance are untouched while fixed-step integration stays
        # stable where the pulled-back field is strongly expanded.
        if self.scenario.robot.dynamics == "unicycle":
            cmd = control_unicycle(
                state, goal, self.world.chain, model, self.scenario.gains,
                self.world.sensor.range,
            )
            cap = self.scenario.max_speed * min(1.0, 20.0 / max(cmd.jacobian_norm, 1.0))
            v = float(np.clip(cmd.v, -cap, cap))
            omega = float(
                np.clip(cmd.omega, -self.scenario.max_turn_rate, self.scenario.max_turn_rate)
            )
            return np.array([v * math.cos(state[2]), v * math.sin(state[2]), omega])
        cmd = control_fully_actuated(
            state, goal, self.world.chain, model, self.scenario.gains,
            self.world.sensor.range,
        )
        u = cmd.velocity
        # Where the deformation is strongly expanded the pulled-back field
        # varies on the inverse scale; cap the speed accordingly so the fixed
        # integration step resolves it (pure time reparametrization).
        cap = self.scenario.max_speed * min(1.0, 20.0 / max(cmd.jacobian_norm, 1.0))
        speed = float(np.linalg.norm(u))
        if speed > cap:
            u = u * (cap / speed)
        return u

    def step(self) -> TraceRecord:
        events = []
        dt = self.scenario.dt

        # Sense, fire guards, compute the command (timed portion).
        tic = time.perf_counter()
        report = self.world.sense(self.x, clip=False)
        if self.world.apply_guard(report):
            events.append(f"mode:{len(self.world.mode.instantiated)}")
        model = self.world.model_view(report)
        goal = self.current_goal()
        cmd = self._command(self.x, self.psi, goal, model)
        self.compute_times.append(time.perf_counter() - tic)
        self.last_command = cmd

        # RK4 on the closed loop with the world and goal frozen.
        if self.scenario.robot.dynamics == "unicycle":
            state = np.array([self.x[0], self.x[1], self.psi])
        else:
            state = self.x

        def f(s):
            return self._field(s, goal, model)

        state = _rk4_adaptive(
            f, state, dt, lambda s: self.world.clearance(s[:2]) > 0.0
        )
        if self.scenario.robot.dynamics == "unicycle":
            self.x = state[:2]
            self.psi = float((state[2] + math.pi) % (2 * math.pi) - math.pi)
        else:
            self.x = state

        # Target motion, clamped to the admissible speed unless disabled.
        if self.track is not None and self._goal_override is None and not self.track.done:
            direction = self.track.direction()
            speed = self.track.speed
            if speed > 0 and np.any(direction != 0):
                target = TargetState(self.track.position(), speed * direction)
                passes, bound = nonadversarial_check(
                    self.x, target, self.world.chain, model, self.scenario.gains,
                    self.world.sensor.range,
                )
                if not passes and self.scenario.clamp_target:
                    _, jac_goal = full_map_and_jacobian(target.position, self.world.chain)
                    model_speed = float(np.linalg.norm(jac_goal @ target.velocity))
                    if model_speed > 0 and np.isfinite(bound):
                        speed = speed * min(1.0, bound / model_speed) * (1.0 - 1e-9)
                    events.append("clamp")
                self.track.advance(speed * dt)

        self.t += dt

        # One-shot semantic events.
        for ev in self.events:
            if ev.triggered(self.t, self.x):
                ev.fired = True
                events.append(ev.action)
                if ev.action == "stop_and_return":
                    self._goal_override = self.start_position.copy()
                    self.track = None
                elif ev.action == "retarget":
                    self._goal_override = np.asarray(ev.retarget, float)
                    self.track = None
                elif ev.action == "halt":
                    self._halted = True

        clearance = self.world.clearance(self.x)
        goal_now = self.current_goal()
        y_now = full_map(self.x, self.world.chain)
        v_now = float(np.sum((y_now - full_map(goal_now, self.world.chain)) ** 2))
        record = TraceRecord(
            t=self.t,
            x=self.x.copy(),
            psi=self.psi,
            model=y_now,
            lyapunov=v_now,
            clearance=clearance,
            n_modes=len(self.world.mode.instantiated),
            event=";".join(events),
        )
        self.trace.records.append(record)
        if clearance <= 0:
            self.trace.status = "error"
            raise DomainError(
                f"collision at t={self.t:.3f}, x={self.x}, clearance={clearance}"
            )
        return record

    def _initial_record(self):
        goal = self.current_goal()
        y = full_map(self.x, self.world.chain)
        v = float(np.sum((y - full_map(goal, self.world.chain)) ** 2))
        self.trace.records.append(
            TraceRecord(
                t=0.0,
                x=self.x.copy(),
                psi=self.psi,
                model=y,
                lyapunov=v,
                clearance=self.world.clearance(self.x),
                n_modes=len(self.world.mode.instantiated),
            )
        )

    def run(self) -> tuple[Trace, Metrics]:
        self._initial_record()
        goal = self.current_goal()
        while self.t < self.scenario.horizon:
            record = self.step()
            goal = self.current_goal()
            err = float(np.linalg.norm(self.x - goal))
            if self._halted:
                self.trace.status = "halted"
                break
            if err < CONVERGENCE_TOL and self.goal_static():
                self.trace.status = "converged"
                break
            # Spurious equilibrium: the field stalled far from the goal
            # (checked on the command evaluated at the step start).
            if (
                self.last_command.magnitude < SPURIOUS_FIELD_TOL
                and err > SPURIOUS_DISTANCE_TOL
            ):
                self.trace.status = "spurious-equilibrium"
                break
        else:
            self.trace.status = "horizon"
        return self.trace, self.metrics()

    def metrics(self) -> Metrics:
        rec = self.trace.records
        xs = np.array([r.x for r in rec])
        path = float(np.linalg.norm(np.diff(xs, axis=0), axis=1).sum()) if len(xs) > 1 else 0.0
        v0 = rec[0].lyapunov if rec else 1.0
        tol = 1e-8 * max(1.0, v0)
        violations = 0
        for a, b in zip(rec, rec[1:]):
            # Goal changes (events, retargets) legitimately reset the value.
            if "stop_and_return" in b.event or "retarget" in b.event:
                continue
            if b.lyapunov > a.lyapunov + tol:
                violations += 1
        return Metrics(
            status=self.trace.status,
            path_length=path,
            min_clearance=float(min((r.clearance for r in rec), default=np.inf)),
            time_to_goal=rec[-1].t if self.trace.status == "converged" else float("nan"),
            lyapunov_violations=violations,
            mode_switches=sum(1 for r in rec if "mode:" in r.event),
            mean_step_compute_ms=1e3 * float(np.mean(self.compute_times))
            if self.compute_times
            else 0.0,
            steps=len(rec) - 1,
        )


def run_scenario(scenario: Scenario) -> tuple[Trace, Metrics]:
    return Simulator(scenario).run()
