"""Hybrid modules: discrete actions in, continuous goals and actuator commands
out, and arrival detection back to discrete events."""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass

from .robot_sim import ActuatorCmd, Simulator, wrap_angle
from .workspace import Cell, GridWorkspace, arrived, parse_cell_action

__all__ = [
    "MotionPhase", "MotionGoal", "NonAdjacentTarget", "handle_go", "check_arrival",
    "MotionController", "MotionHandler", "AlertModule", "ARRIVAL_RADIUS_MM",
]

ARRIVAL_RADIUS_MM = 100.0


class MotionPhase(enum.Enum):
    ROTATE = "rotate"
    FORWARD = "forward"
    DONE = "done"


class NonAdjacentTarget(ValueError):
    pass


@dataclass(frozen=True)
class MotionGoal:
    target: tuple[float, float]
    source: Cell
    cell: Cell


def handle_go(i: int, j: int, grid: GridWorkspace, current: Cell) -> MotionGoal:
    """Goal at the centre of cell ``(i, j)``, which must neighbour ``current``."""
    if (i, j) not in grid.neighbours(current):
        raise NonAdjacentTarget(f"cell ({i}, {j}) is not adjacent to {current}")
    return MotionGoal(grid.centre((i, j)), current, (i, j))


def check_arrival(pose, goal: MotionGoal, radius: float = ARRIVAL_RADIUS_MM) -> bool:
    return math.hypot(pose[0] - goal.target[0], pose[1] - goal.target[1]) < radius


class MotionController:
    """Rotate-then-forward phase machine.

    Rotation ends once the heading error is within ``heading_tol``; forward
    motion falls back to rotation when the error exceeds ``reaim``. The
    heading reference tracks the bearing to the goal in both phases.
    """

    def __init__(self, heading_tol: float = 0.1, reaim: float = 0.35):
        if not 0 < heading_tol < reaim:
            raise ValueError("need 0 < heading_tol < reaim")
        self.heading_tol = heading_tol
        self.reaim = reaim
        self.phase = MotionPhase.DONE

    def start(self) -> None:
        self.phase = MotionPhase.ROTATE

    def stop(self) -> None:
        self.phase = MotionPhase.DONE

    def motion_step(self, pose, goal: MotionGoal | None) -> ActuatorCmd:
        if goal is None or self.phase is MotionPhase.DONE:
            return ActuatorCmd()
        x, y, th = pose
        ref = math.atan2(goal.target[1] - y, goal.target[0] - x)
        err = abs(wrap_angle(ref - th))
        if self.phase is MotionPhase.ROTATE and err <= self.heading_tol:
            self.phase = MotionPhase.FORWARD
        elif self.phase is MotionPhase.FORWARD and err > self.reaim:
            self.phase = MotionPhase.ROTATE
        return ActuatorCmd(ref, self.phase is MotionPhase.FORWARD)


class MotionHandler:
    """Serves ``go[i][j]``: drives the robot to the cell centre and posts
    ``arrived[i][j]`` once, on the first tick the measured position is
    within the arrival radius."""

    def __init__(self, grid: GridWorkspace, start: Cell, emit,
                 controller: MotionController | None = None,
                 radius: float = ARRIVAL_RADIUS_MM):
        self.grid = grid
        self.cell = start
        self.emit = emit
        self.ctl = controller or MotionController()
        self.radius = radius
        self.goal: MotionGoal | None = None
        self._armed = False
        # (t, cell, true x, true y) of every emitted arrival
        self.arrivals: list[tuple[float, Cell, float, float]] = []

    def handles(self, action: str) -> bool:
        parsed = parse_cell_action(action)
        return parsed is not None and parsed[0] == "go"

    def dispatch(self, action: str, sim: Simulator) -> None:
        if self.goal is not None:
            raise RuntimeError(f"{action} dispatched while a motion is in flight")
        _, (i, j) = parse_cell_action(action)
        self.goal = handle_go(i, j, self.grid, self.cell)
        self._armed = True
        self.ctl.start()

    @property
    def phase(self) -> MotionPhase:
        return self.ctl.phase

    def command(self, sim: Simulator) -> ActuatorCmd | None:
        if self.goal is None:
            return None
        m = sim.measure()
        return self.ctl.motion_step((m.x_mm, m.y_mm, m.theta), self.goal)

    def after_tick(self, sim: Simulator) -> None:
        if self.goal is None or not self._armed:
            return
        m = sim.measure()
        if check_arrival((m.x_mm, m.y_mm), self.goal, self.radius):
            self._armed = False
            self.cell = self.goal.cell
            self.goal = None
            self.ctl.stop()
            s = sim.state
            self.arrivals.append((s.t, self.cell, s.x, s.y))
            self.emit(arrived(*self.cell))


class AlertModule:
    """Instantaneous on/off actions mirrored into the simulator's alert flag."""

    def __init__(self, on: str = "alert.on", off: str = "alert.off"):
        self.on, self.off = on, off

    def handles(self, action: str) -> bool:
        return action in (self.on, self.off)

    def dispatch(self, action: str, sim: Simulator) -> None:
        self.set_alert(action == self.on, sim)

    @staticmethod
    def set_alert(flag: bool, sim: Simulator) -> None:
        sim.set_alert(flag)

    def command(self, sim):
        return None

    def after_tick(self, sim):
        pass
