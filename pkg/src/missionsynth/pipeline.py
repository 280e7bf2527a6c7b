"""End-to-end helpers: mission to controller to simulated run, plus drawings."""
from __future__ import annotations

import time
from dataclasses import dataclass, field
from pathlib import Path

from .enactor import EnactmentTrace, EventQueue, TickLog, run_mission
from .hybrid import AlertModule, MotionController, MotionHandler
from .robot_sim import PlantParams, RobotState, Simulator
from .synthesis import ControlProblem, Controller, Unrealizable, build_game, extract_controller, solve_gr1
from .workspace import Cell, MissionSpec, compile_mission, ingest_obstacles, load_mission

__all__ = ["SynthesisResult", "SimulationResult", "load_obstacles", "synthesize_mission",
           "simulate_mission", "render_svg", "mission_modules"]


@dataclass
class SynthesisResult:
    mission: MissionSpec          # obstacles already folded into ``avoid``
    problem: ControlProblem
    controller: Controller | None
    unrealizable: Unrealizable | None
    game_nodes: int
    wall_time: float

    @property
    def realizable(self) -> bool:
        return self.controller is not None

    def report(self) -> str:
        p = self.problem
        lines = [f"environment states: {p.environment.num_states}",
                 f"game nodes: {self.game_nodes}",
                 f"goals: {len(p.spec.goals)}  assumptions: {len(p.spec.assumptions)}  "
                 f"safety rules: {len(p.spec.safety)}  fluents: {len(p.spec.fluents)}",
                 f"realizable: {'yes' if self.realizable else 'no'}"]
        if self.controller is not None:
            lines.append(f"controller states: {self.controller.lts.num_states}")
        else:
            lines.append(self.unrealizable.describe())
        lines.append(f"wall time: {self.wall_time:.3f} s")
        return "\n".join(lines)


def load_obstacles(path: str | Path, mission: MissionSpec) -> frozenset[Cell]:
    return ingest_obstacles(Path(path).read_text(), mission.grid, mission.obstacle_threshold)


def synthesize_mission(mission: MissionSpec | str | Path,
                       obstacles: frozenset[Cell] = frozenset()) -> SynthesisResult:
    if not isinstance(mission, MissionSpec):
        mission = load_mission(mission)
    mission = mission.with_obstacles(obstacles)
    t0 = time.perf_counter()
    problem = compile_mission(mission)
    game = build_game(problem)
    res = solve_gr1(game)
    if isinstance(res, Unrealizable):
        return SynthesisResult(mission, problem, None, res, game.num_nodes,
                               time.perf_counter() - t0)
    ctrl = extract_controller(game, res)
    return SynthesisResult(mission, problem, ctrl, None, game.num_nodes, time.perf_counter() - t0)


def mission_modules(mission: MissionSpec, queue: EventQueue,
                    motion: MotionController | None = None) -> list:
    mods: list = [MotionHandler(mission.grid, mission.start, queue.put, motion)]
    seen = set()
    for r in mission.reactions:
        if (r.on, r.off) not in seen:
            seen.add((r.on, r.off))
            mods.append(AlertModule(r.on, r.off))
    return mods


@dataclass
class SimulationResult:
    trace: EnactmentTrace
    tick_log: TickLog | None
    arrivals: list = field(default_factory=list)
    alert_timeline: list = field(default_factory=list)   # (t, flag) at every change
    final: RobotState | None = None


def simulate_mission(mission: MissionSpec, controller: Controller, plant: PlantParams | None = None,
                     seed: int = 0, budget: float = 1800.0, log: bool = False,
                     pos_noise_px: float = 0.0, theta_noise: float = 0.0) -> SimulationResult:
    """Run ``controller`` against the simulator with the robot resting at the
    centre of the start cell, facing +x."""
    plant = plant or PlantParams().with_overrides(dict(mission.plant))
    x0, y0 = mission.grid.centre(mission.start)
    sim = Simulator(plant, RobotState(x0, y0), seed=seed, pos_noise_px=pos_noise_px,
                    theta_noise=theta_noise)
    queue = EventQueue()
    mods = mission_modules(mission, queue)
    timeline = [(0.0, False)]

    def watch(s):
        flag = s.state.alert
        if flag != timeline[-1][1]:
            timeline.append((s.t, flag))

    tick_log = TickLog() if log else None
    observer = watch if mission.reactions else None
    trace = run_mission(controller, mods, sim, budget, queue, tick_log=tick_log, observer=observer)
    return SimulationResult(trace, tick_log, mods[0].arrivals, timeline, sim.state)


# -- drawing -------------------------------------------------------------------------

def render_svg(mission: MissionSpec, path_xy=(), scale: float = 0.5) -> str:
    """Workspace drawing: avoided cells shaded, reaction zones hatched, patrol
    targets circled and the driven path overlaid. Millimetres are scaled by
    ``scale`` into SVG user units with y pointing down, matching row order."""
    g = mission.grid
    c = g.cell_size * scale
    ox, oy = g.origin
    w, h = g.cols * c, g.rows * c
    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{w + 20:.0f}" height="{h + 20:.0f}" '
           f'viewBox="-10 -10 {w + 20:.1f} {h + 20:.1f}">',
           '<defs><pattern id="hatch" width="8" height="8" patternUnits="userSpaceOnUse" '
           'patternTransform="rotate(45)"><line x1="0" y1="0" x2="0" y2="8" stroke="#e0a030" '
           'stroke-width="3"/></pattern></defs>']
    zone = {cell for r in mission.reactions for cell in r.zone}
    for (i, j) in g.cells:
        fill = "#555" if (i, j) in mission.avoid | g.forbidden else (
            "url(#hatch)" if (i, j) in zone else "#fff")
        out.append(f'<rect x="{j * c:.1f}" y="{i * c:.1f}" width="{c:.1f}" height="{c:.1f}" '
                   f'fill="{fill}" stroke="#999"/>')
    for k, (i, j) in enumerate(mission.patrol):
        cx, cy = (j + 0.5) * c, (i + 0.5) * c
        out.append(f'<circle cx="{cx:.1f}" cy="{cy:.1f}" r="{c * 0.2:.1f}" fill="none" '
                   f'stroke="#c00" stroke-width="2"/>')
        out.append(f'<text x="{cx:.1f}" y="{cy + 4:.1f}" font-size="12" text-anchor="middle" '
                   f'fill="#c00">{k + 1}</text>')
    pts = [((x - ox) * scale, (y - oy) * scale) for x, y in path_xy]
    if pts:
        body = " ".join(f"{x:.1f},{y:.1f}" for x, y in pts)
        out.append(f'<polyline points="{body}" fill="none" stroke="#06c" stroke-width="1"/>')
        sx, sy = pts[0]
        out.append(f'<circle cx="{sx:.1f}" cy="{sy:.1f}" r="4" fill="#06c"/>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
