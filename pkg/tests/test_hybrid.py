import math
from types import SimpleNamespace

import pytest

from missionsynth.hybrid import (AlertModule, MotionController, MotionGoal, MotionHandler,
                                 MotionPhase, NonAdjacentTarget, check_arrival, handle_go)
from missionsynth.robot_sim import PlantParams, RobotState, Simulator
from missionsynth.workspace import GridWorkspace

G = GridWorkspace(4, 5, 400)


def test_handle_go_targets_cell_centres():
    assert handle_go(0, 1, G, (0, 0)).target == (600, 200)
    assert handle_go(1, 0, G, (0, 0)).target == (200, 600)
    shifted = GridWorkspace(2, 2, 400, origin=(100, -50))
    assert handle_go(0, 1, shifted, (0, 0)).target == (700, 150)
    with pytest.raises(NonAdjacentTarget):
        handle_go(2, 2, G, (0, 0))
    with pytest.raises(NonAdjacentTarget):
        handle_go(0, 0, G, (0, 0))


def test_arrival_radius():
    goal = MotionGoal((600.0, 200.0), (0, 0), (0, 1))
    assert check_arrival((600.0, 200.0), goal)
    assert check_arrival((600.0 + 99.9, 200.0), goal)
    assert not check_arrival((600.0, 200.0 + 100.1), goal)
    assert not check_arrival((700.0, 200.0), goal)


class FakeSim:
    """Replays a fixed list of measured positions, one per tick."""

    def __init__(self, poses):
        self.poses = list(poses)
        self.k = 0

    def measure(self):
        x, y = self.poses[self.k]
        return SimpleNamespace(x_mm=x, y_mm=y, theta=0.0)

    @property
    def state(self):
        x, y = self.poses[self.k]
        return RobotState(x, y, t=self.k * 0.005)


def test_jitter_across_the_boundary_emits_once():
    events = []
    h = MotionHandler(G, (0, 0), events.append)
    # measured distance to (600, 200) oscillates around the 100 mm radius
    dists = [150, 120, 101, 99, 101, 99.5, 100.5, 98, 101, 50, 120]
    sim = FakeSim([(600 - d, 200) for d in dists])
    h.dispatch("go[0][1]", sim)
    for k in range(len(dists)):
        sim.k = k
        h.after_tick(sim)
    assert events == ["arrived[0][1]"]
    assert h.arrivals[0][1] == (0, 1) and h.cell == (0, 1)


def test_phase_on_target_bearing_skips_rotation():
    goal = MotionGoal((600.0, 200.0), (0, 0), (0, 1))
    ctl = MotionController()
    ctl.start()
    cmd = ctl.motion_step((200.0, 200.0, 0.0), goal)
    assert ctl.phase is MotionPhase.FORWARD and cmd.forward
    assert cmd.theta_ref == 0.0


def test_phase_facing_away_rotates_in_place():
    goal = MotionGoal((600.0, 200.0), (0, 0), (0, 1))
    ctl = MotionController()
    ctl.start()
    cmd = ctl.motion_step((200.0, 200.0, math.pi), goal)
    assert ctl.phase is MotionPhase.ROTATE and not cmd.forward
    assert ctl.motion_step((200.0, 200.0, 0.0), None).forward is False


def test_thresholds_validated():
    with pytest.raises(ValueError):
        MotionController(0.4, 0.35)


def _runs(seq):
    out = []
    for p in seq:
        if not out or out[-1] != p:
            out.append(p)
    return out


def test_strong_drift_forces_re_aiming():
    # the heading servo cannot cancel a drift this large while moving, so the
    # phase machine has to stop and turn back towards the goal
    p = PlantParams(drift=4.0)
    sim = Simulator(p)
    ctl = MotionController()
    goal = MotionGoal((3000.0, 0.0), (0, 0), (0, 1))
    ctl.start()
    phases = []
    for _ in range(4000):
        s = sim.state
        sim.tick(ctl.motion_step((s.x, s.y, s.theta), goal))
        phases.append(ctl.phase)
    runs = _runs(phases)
    assert runs[:4] == [MotionPhase.FORWARD, MotionPhase.ROTATE, MotionPhase.FORWARD, MotionPhase.ROTATE]


def _drive(grid, src, dst, drift, limit=60.0):
    p = PlantParams(drift=drift)
    x, y = grid.centre(src)
    sim = Simulator(p, RobotState(x, y, 0.0))
    events = []
    h = MotionHandler(grid, src, events.append)
    h.dispatch(f"go[{dst[0]}][{dst[1]}]", sim)
    path = []
    while not events and sim.t < limit:
        sim.tick(h.command(sim))
        h.after_tick(sim)
        path.append((sim.state.x, sim.state.y))
    return events, sim.t, path


def _inside_eroded(grid, cell, x, y, margin=100.0):
    cx, cy = grid.centre(cell)
    half = grid.cell_size / 2 - margin
    return abs(x - cx) < half and abs(y - cy) < half


@pytest.mark.parametrize("drift,bound", [(0.0, 30.0), (0.02, 60.0)])
def test_every_neighbour_reached_in_bounded_time(drift, bound):
    g = GridWorkspace(3, 3, 400)
    for dst in g.neighbours((1, 1)):
        events, t, path = _drive(g, (1, 1), dst, drift)
        assert events == [f"arrived[{dst[0]}][{dst[1]}]"]
        assert t < bound
        others = [c for c in g.cells if c not in ((1, 1), dst)]
        assert not any(_inside_eroded(g, c, x, y) for x, y in path for c in others)


def test_alert_module_mirrors_flag():
    sim = Simulator()
    a = AlertModule()
    assert a.handles("alert.on") and not a.handles("go[0][0]")
    a.dispatch("alert.on", sim)
    assert sim.state.alert is True
    a.dispatch("alert.off", sim)
    a.dispatch("alert.off", sim)
    assert sim.state.alert is False
