import itertools
import time
from collections import deque

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from missionsynth.fltl import (Fluent, Gr1Spec, classify_gr1, initial_values, parse_formula,
                               update_fluents)
from missionsynth.lts import Lts, LtsError, isomorphic, parallel_compose
from missionsynth.synthesis import (ControllerFormatError, ControlProblem, Unrealizable,
                                    build_game, dump_controller,
                                    load_controller, solve_gr1, synthesize)
from missionsynth.verification import verify_controller
from missionsynth.workspace import (GridWorkspace, MissionSpec, Reaction, build_motion_lts,
                                    build_toggle_lts, compile_mission)
from oracles import brute_force_realizable

G23 = GridWorkspace(2, 3)
AT_BOT = Fluent("AtBot", {"arrived[1][0]", "arrived[1][1]", "arrived[1][2]"},
                {"go[0][0]", "go[0][1]", "go[0][2]"}, False)
AT_TOP = Fluent("AtTop", {"arrived[0][0]", "arrived[0][1]", "arrived[0][2]"},
                {"go[1][0]", "go[1][1]", "go[1][2]"}, True)
ALERT = Fluent("Alert", {"alert.on"}, {"alert.off"}, False)


def problem(env, safety=(), goals=(), assumptions=(), fluents=()):
    spec = classify_gr1([parse_formula(s) for s in safety], [parse_formula(a) for a in assumptions],
                        [parse_formula(g) for g in goals], fluents)
    return ControlProblem(env, spec, env.controllable)


def patrol_problem():
    return compile_mission(MissionSpec(G23, (0, 0), ((0, 0), (1, 2)), frozenset({(0, 2)})))


def test_control_problem_validation():
    env = build_motion_lts(G23, (0, 0))
    with pytest.raises(LtsError):
        ControlProblem(env, Gr1Spec(), {"arrived[0][1]"})
    with pytest.raises(LtsError):
        ControlProblem(env, Gr1Spec(), {"teleport"})


def test_avoidance_marks_losing_nodes():
    g = build_game(patrol_problem())
    into_bad = {t for edges in g.unctrl_edges for lab, t in edges if lab == "arrived[0][2]"}
    assert into_bad
    assert all(g.losing[t] for t in into_bad)
    assert not g.losing[g.initial]
    # losing nodes are sinks
    assert all(not g.ctrl_edges[n] and not g.unctrl_edges[n] for n in np.flatnonzero(g.losing))


def test_game_without_fluents_mirrors_environment():
    env = build_motion_lts(G23, (1, 1))
    g = build_game(problem(env))
    as_lts = Lts(g.num_nodes, g.initial, env.alphabet,
                 [(n, lab, t) for n in range(g.num_nodes)
                  for lab, t in g.ctrl_edges[n] + g.unctrl_edges[n]])
    assert isomorphic(as_lts, env)
    assert not g.losing.any()


def test_game_size_with_three_fluents_matches_brute_force():
    env = parallel_compose(build_motion_lts(G23, (0, 0)), build_toggle_lts("alert.on", "alert.off"))
    fl = (AT_BOT, AT_TOP, ALERT)
    g = build_game(problem(env, goals=["[]<>AtBot"], fluents=fl))
    # brute force: reachable (state, valuation) pairs of E with the fluent observers
    start = (env.initial, tuple(sorted(initial_values(fl).items())))
    seen, queue = {start}, deque([start])
    while queue:
        s, v = queue.popleft()
        for lab, t in env.successors(s).items():
            nxt = (t, tuple(sorted(update_fluents(dict(v), lab, fl).items())))
            if nxt not in seen:
                seen.add(nxt)
                queue.append(nxt)
    assert g.num_nodes == len(seen) <= 40 * 2 ** 3


def test_patrol_with_avoidance_is_realizable_and_verified():
    p = patrol_problem()
    c = synthesize(p)
    assert c
    rep = verify_controller(p.environment, c, p.spec)
    assert rep.all_ok
    # at every controller state at most one controllable action is offered
    for s in c.lts.states:
        assert sum(c.lts.is_controllable(a) for a in c.lts.enabled(s)) <= 1


def test_contradictory_spec_is_unrealizable():
    env = build_motion_lts(G23, (0, 0))
    res = synthesize(problem(env, safety=["[]!arrived[0][2]"], goals=["[]<>arrived[0][2]"]))
    assert isinstance(res, Unrealizable) and not res
    assert res.losing_initial == {0}
    assert "winning region" in res.describe()


def test_two_cell_patrol_alternates():
    env = build_motion_lts(GridWorkspace(1, 2), (0, 0))
    c = synthesize(problem(env, goals=["[]<>arrived[0][0]", "[]<>arrived[0][1]"]))
    s, word = c.lts.initial, []
    for _ in range(8):
        (lab, s), = c.lts.successors(s).items()
        word.append(lab)
    assert word == ["go[0][1]", "arrived[0][1]", "go[0][0]", "arrived[0][0]"] * 2


def test_alert_only_controller_has_two_states():
    env = build_toggle_lts("alert.on", "alert.off")
    c = synthesize(problem(env, goals=["[]<>Alert", "[]<>!Alert"], fluents=(ALERT,)))
    assert c.lts.num_states == 2
    assert c.lts.accepts(["alert.on", "alert.off"] * 3)
    assert set(c.memory) == {0, 1}


def test_assumption_makes_waiting_game_winnable():
    # the robot can only wait for a visitor, and the environment may idle forever
    env = Lts(2, 0, {"visit": False, "leave": False, "idle": False, "noop": True},
              [(0, "visit", 1), (1, "leave", 0), (0, "noop", 0), (0, "idle", 0)])
    goal = ["[]<>visit"]
    assert not synthesize(problem(env, goals=goal))
    p = problem(env, goals=goal, assumptions=["[]<>visit"])
    c = synthesize(p)
    assert c and verify_controller(env, c, p.spec).all_ok


def test_controller_file_roundtrip():
    c = synthesize(patrol_problem())
    text = dump_controller(c)
    assert text.splitlines()[0] == "MISSIONSYNTH-CONTROLLER 1"
    back = load_controller(text)
    assert isomorphic(back.lts, c.lts)
    assert back.memory == c.memory
    with pytest.raises(ControllerFormatError):
        load_controller(text.replace("MISSIONSYNTH-CONTROLLER 1", "LTS 1"))
    with pytest.raises(ControllerFormatError):
        load_controller(text + "7 nonsense\n")


def _small_missions():
    g = GridWorkspace(2, 2)
    cells = g.cells
    for start, zone_size in itertools.product(cells, (1, 2)):
        for zone in itertools.combinations(cells, zone_size):
            for patrol in itertools.permutations(cells, 2):
                yield MissionSpec(g, start, patrol, reactions=(Reaction(zone, "alert.on", "alert.off"),))


def test_reaction_missions_agree_with_oracle():
    n = 0
    for m in _small_missions():
        p = compile_mission(m)
        res = synthesize(p)
        assert bool(res) == brute_force_realizable(p), m
        if res:
            assert verify_controller(p.environment, res, p.spec).all_ok
        n += 1
    assert n == 4 * (4 + 6) * 12


ATOMS = ["arrived[0][0]", "arrived[0][1]", "arrived[1][1]", "go[0][1]", "go[1][0]", "Visited"]


@st.composite
def extra_safety(draw):
    a, b = draw(st.sampled_from(ATOMS)), draw(st.sampled_from(ATOMS))
    neg = draw(st.booleans())
    if draw(st.booleans()):
        return f"[]({a} -> X {'!' if neg else ''}{b})"
    return f"[]!({a} && {'!' if neg else ''}{b})"


@settings(max_examples=60, deadline=None)
@given(st.lists(extra_safety(), min_size=1, max_size=2),
       st.lists(st.sampled_from(ATOMS[:3] + ["Visited", "!Visited"]), min_size=0, max_size=2),
       st.sampled_from([(0, 0), (1, 1)]))
def test_random_safety_specs_agree_with_oracle(safety, goals, start):
    env = build_motion_lts(GridWorkspace(2, 2), start)
    fl = (Fluent("Visited", {"arrived[1][1]"}, {"arrived[0][0]"}, False),)
    p = problem(env, safety=safety, goals=[f"[]<>{g}" for g in goals], fluents=fl)
    res = synthesize(p)
    assert bool(res) == brute_force_realizable(p)
    if res:
        assert verify_controller(env, res, p.spec).all_ok


def _winning_projection(p):
    g = build_game(p)
    res = solve_gr1(g)
    return {(k[0], k[1]) for n, k in enumerate(g.keys) if res.winning[n] and not k[3]}


def test_winning_region_monotonicity():
    env = build_motion_lts(G23, (0, 0))
    base = dict(goals=["[]<>arrived[0][0]", "[]<>arrived[1][2]"])
    w = _winning_projection(problem(env, **base))
    w_safe = _winning_projection(problem(env, safety=["[]!arrived[1][1]"], **base))
    assert w_safe <= w and w_safe != w
    w_more = _winning_projection(problem(env, safety=["[]!arrived[1][1]", "[]!arrived[0][1]"], **base))
    assert w_more <= w_safe
    w_assm = _winning_projection(problem(env, assumptions=["[]<>arrived[0][1]"], **base))
    assert w <= w_assm


def _time_patrol(rows, cols):
    m = MissionSpec(GridWorkspace(rows, cols), (0, 0), ((0, 0), (rows - 1, cols - 1)))
    best = float("inf")
    for _ in range(3):
        t0 = time.perf_counter()
        synthesize(compile_mission(m))
        best = min(best, time.perf_counter() - t0)
    return best


def test_synthesis_time_grows_polynomially():
    small, big = _time_patrol(10, 10), _time_patrol(20, 10)
    assert big <= 8 * small
