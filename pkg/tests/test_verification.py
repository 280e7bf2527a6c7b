from missionsynth.fltl import classify_gr1, evaluate_lasso, parse_formula
from missionsynth.lts import Lts
from missionsynth.synthesis import synthesize
from missionsynth.verification import verify_controller
from missionsynth.workspace import GridWorkspace, MissionSpec, build_motion_lts, compile_mission

PATROL = MissionSpec(GridWorkspace(2, 3), (0, 0), ((0, 0), (1, 2)), frozenset({(0, 2)}))


def _mutant(lts, keep):
    return Lts(lts.num_states, lts.initial, lts.alphabet, [t for t in lts.transitions if keep(*t)])


def test_synthesized_controller_passes():
    p = compile_mission(PATROL)
    rep = verify_controller(p.environment, synthesize(p), p.spec)
    assert rep.all_ok
    assert rep.format().count("PASS") == 3
    assert rep.product_states > 0


def test_dropping_an_uncontrollable_transition_is_caught():
    p = compile_mission(PATROL)
    c = synthesize(p)
    victim = next(lab for _, lab, _ in c.lts.transitions if not c.lts.is_controllable(lab))
    rep = verify_controller(p.environment, _mutant(c.lts, lambda s, lab, t: lab != victim), p.spec)
    assert not rep.non_blocking
    path, blocked = rep.blocking_witness
    assert blocked == victim
    assert p.environment.accepts(path)


def test_deadlock_after_one_lap_is_caught():
    p = compile_mission(PATROL)
    c = synthesize(p)
    # cut every move out of the first state revisited after a full lap
    s, seen = c.lts.initial, [c.lts.initial]
    while True:
        (lab, s), = [(a, t) for a, t in c.lts.successors(s).items()
                     if c.lts.is_controllable(a) or len(c.lts.successors(s)) == 1]
        if s in seen:
            break
        seen.append(s)
    rep = verify_controller(p.environment, _mutant(c.lts, lambda a, lab, t: a != s), p.spec)
    assert not rep.deadlock_free
    assert c.lts.accepts(rep.deadlock_witness)
    assert "FAIL" in rep.format()


def test_unconstrained_controller_violates_safety():
    p = compile_mission(PATROL)
    rep = verify_controller(p.environment, p.environment, p.spec)
    assert rep.deadlock_free and rep.non_blocking
    assert not rep.spec_satisfied
    w = rep.spec_witness
    assert w["kind"] == "safety" and w["prefix"][-1] == "arrived[0][2]"


def test_liveness_counterexample_is_a_real_lasso():
    env = build_motion_lts(GridWorkspace(1, 3), (0, 0))
    spec = classify_gr1(goals=[parse_formula("[]<>arrived[0][0]"), parse_formula("[]<>arrived[0][2]")])
    rep = verify_controller(env, env, spec)
    assert not rep.spec_satisfied
    w = rep.spec_witness
    assert w["kind"] == "liveness" and w["loop"]
    assert env.accepts(w["prefix"] + w["loop"] * 3)
    assert not evaluate_lasso(spec.liveness_formula(), w["prefix"], w["loop"])


def test_assumptions_restrict_counterexamples():
    # shuttle between (0,0) and (0,1), never reaching (0,2)
    env = build_motion_lts(GridWorkspace(1, 3), (0, 0))
    shuttle = Lts(4, 0, env.alphabet, [(0, "go[0][1]", 1), (1, "arrived[0][1]", 2),
                                       (2, "go[0][0]", 3), (3, "arrived[0][0]", 0)])
    goal = parse_formula("[]<>arrived[0][2]")
    rep = verify_controller(env, shuttle, classify_gr1(goals=[goal]))
    assert rep.deadlock_free and rep.non_blocking and not rep.spec_satisfied
    met = parse_formula("[]<>arrived[0][1]")
    assert not verify_controller(env, shuttle, classify_gr1(assumptions=[met], goals=[goal])).spec_satisfied
    # an assumption no run of E || C satisfies makes the implication vacuous
    unmet = parse_formula("[]<>go[0][2]")
    assert verify_controller(env, shuttle, classify_gr1(assumptions=[unmet], goals=[goal])).all_ok
