import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from missionsynth.lts import (ActionLabel, ControllabilityMismatch, Lts, LtsError,
                              NondeterminismError, check_deadlock_free, compose_all,
                              compose_with_origin, dump_lts, isomorphic, load_lts,
                              parallel_compose, reachable_prune)
from missionsynth.workspace import GridWorkspace, build_motion_lts, build_toggle_lts


def toggle():
    return build_toggle_lts("alert.on", "alert.off")


def test_label_grammar():
    for ok in ["go[1][2]", "arrived[0][0]", "alert.on", "a.b.c[3]", "x_1"]:
        assert ActionLabel(ok, True).name == ok
    for bad in ["1go", "go[x]", "alert.", "a..b", "go[1]x", ""]:
        with pytest.raises(LtsError):
            ActionLabel(bad, False)


def test_construction_errors():
    with pytest.raises(LtsError):
        Lts(0, 0, {}, [])
    with pytest.raises(LtsError):
        Lts(2, 2, {"a": True}, [])
    with pytest.raises(LtsError):
        Lts(2, 0, {"a": True}, [(0, "b", 1)])
    with pytest.raises(LtsError):
        Lts(2, 0, {"a": True}, [(0, "a", 5)])
    with pytest.raises(NondeterminismError):
        Lts(3, 0, {"a": True}, [(0, "a", 1), (0, "a", 2)])
    with pytest.raises(ControllabilityMismatch):
        Lts(1, 0, [ActionLabel("a", True), ActionLabel("a", False)], [])


def test_alphabet_partition():
    m = build_motion_lts(GridWorkspace(2, 3), (0, 0))
    assert all(n.startswith("go") for n in m.controllable)
    assert all(n.startswith("arrived") for n in m.uncontrollable)
    assert m.controllable | m.uncontrollable == set(m.alphabet)


def test_compose_motion_with_alert_gives_full_product():
    m = build_motion_lts(GridWorkspace(2, 3), (0, 0))
    p = parallel_compose(m, toggle())
    # brute-force: disjoint alphabets and both components reachable from start
    brute = {(a, b) for a in m.states for b in toggle().states}
    assert m.num_states == 20
    assert p.num_states == len(brute) == 40


def test_identity_and_self_composition():
    m = build_motion_lts(GridWorkspace(2, 2), (1, 0))
    unit = Lts(1, 0, {}, [])
    assert isomorphic(parallel_compose(m, unit), m)
    assert isomorphic(parallel_compose(unit, m), m)
    assert isomorphic(parallel_compose(m, m), m)


def test_shared_labels_synchronise():
    a = Lts(2, 0, {"x": True, "s": False}, [(0, "x", 1), (1, "s", 0)])
    b = Lts(2, 0, {"s": False, "y": True}, [(0, "s", 1), (1, "y", 0)])
    p, origin = compose_with_origin(a, b)
    assert p.enabled(0) == ["x"]          # s needs both sides ready
    assert p.accepts(["x", "s", "y", "x", "s"])
    assert not p.accepts(["s"])
    assert origin[0] == (0, 0)


def test_controllability_mismatch():
    a = Lts(1, 0, {"s": True}, [])
    b = Lts(1, 0, {"s": False}, [])
    with pytest.raises(ControllabilityMismatch):
        parallel_compose(a, b)


def test_reachable_prune():
    island = Lts(5, 0, {"a": True}, [(0, "a", 1), (1, "a", 0), (2, "a", 3), (3, "a", 4), (4, "a", 2)])
    pruned = reachable_prune(island)
    assert pruned.num_states == 2
    assert pruned.accepts(["a"] * 7)
    m = build_motion_lts(GridWorkspace(2, 3), (0, 0))
    assert reachable_prune(m).num_states == m.num_states
    p = parallel_compose(m, toggle())
    once = reachable_prune(p)
    assert isomorphic(reachable_prune(once), once)


def test_deadlock_checks():
    assert check_deadlock_free(toggle()) == (True, None)
    assert check_deadlock_free(Lts(1, 0, {}, [])) == (False, [])
    chain = Lts(3, 0, {"a": True, "b": False}, [(0, "a", 1), (1, "b", 2)])
    assert check_deadlock_free(chain) == (False, ["a", "b"])


def test_dump_load_roundtrip():
    p = parallel_compose(build_motion_lts(GridWorkspace(2, 3), (0, 1)), toggle())
    text = dump_lts(p)
    assert text.startswith("LTS 1\n")
    assert "unctrl arrived[0][0]" in text and "ctrl alert.on" in text
    q = load_lts(text)
    assert q.alphabet == p.alphabet
    assert list(q.transitions) == list(p.transitions)
    with pytest.raises(LtsError):
        load_lts("LTS 1\nstates 2\n")
    with pytest.raises(LtsError):
        load_lts("LTS 1\nctrl a\nstates 1\ninitial 0\ntransitions\n0 a\n")


def test_isomorphic_detects_difference():
    a = Lts(2, 0, {"x": True}, [(0, "x", 1), (1, "x", 0)])
    b = Lts(2, 0, {"x": True}, [(0, "x", 1), (1, "x", 1)])
    assert not isomorphic(a, b)
    c = Lts(2, 1, {"x": True}, [(1, "x", 0), (0, "x", 1)])
    assert isomorphic(a, c)


# -- properties ------------------------------------------------------------------

@st.composite
def small_lts(draw, labels=("a", "b", "c")):
    n = draw(st.integers(1, 5))
    alpha = {lab: draw(st.booleans()) for lab in labels if draw(st.booleans())}
    trans = []
    for s in range(n):
        for lab in alpha:
            if draw(st.booleans()):
                trans.append((s, lab, draw(st.integers(0, n - 1))))
    return Lts(n, 0, alpha, trans)


def _consistent(*ls):
    seen = {}
    for lts in ls:
        for k, v in lts.alphabet.items():
            if seen.setdefault(k, v) != v:
                return False
    return True


@settings(max_examples=150, deadline=None)
@given(small_lts(), small_lts(), small_lts())
def test_composition_commutative_and_associative(a, b, c):
    if not _consistent(a, b, c):
        return
    assert isomorphic(parallel_compose(a, b), parallel_compose(b, a))
    assert isomorphic(parallel_compose(parallel_compose(a, b), c),
                      parallel_compose(a, parallel_compose(b, c)))
    assert parallel_compose(a, b).num_states <= a.num_states * b.num_states


@settings(max_examples=150, deadline=None)
@given(small_lts(), small_lts(("b", "c", "d")), st.integers(0, 2**31))
def test_product_traces_project_to_components(a, b, seed):
    if not _consistent(a, b):
        return
    p = parallel_compose(a, b)
    rng = random.Random(seed)
    s, trace = p.initial, []
    for _ in range(20):
        succ = p.successors(s)
        if not succ:
            break
        lab = rng.choice(sorted(succ))
        trace.append(lab)
        s = succ[lab]
    assert a.accepts([x for x in trace if x in a.alphabet])
    assert b.accepts([x for x in trace if x in b.alphabet])


def test_compose_all_matches_pairwise():
    g = GridWorkspace(1, 2)
    parts = [build_motion_lts(g, (0, 0)), toggle(), build_toggle_lts("siren.on", "siren.off")]
    # 1x2 motion LTS: 2 at-cell + 2 in-transit states
    assert compose_all(parts).num_states == 4 * 2 * 2
