"""Model checking of ``E || C`` against the three conditions a controller must meet.

Shares no code with the synthesizer: the fluent product is rebuilt here from
``update_fluents`` and liveness is decided from strongly connected components.
"""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

import networkx as nx

from .fltl import Gr1Spec, eval_state, evaluate_lasso, initial_values, update_fluents
from .lts import Lts, check_deadlock_free, compose_with_origin
from .synthesis import Controller

__all__ = ["Report", "verify_controller"]


@dataclass
class Report:
    deadlock_free: bool
    non_blocking: bool
    spec_satisfied: bool
    product_states: int = 0
    deadlock_witness: list[str] | None = None
    blocking_witness: tuple[list[str], str] | None = None
    spec_witness: dict | None = field(default=None)

    @property
    def all_ok(self) -> bool:
        return self.deadlock_free and self.non_blocking and self.spec_satisfied

    def format(self) -> str:
        def mark(ok):
            return "PASS" if ok else "FAIL"
        lines = [f"(1) deadlock-free          {mark(self.deadlock_free)}",
                 f"(2) uncontrollable kept    {mark(self.non_blocking)}",
                 f"(3) specification holds    {mark(self.spec_satisfied)}",
                 f"product states: {self.product_states}"]
        if self.deadlock_witness is not None:
            lines.append("deadlock after: " + (" ".join(self.deadlock_witness) or "<start>"))
        if self.blocking_witness is not None:
            path, act = self.blocking_witness
            lines.append(f"{act} blocked after: " + (" ".join(path) or "<start>"))
        if self.spec_witness is not None:
            w = self.spec_witness
            lines.append(f"{w['kind']} violation: prefix " + " ".join(w["prefix"])
                         + (" loop " + " ".join(w["loop"]) if w.get("loop") else ""))
        return "\n".join(lines)


def _bfs_paths(lts: Lts) -> dict[int, tuple[int, str] | None]:
    parent: dict[int, tuple[int, str] | None] = {lts.initial: None}
    queue = deque([lts.initial])
    while queue:
        s = queue.popleft()
        for lab, t in lts.successors(s).items():
            if t not in parent:
                parent[t] = (s, lab)
                queue.append(t)
    return parent


def _path_to(parent, s) -> list:
    out = []
    while parent[s] is not None:
        s, lab = parent[s]
        out.append(lab)
    return out[::-1]


def _check_non_blocking(env: Lts, prod: Lts, origin) -> tuple[list[str], str] | None:
    parent = _bfs_paths(prod)
    for p in sorted(parent):
        se, _ = origin[p]
        enabled = prod.successors(p)
        for lab in env.successors(se):
            if not env.is_controllable(lab) and lab not in enabled:
                return _path_to(parent, p), lab
    return None


def _monitor_graph(prod: Lts, spec: Gr1Spec):
    """Product of ``prod`` with the fluent valuation and the last action.

    Returns the graph, its root, node labels (the valuation dict and last
    action) and, if a safety rule breaks, a finite witness path.
    """
    fluents = {fl.name: fl for fl in spec.fluents}
    singletons = sorted(spec.singletons())
    invariants = [r.guard for r in spec.safety if r.next_body is None]
    next_rules = [(r.guard, r.next_body) for r in spec.safety if r.next_body is not None]

    def freeze(vals):
        return tuple(sorted(vals.items()))

    v0 = initial_values(spec.fluents, singletons)
    root = (prod.initial, freeze(v0))
    graph = nx.DiGraph()
    graph.add_node(root)
    parent = {root: None}
    queue = deque([root])

    def witness(node, extra=None):
        path = []
        while parent[node] is not None:
            node, lab = parent[node]
            path.append(lab)
        path = path[::-1]
        if extra:
            path.append(extra)
        return {"kind": "safety", "prefix": path, "loop": []}

    if any(not eval_state(g, v0, None) for g in invariants):
        return graph, root, witness(root)
    while queue:
        node = queue.popleft()
        p, frozen = node
        vals = dict(frozen)
        pending = [nb for g, nb in next_rules if eval_state(g, vals, None)]
        for lab, q in prod.successors(p).items():
            nvals = update_fluents(vals, lab, fluents)
            if any(not eval_state(g, nvals, None) for g in invariants) or \
                    any(not eval_state(nb, nvals, None) for nb in pending):
                return graph, root, witness(node, lab)
            nxt = (q, freeze(nvals))
            graph.add_edge(node, nxt, label=lab)
            if nxt not in parent:
                parent[nxt] = (node, lab)
                queue.append(nxt)
    return graph, root, None


def _find_bad_cycle(graph: nx.DiGraph, root, spec: Gr1Spec):
    """A reachable cycle that satisfies every assumption infinitely often and
    avoids some goal forever, as ``(goal_index, scc_nodes)``."""
    def holds(body, node):
        return eval_state(body, dict(node[1]), None)

    for j, goal in enumerate(spec.goals):
        sub = graph.subgraph([v for v in graph if not holds(goal, v)])
        for comp in nx.strongly_connected_components(sub):
            if len(comp) == 1:
                (v,) = comp
                if not sub.has_edge(v, v):
                    continue
            if all(any(holds(a, v) for v in comp) for a in spec.assumptions):
                return j, comp
    return None


def _lasso_through(graph: nx.DiGraph, root, comp, spec: Gr1Spec):
    """Label prefix reaching ``comp`` and a loop inside it touching every assumption."""
    entry_path = nx.shortest_path(graph, root, next(iter(sorted(comp, key=repr))))
    entry = entry_path[-1]
    sub = graph.subgraph(comp)
    stops = [next(v for v in sorted(comp, key=repr) if eval_state(a, dict(v[1]), None))
             for a in spec.assumptions]
    walk = [entry]
    for target in stops + [entry]:
        seg = nx.shortest_path(sub, walk[-1], target) if target != walk[-1] else [target]
        walk.extend(seg[1:])
    if len(walk) == 1:
        # self-loop or the entry is on a longer cycle through other nodes
        succ = next(iter(sub.successors(entry)))
        walk.extend(nx.shortest_path(sub, succ, entry) if succ != entry else [entry])

    def labels(nodes):
        return [graph.edges[a, b]["label"] for a, b in zip(nodes, nodes[1:])]
    return labels(entry_path), labels(walk)


def verify_controller(env: Lts, ctrl: Controller | Lts, spec: Gr1Spec) -> Report:
    """Check (1) deadlock freedom of ``E || C``, (2) that no uncontrollable
    action enabled in ``E`` is blocked, and (3) that every run satisfies the
    safety rules and the assumption-to-goal implication."""
    c_lts = ctrl.lts if isinstance(ctrl, Controller) else ctrl
    prod, origin = compose_with_origin(env, c_lts)
    ok1, dead = check_deadlock_free(prod)
    blocked = _check_non_blocking(env, prod, origin)
    graph, root, safety_bad = _monitor_graph(prod, spec)
    witness = safety_bad
    if witness is None:
        bad = _find_bad_cycle(graph, root, spec)
        if bad is not None:
            j, comp = bad
            prefix, loop = _lasso_through(graph, root, comp, spec)
            # the lasso must falsify the liveness formula on its own terms
            assert not evaluate_lasso(spec.liveness_formula(), prefix, loop, spec.fluents)
            witness = {"kind": "liveness", "goal": j, "prefix": prefix, "loop": loop}
    return Report(ok1, blocked is None, witness is None, prod.num_states,
                  dead, blocked, witness)
