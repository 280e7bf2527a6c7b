"""GR(1) controller synthesis over an environment LTS.

The game is the product of the environment with the fluent valuation and the
last action (kept only for action singletons the mission formulas mention).
At every node the controller either waits (allowed while some uncontrollable
action is enabled) or proposes one controllable action. Uncontrollable
actions are never blocked, so a proposal can be pre-empted by any enabled
environment event; the environment resolves that race.
"""
from __future__ import annotations

import logging
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .fltl import Gr1Spec, atoms, eval_state
from .lts import Lts, LtsError

log = logging.getLogger(__name__)

__all__ = [
    "ControlProblem", "GameGraph", "Strategy", "Unrealizable", "Controller",
    "build_game", "solve_gr1", "extract_controller", "synthesize",
    "dump_controller", "load_controller", "ControllerFormatError",
]


@dataclass(frozen=True)
class ControlProblem:
    environment: Lts
    spec: Gr1Spec
    controllable: frozenset[str]

    def __post_init__(self):
        object.__setattr__(self, "controllable", frozenset(self.controllable))
        alpha = self.environment.alphabet
        unknown = self.controllable - set(alpha)
        if unknown:
            raise LtsError(f"controllable actions {sorted(unknown)} not in the alphabet")
        if self.controllable != self.environment.controllable:
            raise LtsError("controllable set disagrees with the alphabet's controllability flags")
        self.spec.check_closed(alpha)


@dataclass
class GameGraph:
    """Explicit game arena.

    ``keys[n]`` is ``(env_state, valuation, last_action, violated)``; the
    valuation is ordered like ``fluent_names``. Losing nodes (safety
    violated) are sinks.
    """
    problem: ControlProblem
    fluent_names: tuple[str, ...]
    keys: list[tuple]
    ctrl_edges: list[list[tuple[str, int]]]
    unctrl_edges: list[list[tuple[str, int]]]
    losing: np.ndarray
    goal_marks: np.ndarray
    assumption_marks: np.ndarray
    initial: int = 0

    @property
    def num_nodes(self) -> int:
        return len(self.keys)

    def values(self, n: int) -> dict[str, bool]:
        return dict(zip(self.fluent_names, self.keys[n][1]))

    def env_state(self, n: int) -> int:
        return self.keys[n][0]

    def last_action(self, n: int) -> str | None:
        return self.keys[n][2]

    def options(self, n: int) -> list[tuple[str | None, list[int]]]:
        """Controller options at ``n`` in preference order: wait first, then
        controllable actions alphabetically. Each option lists its possible
        successor nodes."""
        if self.losing[n]:
            return []
        env = [t for _, t in self.unctrl_edges[n]]
        opts = [(None, env)] if env else []
        opts.extend((lab, [t] + env) for lab, t in self.ctrl_edges[n])
        return opts


def build_game(p: ControlProblem) -> GameGraph:
    spec, env = p.spec, p.environment
    fluents = spec.fluents
    names = tuple(fl.name for fl in fluents)
    # singletons read at nodes need the last action in the node key; those
    # read only by next-step bodies are checked on the edge label instead
    node_atoms = set()
    for r in spec.safety:
        node_atoms |= atoms(r.guard)
    for b in spec.goals + spec.assumptions:
        node_atoms |= atoms(b)
    singletons = spec.singletons() & node_atoms
    # per-label effect on each fluent: True / False / None (unchanged)
    effect = {}
    for lab in env.alphabet:
        effect[lab] = tuple(True if lab in fl.set_true else False if lab in fl.set_false else None
                            for fl in fluents)
    invariants = [r.guard for r in spec.safety if r.next_body is None]
    next_rules = [(r.guard, r.next_body) for r in spec.safety if r.next_body is not None]

    def violates_invariant(vals, last):
        d = dict(zip(names, vals))
        return any(not eval_state(g, d, last) for g in invariants)

    v0 = tuple(fl.initial for fl in fluents)
    key0 = (env.initial, v0, None, violates_invariant(v0, None))
    index = {key0: 0}
    keys = [key0]
    ctrl_edges: list[list] = []
    unctrl_edges: list[list] = []
    queue = deque([key0])
    while queue:
        key = queue.popleft()
        s, vals, last, bad = key
        ce, ue = [], []
        ctrl_edges.append(ce)
        unctrl_edges.append(ue)
        if bad:
            continue
        cur = dict(zip(names, vals))
        pending = [nb for g, nb in next_rules if eval_state(g, cur, last)]
        for lab, t in env.successors(s).items():
            eff = effect[lab]
            nvals = tuple(v if e is None else e for v, e in zip(vals, eff))
            nlast = lab if lab in singletons else None
            nd = dict(zip(names, nvals))
            nbad = (any(not eval_state(g, nd, lab) for g in invariants)
                    or any(not eval_state(nb, nd, lab) for nb in pending))
            nkey = (t, nvals, nlast, nbad)
            tgt = index.get(nkey)
            if tgt is None:
                tgt = index[nkey] = len(keys)
                keys.append(nkey)
                queue.append(nkey)
            (ce if env.is_controllable(lab) else ue).append((lab, tgt))

    n = len(keys)
    losing = np.array([k[3] for k in keys], dtype=bool)

    def marks(bodies):
        out = np.zeros((len(bodies), n), dtype=bool)
        for i, k in enumerate(keys):
            if k[3]:
                continue
            d = dict(zip(names, k[1]))
            for j, b in enumerate(bodies):
                out[j, i] = eval_state(b, d, k[2])
        return out

    g = GameGraph(p, names, keys, ctrl_edges, unctrl_edges, losing,
                  marks(spec.goals), marks(spec.assumptions))
    log.debug("game: %d nodes, %d losing", n, int(losing.sum()))
    return g


# -- solving ----------------------------------------------------------------------

class _Arena:
    """Flattened option table for vectorised controllable-predecessor sets."""

    def __init__(self, g: GameGraph):
        n = g.num_nodes
        node_opts = [g.options(i) for i in range(n)]
        self.node_opts = node_opts
        opt_node, starts, flat = [], [], []
        for i, opts in enumerate(node_opts):
            for _, succ in opts:
                opt_node.append(i)
                starts.append(len(flat))
                flat.extend(succ)
        self.n = n
        self.opt_node = np.array(opt_node, dtype=np.intp)
        self.starts = np.array(starts, dtype=np.intp)
        self.flat = np.array(flat, dtype=np.intp)

    def cpre(self, target: np.ndarray) -> np.ndarray:
        """Nodes with some option whose every outcome lies in ``target``."""
        out = np.zeros(self.n, dtype=bool)
        if len(self.starts):
            ok = np.logical_and.reduceat(target[self.flat], self.starts)
            out[self.opt_node[ok]] = True
        return out


@dataclass
class _GoalLayers:
    rank: np.ndarray            # first layer containing the node, -1 if none
    via: np.ndarray             # assumption index whose X-set admitted the node
    layers: list[np.ndarray]    # cumulative Y sets
    xsets: list[list[np.ndarray]]


@dataclass
class Strategy:
    game: GameGraph
    winning: np.ndarray
    goal_layers: list[_GoalLayers]
    iterations: int = 0

    def next_memory(self, n: int, j: int) -> int:
        marks = self.game.goal_marks
        if marks.shape[0] == 0:
            return 0
        return (j + 1) % marks.shape[0] if marks[j, n] else j

    def choose(self, n: int, j: int) -> str | None:
        """Controller choice at node ``n`` pursuing goal ``j`` (``None`` = wait)."""
        g, gl = self.game, self.goal_layers[j]
        opts = g.options(n)
        marks = g.goal_marks
        is_goal = marks[j, n] if marks.shape[0] else True
        r = int(gl.rank[n])
        if r < 0:
            raise ValueError(f"node {n} is outside the winning region")
        targets = []
        if is_goal:
            targets.append(self.winning)
        if r > 0:
            targets.append(gl.layers[r - 1])
        targets.append(gl.xsets[r][int(gl.via[n])])
        for tgt in targets:
            for lab, succ in opts:
                if all(tgt[s] for s in succ):
                    return lab
        raise AssertionError(f"no winning option at node {n} for goal {j}")


@dataclass
class Unrealizable:
    game: GameGraph
    winning: np.ndarray
    losing_initial: frozenset[int]

    def describe(self) -> str:
        g = self.game
        parts = []
        for n in sorted(self.losing_initial):
            s, vals, last, bad = g.keys[n]
            reason = "violates safety" if bad else "outside winning region"
            parts.append(f"initial node {n} (env state {s}, fluents "
                         f"{dict(zip(g.fluent_names, vals))}) {reason}")
        parts.append(f"winning region: {int(self.winning.sum())}/{g.num_nodes} nodes")
        return "; ".join(parts)

    def __bool__(self):
        return False


def _layers(ar: _Arena, safe, Z, goal, assm) -> _GoalLayers:
    n = ar.n
    Y = np.zeros(n, dtype=bool)
    base = goal & ar.cpre(Z) & Z
    layers, xsets = [], []
    rank = np.full(n, -1, dtype=np.int64)
    via = np.zeros(n, dtype=np.int64)
    while True:
        start = (base | ar.cpre(Y)) & Z
        new = start.copy()
        xs = []
        for i in range(assm.shape[0]):
            X = Z.copy()
            while True:
                Xn = (start | (~assm[i] & ar.cpre(X))) & Z
                if np.array_equal(Xn, X):
                    break
                X = Xn
            xs.append(X)
            new |= X
        if np.array_equal(new, Y):
            break
        fresh = new & (rank < 0)
        for i in range(len(xs) - 1, -1, -1):
            via[fresh & xs[i]] = i
        rank[fresh] = len(layers)
        layers.append(new)
        xsets.append(xs)
        Y = new
    return _GoalLayers(rank, via, layers, xsets)


def solve_gr1(g: GameGraph) -> Strategy | Unrealizable:
    """Solve the game by the nested greatest/least/greatest fixpoint.

    Every least-fixpoint computation is confined to the current candidate
    region so that, at the fixpoint, all attractor layers lie inside the
    winning region.
    """
    ar = _Arena(g)
    n = g.num_nodes
    safe = ~g.losing
    goals = g.goal_marks if g.goal_marks.shape[0] else np.ones((1, n), dtype=bool)
    assm = g.assumption_marks if g.assumption_marks.shape[0] else np.ones((1, n), dtype=bool)
    Z = safe.copy()
    it = 0
    while True:
        it += 1
        newZ = Z.copy()
        for j in range(goals.shape[0]):
            gl = _layers(ar, safe, newZ, goals[j], assm)
            newZ &= gl.layers[-1] if gl.layers else np.zeros(n, dtype=bool)
        if np.array_equal(newZ, Z):
            break
        Z = newZ
    log.debug("GR(1) fixpoint: %d outer iterations, |Z| = %d", it, int(Z.sum()))
    if not Z[g.initial]:
        return Unrealizable(g, Z, frozenset({g.initial}))
    layers = [_layers(ar, safe, Z, goals[j], assm) for j in range(goals.shape[0])]
    return Strategy(g, Z, layers, it)


# -- controller -------------------------------------------------------------------

@dataclass
class Controller:
    """Strategy as an LTS over the environment alphabet.

    ``memory[s]`` is the goal index pursued in controller state ``s``;
    ``nodes[s]`` is the game node it tracks (``-1`` when loaded from a file).
    """
    lts: Lts
    memory: tuple[int, ...]
    nodes: tuple[int, ...] = field(default=())

    def choice(self, state: int) -> str | None:
        """The controllable action enabled in ``state`` (at most one)."""
        for lab in self.lts.successors(state):
            if self.lts.is_controllable(lab):
                return lab
        return None


def extract_controller(g: GameGraph, s: Strategy) -> Controller:
    """Unfold the strategy from the initial node; states are (node, goal index)."""
    env = g.problem.environment
    init = (g.initial, s.next_memory(g.initial, 0))
    index = {init: 0}
    order = [init]
    trans = []
    queue = deque([init])
    while queue:
        cur = queue.popleft()
        n, j = cur
        choice = s.choose(n, j)
        moves = list(g.unctrl_edges[n])
        if choice is not None:
            moves.extend((lab, t) for lab, t in g.ctrl_edges[n] if lab == choice)
        moves.sort()
        for lab, t in moves:
            nxt = (t, s.next_memory(t, j))
            tgt = index.get(nxt)
            if tgt is None:
                tgt = index[nxt] = len(order)
                order.append(nxt)
                queue.append(nxt)
            trans.append((index[cur], lab, tgt))
    lts = Lts(len(order), 0, env.alphabet, trans)
    return Controller(lts, tuple(j for _, j in order), tuple(n for n, _ in order))


def synthesize(p: ControlProblem) -> Controller | Unrealizable:
    g = build_game(p)
    res = solve_gr1(g)
    if isinstance(res, Unrealizable):
        return res
    return extract_controller(g, res)


# -- export format ------------------------------------------------------------------

CONTROLLER_MAGIC = "MISSIONSYNTH-CONTROLLER 1"


class ControllerFormatError(ValueError):
    pass


def dump_controller(c: Controller) -> str:
    lines = [CONTROLLER_MAGIC, "alphabet"]
    lines.extend(f"{'ctrl' if ctrl else 'unctrl'} {name}" for name, ctrl in c.lts.alphabet.items())
    lines.append(f"states {c.lts.num_states}")
    lines.append(f"initial {c.lts.initial}")
    lines.append("memory")
    lines.extend(f"{s} {m}" for s, m in enumerate(c.memory))
    lines.append("transitions")
    lines.extend(f"{s} {lab} {t}" for s, lab, t in c.lts.transitions)
    return "\n".join(lines) + "\n"


def load_controller(text: str) -> Controller:
    lines = [ln.strip() for ln in text.splitlines()]
    lines = [ln for ln in lines if ln and not ln.startswith("#")]
    if not lines or lines[0] != CONTROLLER_MAGIC:
        raise ControllerFormatError(f"missing header line {CONTROLLER_MAGIC!r}")
    alphabet, memory, trans = {}, {}, []
    n = initial = None
    section = None
    for ln in lines[1:]:
        parts = ln.split()
        head = parts[0]
        try:
            if head in ("alphabet", "memory", "transitions"):
                section = head
            elif head == "states":
                n = int(parts[1])
            elif head == "initial":
                initial = int(parts[1])
            elif section == "alphabet":
                if head not in ("ctrl", "unctrl"):
                    raise ControllerFormatError(f"bad alphabet record {ln!r}")
                alphabet[parts[1]] = head == "ctrl"
            elif section == "memory":
                memory[int(parts[0])] = int(parts[1])
            elif section == "transitions":
                trans.append((int(parts[0]), parts[1], int(parts[2])))
            else:
                raise ControllerFormatError(f"unexpected record {ln!r}")
        except (IndexError, ValueError) as exc:
            if isinstance(exc, ControllerFormatError):
                raise
            raise ControllerFormatError(f"malformed record {ln!r}") from exc
    if n is None or initial is None:
        raise ControllerFormatError("missing 'states' or 'initial'")
    try:
        lts = Lts(n, initial, alphabet, trans)
    except LtsError as exc:
        raise ControllerFormatError(str(exc)) from exc
    return Controller(lts, tuple(memory.get(s, 0) for s in range(n)), tuple([-1] * n))
