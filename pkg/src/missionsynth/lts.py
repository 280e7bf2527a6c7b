"""Deterministic labelled transition systems.

States are integers ``0..n-1`` assigned in construction order. Every action
label carries a controllability flag that belongs to the alphabet, never to
individual transitions.
"""
from __future__ import annotations

import re
from collections import deque
from dataclasses import dataclass
from typing import Iterable, Iterator, Mapping

__all__ = [
    "ActionLabel",
    "Lts",
    "LtsError",
    "ControllabilityMismatch",
    "NondeterminismError",
    "parallel_compose",
    "compose_with_origin",
    "compose_all",
    "reachable_prune",
    "check_deadlock_free",
    "isomorphic",
    "dump_lts",
    "load_lts",
]

_LABEL_RE = re.compile(r"[A-Za-z_][A-Za-z0-9_]*(\.[A-Za-z_][A-Za-z0-9_]*)*(\[-?[0-9]+\])*")


class LtsError(ValueError):
    pass


class ControllabilityMismatch(LtsError):
    pass


class NondeterminismError(LtsError):
    pass


def valid_label(name: str) -> bool:
    return _LABEL_RE.fullmatch(name) is not None


@dataclass(frozen=True, order=True)
class ActionLabel:
    name: str
    controllable: bool

    def __post_init__(self):
        if not valid_label(self.name):
            raise LtsError(f"malformed action label {self.name!r}")


class Lts:
    """Immutable deterministic LTS.

    Parameters
    ----------
    num_states:
        Number of states; states are ``range(num_states)``.
    initial:
        Initial state id.
    alphabet:
        Either a mapping ``name -> controllable`` or an iterable of
        :class:`ActionLabel`.
    transitions:
        Iterable of ``(source, label_name, target)``.
    """

    __slots__ = ("_n", "_initial", "_alphabet", "_succ")

    def __init__(
        self,
        num_states: int,
        initial: int,
        alphabet: Mapping[str, bool] | Iterable[ActionLabel],
        transitions: Iterable[tuple[int, str, int]],
    ):
        if num_states < 1:
            raise LtsError("an LTS needs at least one state")
        if not 0 <= initial < num_states:
            raise LtsError(f"initial state {initial} out of range")
        if isinstance(alphabet, Mapping):
            alpha = {str(k): bool(v) for k, v in alphabet.items()}
        else:
            alpha = {}
            for lab in alphabet:
                if lab.name in alpha and alpha[lab.name] != lab.controllable:
                    raise ControllabilityMismatch(lab.name)
                alpha[lab.name] = lab.controllable
        for name in alpha:
            if not valid_label(name):
                raise LtsError(f"malformed action label {name!r}")
        succ: list[dict[str, int]] = [{} for _ in range(num_states)]
        for s, lab, t in transitions:
            if not (0 <= s < num_states and 0 <= t < num_states):
                raise LtsError(f"transition ({s}, {lab}, {t}) leaves the state set")
            if lab not in alpha:
                raise LtsError(f"label {lab!r} not in alphabet")
            prev = succ[s].get(lab)
            if prev is not None and prev != t:
                raise NondeterminismError(f"state {s} has two {lab!r} transitions")
            succ[s][lab] = t
        self._n = num_states
        self._initial = initial
        self._alphabet = dict(sorted(alpha.items()))
        # freeze per-state maps in sorted label order for reproducible iteration
        self._succ = tuple(dict(sorted(d.items())) for d in succ)

    @property
    def num_states(self) -> int:
        return self._n

    @property
    def states(self) -> range:
        return range(self._n)

    @property
    def initial(self) -> int:
        return self._initial

    @property
    def alphabet(self) -> dict[str, bool]:
        return dict(self._alphabet)

    @property
    def labels(self) -> frozenset[ActionLabel]:
        return frozenset(ActionLabel(n, c) for n, c in self._alphabet.items())

    def is_controllable(self, label: str) -> bool:
        return self._alphabet[label]

    @property
    def controllable(self) -> frozenset[str]:
        return frozenset(n for n, c in self._alphabet.items() if c)

    @property
    def uncontrollable(self) -> frozenset[str]:
        return frozenset(n for n, c in self._alphabet.items() if not c)

    def successors(self, state: int) -> dict[str, int]:
        """Enabled labels of ``state`` mapped to their targets (sorted by label)."""
        return self._succ[state]

    def step(self, state: int, label: str) -> int | None:
        return self._succ[state].get(label)

    def enabled(self, state: int) -> list[str]:
        return list(self._succ[state])

    @property
    def transitions(self) -> Iterator[tuple[int, str, int]]:
        for s, d in enumerate(self._succ):
            for lab, t in d.items():
                yield s, lab, t

    @property
    def num_transitions(self) -> int:
        return sum(len(d) for d in self._succ)

    def accepts(self, trace: Iterable[str]) -> bool:
        """True iff ``trace`` is a finite path from the initial state."""
        s = self._initial
        for lab in trace:
            s = self._succ[s].get(lab)
            if s is None:
                return False
        return True

    def __repr__(self):
        return (f"Lts(states={self._n}, transitions={self.num_transitions}, "
                f"alphabet={len(self._alphabet)})")


def _merge_alphabets(a: Lts, b: Lts) -> dict[str, bool]:
    merged = a.alphabet
    for name, ctrl in b.alphabet.items():
        if name in merged and merged[name] != ctrl:
            raise ControllabilityMismatch(
                f"{name!r} is {'controllable' if merged[name] else 'uncontrollable'} "
                f"in one alphabet and not in the other")
        merged[name] = ctrl
    return merged


def parallel_compose(a: Lts, b: Lts) -> Lts:
    """Reachable part of ``a || b``.

    Shared labels synchronise, the rest interleave. Product states are
    numbered in breadth-first order with labels explored alphabetically.
    """
    return compose_with_origin(a, b)[0]


def compose_with_origin(a: Lts, b: Lts) -> tuple[Lts, list[tuple[int, int]]]:
    """Like :func:`parallel_compose`, also returning the component state pair
    behind every product state."""
    alphabet = _merge_alphabets(a, b)
    shared = set(a.alphabet) & set(b.alphabet)
    index = {(a.initial, b.initial): 0}
    order = [(a.initial, b.initial)]
    trans = []
    queue = deque([(a.initial, b.initial)])
    while queue:
        pair = queue.popleft()
        sa, sb = pair
        src = index[pair]
        sa_succ, sb_succ = a.successors(sa), b.successors(sb)
        moves = []
        for lab, ta in sa_succ.items():
            if lab in shared:
                tb = sb_succ.get(lab)
                if tb is not None:
                    moves.append((lab, (ta, tb)))
            else:
                moves.append((lab, (ta, sb)))
        for lab, tb in sb_succ.items():
            if lab not in shared:
                moves.append((lab, (sa, tb)))
        moves.sort(key=lambda m: m[0])
        for lab, nxt in moves:
            tgt = index.get(nxt)
            if tgt is None:
                tgt = index[nxt] = len(order)
                order.append(nxt)
                queue.append(nxt)
            trans.append((src, lab, tgt))
    return Lts(len(order), 0, alphabet, trans), order


def compose_all(components: Iterable[Lts]) -> Lts:
    it = iter(components)
    result = next(it)
    for other in it:
        result = parallel_compose(result, other)
    return result


def reachable_prune(lts: Lts) -> Lts:
    """Drop states unreachable from the initial state, renumbering in BFS order."""
    index = {lts.initial: 0}
    order = [lts.initial]
    queue = deque(order)
    while queue:
        s = queue.popleft()
        for t in lts.successors(s).values():
            if t not in index:
                index[t] = len(order)
                order.append(t)
                queue.append(t)
    trans = [(index[s], lab, index[t]) for s in order
             for lab, t in lts.successors(s).items()]
    return Lts(len(order), 0, lts.alphabet, trans)


def check_deadlock_free(lts: Lts) -> tuple[bool, list[str] | None]:
    """Return ``(True, None)`` or ``(False, path)`` with a shortest label path
    from the initial state to a reachable state with no outgoing transition."""
    parent: dict[int, tuple[int, str] | None] = {lts.initial: None}
    queue = deque([lts.initial])
    while queue:
        s = queue.popleft()
        succ = lts.successors(s)
        if not succ:
            path = []
            while parent[s] is not None:
                s, lab = parent[s]
                path.append(lab)
            return False, path[::-1]
        for lab, t in succ.items():
            if t not in parent:
                parent[t] = (s, lab)
                queue.append(t)
    return True, None


def isomorphic(a: Lts, b: Lts) -> bool:
    """Isomorphism of the reachable parts (alphabet and controllability included).

    Both systems are deterministic and rooted, so a simultaneous walk from the
    initial states either builds the bijection or finds a mismatch.
    """
    if a.alphabet != b.alphabet:
        return False
    fwd = {a.initial: b.initial}
    bwd = {b.initial: a.initial}
    queue = deque([(a.initial, b.initial)])
    while queue:
        sa, sb = queue.popleft()
        da, db = a.successors(sa), b.successors(sb)
        if da.keys() != db.keys():
            return False
        for lab, ta in da.items():
            tb = db[lab]
            if ta in fwd or tb in bwd:
                if fwd.get(ta) != tb or bwd.get(tb) != ta:
                    return False
                continue
            fwd[ta] = tb
            bwd[tb] = ta
            queue.append((ta, tb))
    return True


# -- text serialisation -------------------------------------------------------

LTS_MAGIC = "LTS 1"


def dump_lts(lts: Lts) -> str:
    """Serialise as text: alphabet header lines then one ``state label state``
    record per transition."""
    lines = [LTS_MAGIC]
    for name, ctrl in lts.alphabet.items():
        lines.append(f"{'ctrl' if ctrl else 'unctrl'} {name}")
    lines.append(f"states {lts.num_states}")
    lines.append(f"initial {lts.initial}")
    lines.append("transitions")
    lines.extend(f"{s} {lab} {t}" for s, lab, t in lts.transitions)
    return "\n".join(lines) + "\n"


def load_lts(text: str) -> Lts:
    alphabet: dict[str, bool] = {}
    trans = []
    n = initial = None
    in_trans = False
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#") or line == LTS_MAGIC:
            continue
        parts = line.split()
        try:
            if in_trans:
                trans.append((int(parts[0]), parts[1], int(parts[2])))
            elif parts[0] in ("ctrl", "unctrl"):
                alphabet[parts[1]] = parts[0] == "ctrl"
            elif parts[0] == "states":
                n = int(parts[1])
            elif parts[0] == "initial":
                initial = int(parts[1])
            elif parts[0] == "transitions":
                in_trans = True
            else:
                raise LtsError(f"line {lineno}: unexpected record {line!r}")
        except (IndexError, ValueError) as exc:
            if isinstance(exc, LtsError):
                raise
            raise LtsError(f"line {lineno}: malformed record {line!r}") from exc
    if n is None or initial is None:
        raise LtsError("missing 'states' or 'initial' header")
    return Lts(n, initial, alphabet, trans)
