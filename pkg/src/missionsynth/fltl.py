"""Fluents and fluent linear temporal logic over action traces.

A trace position ``i`` is the instant just after the ``i``-th action. A fluent
``<set_true, set_false, initial>`` holds at ``i`` according to the last action
in either set at or before ``i`` (``initial`` if there was none). An atom that
does not name a declared fluent is an action singleton: it holds exactly at the
positions whose action carries that name.
"""
from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

__all__ = [
    "Fluent", "Formula", "Const", "Atom", "Not", "And", "Or", "Implies",
    "Next", "Eventually", "Always", "WeakUntil",
    "TRUE", "FALSE", "conj", "disj",
    "FormulaSyntaxError", "UnsupportedFragment", "UnknownAtom",
    "parse_formula", "format_formula", "depth", "atoms", "is_propositional",
    "update_fluents", "initial_values", "eval_state", "evaluate_lasso",
    "SafetyRule", "Gr1Spec", "classify_gr1", "split_conjuncts",
]


@dataclass(frozen=True)
class Fluent:
    name: str
    set_true: frozenset[str]
    set_false: frozenset[str]
    initial: bool = False

    def __init__(self, name, set_true, set_false, initial=False):
        object.__setattr__(self, "name", name)
        object.__setattr__(self, "set_true", frozenset(set_true))
        object.__setattr__(self, "set_false", frozenset(set_false))
        object.__setattr__(self, "initial", bool(initial))
        clash = self.set_true & self.set_false
        if clash:
            raise ValueError(f"fluent {name}: {sorted(clash)} both set and unset it")


# -- syntax ---------------------------------------------------------------------

class Formula:
    __slots__ = ()

    def __post_init__(self):
        object.__setattr__(self, "_hash", hash((type(self).__name__, *self.__dict__.values())))

    def __reduce__(self):
        # rebuild through the constructor: string hashes differ between processes
        return type(self), tuple(v for k, v in self.__dict__.items() if k != "_hash")

    def __and__(self, other):
        return And(self, other)

    def __or__(self, other):
        return Or(self, other)

    def __invert__(self):
        return Not(self)

    def __rshift__(self, other):
        return Implies(self, other)

    def __str__(self):
        return format_formula(self)


@dataclass(frozen=True, repr=False)
class Const(Formula):
    value: bool

    def __repr__(self):
        return "TRUE" if self.value else "FALSE"


@dataclass(frozen=True)
class Atom(Formula):
    name: str


@dataclass(frozen=True)
class Not(Formula):
    arg: Formula


@dataclass(frozen=True)
class And(Formula):
    left: Formula
    right: Formula


@dataclass(frozen=True)
class Or(Formula):
    left: Formula
    right: Formula


@dataclass(frozen=True)
class Implies(Formula):
    left: Formula
    right: Formula


@dataclass(frozen=True)
class Next(Formula):
    arg: Formula


@dataclass(frozen=True)
class Eventually(Formula):
    arg: Formula


@dataclass(frozen=True)
class Always(Formula):
    arg: Formula


@dataclass(frozen=True)
class WeakUntil(Formula):
    left: Formula
    right: Formula


TRUE = Const(True)
FALSE = Const(False)

_UNARY = (Not, Next, Eventually, Always)
_BINARY = (And, Or, Implies, WeakUntil)


def _node_hash(self):
    return self._hash


# formulas are immutable trees used as dict keys everywhere; hash each node once
for _cls in (Const, Atom) + _UNARY + _BINARY:
    _cls.__hash__ = _node_hash
_TEMPORAL = (Next, Eventually, Always, WeakUntil)


def conj(items: Iterable[Formula]) -> Formula:
    items = list(items)
    if not items:
        return TRUE
    out = items[-1]
    for f in reversed(items[:-1]):
        out = And(f, out)
    return out


def disj(items: Iterable[Formula]) -> Formula:
    items = list(items)
    if not items:
        return FALSE
    out = items[-1]
    for f in reversed(items[:-1]):
        out = Or(f, out)
    return out


def depth(f: Formula) -> int:
    if isinstance(f, (Const, Atom)):
        return 1
    if isinstance(f, _UNARY):
        return 1 + depth(f.arg)
    return 1 + max(depth(f.left), depth(f.right))


def atoms(f: Formula) -> set[str]:
    if isinstance(f, Atom):
        return {f.name}
    if isinstance(f, Const):
        return set()
    if isinstance(f, _UNARY):
        return atoms(f.arg)
    return atoms(f.left) | atoms(f.right)


def is_propositional(f: Formula) -> bool:
    if isinstance(f, (Const, Atom)):
        return True
    if isinstance(f, _TEMPORAL):
        return False
    if isinstance(f, Not):
        return is_propositional(f.arg)
    return is_propositional(f.left) and is_propositional(f.right)


# -- parser ---------------------------------------------------------------------

class FormulaSyntaxError(ValueError):
    def __init__(self, msg, text="", pos=0):
        super().__init__(f"{msg} at column {pos + 1}" if text else msg)
        self.text = text
        self.pos = pos


_TOKEN_RE = re.compile(r"""
    (?P<ws>\s+)
  | (?P<op>\[\]|<>|->|=>|&&|\|\||[!~&|()□◇¬∧∨⇒∘])
  | (?P<name>[A-Za-z_][A-Za-z0-9_]*(?:\.[A-Za-z_][A-Za-z0-9_]*)*(?:\[-?[0-9]+\])*)
""", re.VERBOSE)

_CANON = {
    "□": "[]", "◇": "<>", "¬": "!", "~": "!", "∧": "&&", "&": "&&",
    "∨": "||", "|": "||", "⇒": "->", "=>": "->", "∘": "X",
}


def _tokenize(text: str) -> list[tuple[str, int]]:
    out, pos = [], 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            raise FormulaSyntaxError(f"unexpected character {text[pos]!r}", text, pos)
        if m.lastgroup != "ws":
            tok = m.group()
            out.append((_CANON.get(tok, tok), pos))
        pos = m.end()
    return out


class _Parser:
    def __init__(self, text):
        self.text = text
        self.toks = _tokenize(text)
        self.i = 0

    def peek(self):
        return self.toks[self.i][0] if self.i < len(self.toks) else None

    def take(self, expected=None):
        if self.i >= len(self.toks):
            raise FormulaSyntaxError("unexpected end of formula", self.text, len(self.text))
        tok, pos = self.toks[self.i]
        if expected is not None and tok != expected:
            raise FormulaSyntaxError(f"expected {expected!r}, found {tok!r}", self.text, pos)
        self.i += 1
        return tok

    def parse(self):
        f = self.implies()
        if self.i != len(self.toks):
            tok, pos = self.toks[self.i]
            raise FormulaSyntaxError(f"unexpected token {tok!r}", self.text, pos)
        return f

    def implies(self):
        left = self.or_()
        if self.peek() == "->":
            self.take()
            return Implies(left, self.implies())
        return left

    def or_(self):
        f = self.and_()
        while self.peek() == "||":
            self.take()
            f = Or(f, self.and_())
        return f

    def and_(self):
        f = self.until()
        while self.peek() == "&&":
            self.take()
            f = And(f, self.until())
        return f

    def until(self):
        left = self.unary()
        if self.peek() == "W":
            self.take()
            return WeakUntil(left, self.until())
        return left

    def unary(self):
        tok = self.peek()
        if tok == "!":
            self.take()
            return Not(self.unary())
        if tok == "X":
            self.take()
            return Next(self.unary())
        if tok == "<>":
            self.take()
            return Eventually(self.unary())
        if tok == "[]":
            self.take()
            return Always(self.unary())
        if tok == "(":
            self.take()
            f = self.implies()
            self.take(")")
            return f
        if tok is None:
            raise FormulaSyntaxError("unexpected end of formula", self.text, len(self.text))
        pos = self.toks[self.i][1]
        self.take()
        if tok in ("true", "false"):
            return Const(tok == "true")
        if tok in ("W", ")", "->", "||", "&&"):
            raise FormulaSyntaxError(f"unexpected token {tok!r}", self.text, pos)
        return Atom(tok)


def parse_formula(text: str) -> Formula:
    """Parse ASCII (``[] <> X W ! && || ->``) or Unicode (``□ ◇ ∘ ¬ ∧ ∨ ⇒``) syntax.

    Precedence from loosest: ``->`` (right associative), ``||``, ``&&``,
    ``W`` (right associative), then the prefix operators.
    """
    return _Parser(text).parse()


_BIN_SYM = {And: "&&", Or: "||", Implies: "->", WeakUntil: "W"}
_UN_SYM = {Not: "!", Next: "X ", Eventually: "<>", Always: "[]"}


def format_formula(f: Formula) -> str:
    if isinstance(f, Const):
        return "true" if f.value else "false"
    if isinstance(f, Atom):
        return f.name
    if isinstance(f, _UNARY):
        return _UN_SYM[type(f)] + format_formula(f.arg)
    return f"({format_formula(f.left)} {_BIN_SYM[type(f)]} {format_formula(f.right)})"


# -- semantics ------------------------------------------------------------------

def initial_values(fluents: Iterable[Fluent], singletons: Iterable[str] = ()) -> dict[str, bool]:
    values = {fl.name: fl.initial for fl in fluents}
    for name in singletons:
        values.setdefault(name, False)
    return values


def update_fluents(values: Mapping[str, bool], action: str,
                   fluents: Mapping[str, Fluent] | Iterable[Fluent]) -> dict[str, bool]:
    """Valuation after ``action``.

    Keys of ``values`` that are declared fluents follow their set/unset
    events; any other key is an action singleton and becomes ``action == key``.
    """
    if not isinstance(fluents, Mapping):
        fluents = {fl.name: fl for fl in fluents}
    out = {}
    for name, val in values.items():
        fl = fluents.get(name)
        if fl is None:
            out[name] = action == name
        elif action in fl.set_true:
            out[name] = True
        elif action in fl.set_false:
            out[name] = False
        else:
            out[name] = val
    return out


def eval_state(f: Formula, values: Mapping[str, bool], last_action: str | None = None) -> bool:
    """Propositional truth of ``f`` at a single position.

    Atoms missing from ``values`` are action singletons compared against
    ``last_action``.
    """
    if isinstance(f, Atom):
        v = values.get(f.name)
        return (last_action == f.name) if v is None else v
    if isinstance(f, Const):
        return f.value
    if isinstance(f, Not):
        return not eval_state(f.arg, values, last_action)
    if isinstance(f, And):
        return eval_state(f.left, values, last_action) and eval_state(f.right, values, last_action)
    if isinstance(f, Or):
        return eval_state(f.left, values, last_action) or eval_state(f.right, values, last_action)
    if isinstance(f, Implies):
        return (not eval_state(f.left, values, last_action)) or eval_state(f.right, values, last_action)
    raise UnsupportedFragment(f"temporal operator in state formula", f)


@dataclass
class _LassoModel:
    """Ultimately periodic valuation word: positions ``0..n-1``, back edge to ``loop_start``."""
    columns: dict[str, list[bool]]
    n: int
    loop_start: int


def _lasso_model(prefix: Sequence[str], loop: Sequence[str], fluents: Sequence[Fluent],
                 names: Iterable[str]) -> _LassoModel:
    declared = {fl.name: fl for fl in fluents}
    names = sorted(set(names))
    vals = {fl.name: fl.initial for fl in fluents}
    cols: dict[str, list[bool]] = {name: [] for name in names}

    def emit(action):
        for name, fl in declared.items():
            if action in fl.set_true:
                vals[name] = True
            elif action in fl.set_false:
                vals[name] = False
        for name in names:
            cols[name].append(vals[name] if name in declared else action == name)

    for a in prefix:
        emit(a)
    # iterate the loop until the fluent valuation at an iteration boundary repeats
    bound = 2 ** len(declared) + 1
    seen: dict[tuple, int] = {}
    pos = len(prefix)
    boundary = tuple(sorted(vals.items()))
    while boundary not in seen:
        if len(seen) > bound:
            raise AssertionError("fluent valuation failed to stabilise")
        seen[boundary] = pos
        for a in loop:
            emit(a)
        pos += len(loop)
        boundary = tuple(sorted(vals.items()))
    loop_start, n = seen[boundary], pos
    return _LassoModel(cols, n, loop_start)


def _eval_columns(f: Formula, m: _LassoModel, memo: dict) -> list[bool]:
    hit = memo.get(f)
    if hit is not None:
        return hit
    n, L = m.n, m.loop_start
    t = type(f)
    if t is Atom:
        res = m.columns[f.name]
    elif t is Const:
        res = [f.value] * n
    elif t is Not:
        res = [not v for v in _eval_columns(f.arg, m, memo)]
    elif t is And:
        a, b = _eval_columns(f.left, m, memo), _eval_columns(f.right, m, memo)
        res = [x and y for x, y in zip(a, b)]
    elif t is Or:
        a, b = _eval_columns(f.left, m, memo), _eval_columns(f.right, m, memo)
        res = [x or y for x, y in zip(a, b)]
    elif t is Implies:
        a, b = _eval_columns(f.left, m, memo), _eval_columns(f.right, m, memo)
        res = [(not x) or y for x, y in zip(a, b)]
    elif t is Next:
        a = _eval_columns(f.arg, m, memo)
        res = a[1:] + [a[L]]
    elif t is Eventually or t is Always:
        a = _eval_columns(f.arg, m, memo)
        agg = any if t is Eventually else all
        in_loop = agg(a[L:])
        res = [in_loop] * n
        for i in range(L - 1, -1, -1):
            res[i] = (a[i] or res[i + 1]) if agg is any else (a[i] and res[i + 1])
    elif t is WeakUntil:
        a, b = _eval_columns(f.left, m, memo), _eval_columns(f.right, m, memo)
        # greatest fixpoint of w = b | (a & X w); two backward sweeps settle the loop
        res = [True] * n
        for _ in range(2):
            for i in range(n - 1, L - 1, -1):
                nxt = res[i + 1] if i + 1 < n else res[L]
                res[i] = b[i] or (a[i] and nxt)
        for i in range(L - 1, -1, -1):
            res[i] = b[i] or (a[i] and res[i + 1])
    else:
        raise TypeError(f"not a formula: {f!r}")
    memo[f] = res
    return res


def evaluate_lasso(f: Formula, prefix: Sequence[str], loop: Sequence[str],
                   fluents: Sequence[Fluent] = ()) -> bool:
    """Truth of ``f`` at position 0 of the infinite trace ``prefix · loop^ω``."""
    if not loop:
        raise ValueError("lasso loop must be non-empty")
    model = _lasso_model(prefix, loop, fluents, atoms(f) | {fl.name for fl in fluents})
    return _eval_columns(f, model, {})[0]


class LassoEvaluator:
    """Evaluate many formulas on one lasso, sharing subformula results."""

    def __init__(self, prefix: Sequence[str], loop: Sequence[str],
                 fluents: Sequence[Fluent] = (), singletons: Iterable[str] = ()):
        if not loop:
            raise ValueError("lasso loop must be non-empty")
        names = {fl.name for fl in fluents} | set(singletons) | set(prefix) | set(loop)
        self._model = _lasso_model(prefix, loop, fluents, names)
        self._memo: dict = {}

    def __call__(self, f: Formula) -> bool:
        return _eval_columns(f, self._model, self._memo)[0]

    def column(self, f: Formula) -> tuple[bool, ...]:
        """Truth of ``f`` at every position of the unrolled lasso."""
        return tuple(_eval_columns(f, self._model, self._memo))


__all__.append("LassoEvaluator")


# -- GR(1) fragment -------------------------------------------------------------

class UnsupportedFragment(ValueError):
    def __init__(self, msg, subtree=None):
        if subtree is not None:
            msg = f"{msg}: {format_formula(subtree)}"
        super().__init__(msg)
        self.subtree = subtree


class UnknownAtom(ValueError):
    pass


def split_conjuncts(f: Formula) -> list[Formula]:
    if isinstance(f, And):
        return split_conjuncts(f.left) + split_conjuncts(f.right)
    return [f]


@dataclass(frozen=True)
class SafetyRule:
    """``□ guard`` when ``next_body`` is None, else ``□(guard ⇒ ∘ next_body)``."""
    guard: Formula
    next_body: Formula | None = None

    @property
    def formula(self) -> Formula:
        if self.next_body is None:
            return Always(self.guard)
        return Always(Implies(self.guard, Next(self.next_body)))


def _safety_rules(f: Formula) -> list[SafetyRule]:
    rules = []
    for top in split_conjuncts(f):
        if not isinstance(top, Always):
            raise UnsupportedFragment("safety formula must be rooted at []", top)
        for body in split_conjuncts(top.arg):
            if is_propositional(body):
                rules.append(SafetyRule(body))
            elif (isinstance(body, Implies) and is_propositional(body.left)
                  and isinstance(body.right, Next) and is_propositional(body.right.arg)):
                rules.append(SafetyRule(body.left, body.right.arg))
            else:
                raise UnsupportedFragment("unsupported safety body", body)
    return rules


def _recurrence_bodies(f: Formula, kind: str) -> list[Formula]:
    out = []
    for top in split_conjuncts(f):
        if not (isinstance(top, Always) and isinstance(top.arg, Eventually)):
            raise UnsupportedFragment(f"{kind} must have the form []<>(boolean)", top)
        body = top.arg.arg
        if not is_propositional(body):
            raise UnsupportedFragment(f"{kind} body must be boolean", body)
        out.append(body)
    return out


@dataclass(frozen=True)
class Gr1Spec:
    """``∧ □◇ assumption ⇒ ∧ □◇ goal`` conjoined with safety rules."""
    safety: tuple[SafetyRule, ...] = ()
    assumptions: tuple[Formula, ...] = ()
    goals: tuple[Formula, ...] = ()
    fluents: tuple[Fluent, ...] = field(default=())

    def atoms(self) -> set[str]:
        out = set()
        for r in self.safety:
            out |= atoms(r.guard)
            if r.next_body is not None:
                out |= atoms(r.next_body)
        for b in self.assumptions + self.goals:
            out |= atoms(b)
        return out

    def singletons(self) -> set[str]:
        declared = {fl.name for fl in self.fluents}
        return {a for a in self.atoms() if a not in declared}

    def check_closed(self, alphabet: Iterable[str]) -> None:
        alphabet = set(alphabet)
        bad = sorted(a for a in self.singletons() if a not in alphabet)
        if bad:
            raise UnknownAtom(f"atoms {bad} are neither fluents nor actions")

    def liveness_formula(self) -> Formula:
        goals = conj(Always(Eventually(g)) for g in self.goals)
        if not self.assumptions:
            return goals
        return Implies(conj(Always(Eventually(a)) for a in self.assumptions), goals)

    def formulas(self) -> list[Formula]:
        """Every conjunct of this GR(1) goal as a standalone FLTL formula."""
        return [r.formula for r in self.safety] + [self.liveness_formula()]


def classify_gr1(safety: Iterable[Formula] = (), assumptions: Iterable[Formula] = (),
                 goals: Iterable[Formula] = (), fluents: Iterable[Fluent] = ()) -> Gr1Spec:
    """Validate formulas against the supported fragment and package them.

    Safety formulas are ``□`` over boolean bodies or ``□(p ⇒ ∘q)``; assumptions
    and goals are ``□◇`` over boolean bodies. Top-level conjunctions are split.
    """
    fluents = tuple(fluents)
    names = [fl.name for fl in fluents]
    if len(set(names)) != len(names):
        raise ValueError("duplicate fluent names")
    rules = [r for f in safety for r in _safety_rules(f)]
    assm = [b for f in assumptions for b in _recurrence_bodies(f, "assumption")]
    gls = [b for f in goals for b in _recurrence_bodies(f, "goal")]
    return Gr1Spec(tuple(rules), tuple(assm), tuple(gls), fluents)


def sort_formula(f: Formula) -> tuple[list[Formula], list[Formula]]:
    """Route the top-level conjuncts of ``f`` into ``(safety, goals)``."""
    safety, goals = [], []
    for c in split_conjuncts(f):
        if isinstance(c, Always) and isinstance(c.arg, Eventually):
            goals.append(c)
        elif isinstance(c, Always):
            safety.append(c)
        else:
            raise UnsupportedFragment("formula is neither []<> nor []", c)
    return safety, goals


__all__.append("sort_formula")
