"""Runtime interpretation of a synthesized controller.

Hybrid modules post uncontrollable events into a FIFO queue; the enactor
consumes them and dispatches whatever controllable action the controller
enables next.
"""
from __future__ import annotations

import logging
from collections import deque
from dataclasses import dataclass, field
from typing import Iterable, Sequence

from .fltl import (Formula, Fluent, UnsupportedFragment, classify_gr1,
                   eval_state, evaluate_lasso, format_formula, initial_values, update_fluents)
from .lts import Lts
from .robot_sim import ActuatorCmd, Simulator
from .synthesis import Controller

log = logging.getLogger(__name__)

__all__ = [
    "EventQueue", "TraceEntry", "EnactmentTrace", "UnexpectedEvent", "NoHandler",
    "step", "run_mission", "format_trace", "parse_trace", "check_trace", "TickLog",
    "ENACTOR_PERIOD",
]

ENACTOR_PERIOD = 0.05


class UnexpectedEvent(RuntimeError):
    pass


class NoHandler(RuntimeError):
    pass


class EventQueue:
    """FIFO of event names. ``deque.append``/``popleft`` are atomic, so many
    producers and one consumer may share it."""

    def __init__(self, events: Iterable[str] = ()):
        self._q = deque(events)

    def put(self, event: str) -> None:
        self._q.append(event)

    def get(self) -> str | None:
        return self._q.popleft() if self._q else None

    def __len__(self):
        return len(self._q)

    def __bool__(self):
        return bool(self._q)


@dataclass(frozen=True)
class TraceEntry:
    t: float
    source: str     # "dispatched" | "received"
    action: str
    state: int

    def format(self) -> str:
        return f"t={self.t:.3f} {self.source} {self.action} state={self.state}"


@dataclass
class EnactmentTrace:
    entries: list[TraceEntry] = field(default_factory=list)
    timed_out: bool = False
    final_state: int = 0

    @property
    def actions(self) -> list[str]:
        return [e.action for e in self.entries]

    def __len__(self):
        return len(self.entries)


def _controllable_choice(lts: Lts, state: int) -> str | None:
    for lab in lts.successors(state):
        if lts.is_controllable(lab):
            return lab
    return None


def step(controller: Controller | Lts, state: int, queue: EventQueue, modules=(),
         sim: Simulator | None = None, t: float = 0.0,
         trace: EnactmentTrace | None = None) -> tuple[int, str | None]:
    """Consume one queued event, or else dispatch the enabled controllable action.

    Returns the new controller state and the dispatched action (``None`` when
    an event was consumed or nothing was enabled).
    """
    lts = controller.lts if isinstance(controller, Controller) else controller
    event = queue.get()
    if event is not None:
        nxt = lts.step(state, event)
        if nxt is None or lts.is_controllable(event):
            raise UnexpectedEvent(f"event {event} not enabled in controller state {state} "
                                  f"(enabled: {', '.join(lts.enabled(state)) or 'nothing'})")
        if trace is not None:
            trace.entries.append(TraceEntry(t, "received", event, nxt))
        return nxt, None
    action = _controllable_choice(lts, state)
    if action is None:
        return state, None
    handler = next((m for m in modules if m.handles(action)), None)
    if handler is None:
        raise NoHandler(f"no hybrid module registered for {action}")
    nxt = lts.step(state, action)
    assert nxt is not None
    handler.dispatch(action, sim)
    if trace is not None:
        trace.entries.append(TraceEntry(t, "dispatched", action, nxt))
    return nxt, action


class TickLog:
    """Per-tick simulation log: ``t x y theta phase fwd V alert``."""

    HEADER = "t x y theta phase fwd V alert"

    def __init__(self):
        self.lines = [self.HEADER]
        self.rows: list[tuple] = []

    def record(self, sim: Simulator, phase: str, forward: bool) -> None:
        s = sim.state
        self.rows.append((s.t, s.x, s.y, s.theta))
        self.lines.append(f"{s.t:.3f} {s.x:.3f} {s.y:.3f} {s.theta:.5f} {phase} {int(forward)} "
                          f"{sim.last_V:.4f} {int(s.alert)}")

    def text(self) -> str:
        return "\n".join(self.lines) + "\n"

    def csv(self) -> str:
        out = ["t,x,y,theta"]
        out.extend(f"{t:.3f},{x:.3f},{y:.3f},{th:.5f}" for t, x, y, th in self.rows)
        return "\n".join(out) + "\n"


def run_mission(controller: Controller | Lts, modules: Sequence, sim: Simulator,
                budget: float, queue: EventQueue, period: float = ENACTOR_PERIOD,
                tick_log: TickLog | None = None, observer=None) -> EnactmentTrace:
    """Interleave enactor cycles with simulator ticks for ``budget`` seconds.

    Every ``period`` seconds the enactor drains ``queue`` (the channel the
    modules post to) and then dispatches at most one controllable action.
    ``observer(sim)``, if given, is called after every tick.
    """
    lts = controller.lts if isinstance(controller, Controller) else controller
    trace = EnactmentTrace()
    state = lts.initial
    if not lts.controllable:
        trace.timed_out = True
        return trace
    dt = sim.params.dt
    n_ticks = int(round(budget / dt))
    every = max(1, int(round(period / dt)))
    motion = [m for m in modules if hasattr(m, "phase")]
    for k in range(n_ticks):
        t = k * dt
        if k % every == 0:
            while queue:
                state, _ = step(lts, state, queue, modules, sim, t, trace)
            state, _ = step(lts, state, queue, modules, sim, t, trace)
            if not lts.successors(state):
                log.warning("controller state %d has no outgoing transition", state)
                break
        cmd = None
        for m in modules:
            cmd = m.command(sim) or cmd
        cmd = cmd or ActuatorCmd()
        sim.tick(cmd)
        for m in modules:
            m.after_tick(sim)
        if tick_log is not None:
            phase = motion[0].phase.value if motion else "done"
            tick_log.record(sim, phase, cmd.forward)
        if observer is not None:
            observer(sim)
    else:
        trace.timed_out = True
    trace.final_state = state
    return trace


# -- trace files ---------------------------------------------------------------------

def format_trace(trace: EnactmentTrace) -> str:
    return "".join(e.format() + "\n" for e in trace.entries)


def parse_trace(text: str) -> tuple[list[str], list[str]]:
    """Actions of a trace file as ``(prefix, loop)``.

    Lines are either enactment records ``t=... <source> <action> state=...``
    or bare action names. A line ``@loop`` starts the periodic part; without
    it the loop is empty and the trace is finite.
    """
    prefix: list[str] = []
    loop: list[str] = []
    cur = prefix
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line == "@loop":
            if cur is loop:
                raise ValueError(f"line {lineno}: second @loop marker")
            cur = loop
            continue
        parts = line.split()
        if parts[0].startswith("t="):
            if len(parts) < 3 or parts[1] not in ("dispatched", "received"):
                raise ValueError(f"line {lineno}: malformed trace record {line!r}")
            cur.append(parts[2])
        elif len(parts) == 1:
            cur.append(parts[0])
        else:
            raise ValueError(f"line {lineno}: malformed trace record {line!r}")
    if cur is loop and not loop:
        raise ValueError("@loop marker with an empty loop")
    return prefix, loop


def _finite_safety(f: Formula, actions: Sequence[str], fluents: Sequence[Fluent]) -> bool:
    """Whether a finite run violates none of the safety rules in ``f``."""
    spec = classify_gr1(safety=[f], fluents=fluents)
    decl = {fl.name: fl for fl in fluents}
    vals = initial_values(fluents, spec.singletons())
    invariants = [r.guard for r in spec.safety if r.next_body is None]
    rules = [(r.guard, r.next_body) for r in spec.safety if r.next_body is not None]
    if any(not eval_state(g, vals) for g in invariants):
        return False
    for a in actions:
        pending = [nb for g, nb in rules if eval_state(g, vals)]
        vals = update_fluents(vals, a, decl)
        if any(not eval_state(g, vals) for g in invariants) or \
                any(not eval_state(nb, vals) for nb in pending):
            return False
    return True


def check_trace(prefix: Sequence[str], loop: Sequence[str], formulas: Iterable[Formula],
                fluents: Sequence[Fluent] = ()) -> list[tuple[Formula, str]]:
    """Per-formula verdicts: ``pass``, ``fail`` or ``inconclusive``.

    Lassos are decided exactly. On a finite trace only safety rules can be
    decided (a violation is final; no violation is reported as ``pass`` for
    the prefix); anything else is ``inconclusive``.
    """
    out = []
    for f in formulas:
        if loop:
            out.append((f, "pass" if evaluate_lasso(f, prefix, loop, fluents) else "fail"))
            continue
        try:
            ok = _finite_safety(f, prefix, fluents)
        except UnsupportedFragment:
            out.append((f, "inconclusive"))
        else:
            out.append((f, "pass" if ok else "fail"))
    return out


def format_verdicts(verdicts) -> str:
    return "".join(f"{v:<13} {format_formula(f)}\n" for f, v in verdicts)


__all__.append("format_verdicts")
