"""Grid workspaces, capability models and mission files.

Cell ``(i, j)`` is row ``i`` counted from the top and column ``j`` from the
left. Its centre sits at ``origin + ((j + 0.5) * cell, (i + 0.5) * cell)`` in
millimetres, so ``x`` grows with the column and ``y`` with the row.
"""
from __future__ import annotations

import re
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable

import numpy as np

from .fltl import (Always, And, Atom, Eventually, Fluent, Formula, Implies, Next, Not,
                   UnknownAtom, classify_gr1, format_formula, parse_formula, sort_formula)
from .lts import Lts, compose_all, valid_label
from .synthesis import ControlProblem

__all__ = [
    "Cell", "GridWorkspace", "Reaction", "MissionSpec", "MissionError",
    "MissionSyntaxError", "MissionSemanticError", "StartOutOfGrid", "DimensionMismatch",
    "go", "arrived", "build_motion_lts", "build_toggle_lts", "compile_mission",
    "parse_mission", "format_mission", "load_mission", "ingest_obstacles",
    "render_snapshot", "TURN_RADIUS_MM", "DEFAULT_OBSTACLE_THRESHOLD",
]

Cell = tuple[int, int]

TURN_RADIUS_MM = 100.0
DEFAULT_OBSTACLE_THRESHOLD = 0.05


class MissionError(ValueError):
    pass


class MissionSyntaxError(MissionError):
    def __init__(self, msg, line=0, column=0):
        where = f"line {line}, column {column}: " if line else ""
        super().__init__(where + msg)
        self.line, self.column = line, column


class MissionSemanticError(MissionError):
    def __init__(self, msg, line=0):
        super().__init__((f"line {line}: " if line else "") + msg)
        self.line = line


class StartOutOfGrid(MissionError):
    pass


class DimensionMismatch(MissionError):
    pass


def go(i: int, j: int) -> str:
    return f"go[{i}][{j}]"


def arrived(i: int, j: int) -> str:
    return f"arrived[{i}][{j}]"


_CELL_ACTION = re.compile(r"(go|arrived)\[(-?\d+)\]\[(-?\d+)\]")


def parse_cell_action(label: str) -> tuple[str, Cell] | None:
    m = _CELL_ACTION.fullmatch(label)
    if m is None:
        return None
    return m.group(1), (int(m.group(2)), int(m.group(3)))


@dataclass(frozen=True)
class GridWorkspace:
    rows: int
    cols: int
    cell_size: float = 400.0
    origin: tuple[float, float] = (0.0, 0.0)
    forbidden: frozenset[Cell] = frozenset()

    def __post_init__(self):
        if self.rows < 1 or self.cols < 1:
            raise MissionError("grid needs at least one row and one column")
        if self.cell_size < 2 * TURN_RADIUS_MM:
            raise MissionError(f"cell size {self.cell_size} mm is below twice the "
                               f"{TURN_RADIUS_MM:g} mm turn radius")
        object.__setattr__(self, "forbidden", frozenset(self.forbidden))
        bad = [c for c in self.forbidden if not self.contains(c)]
        if bad:
            raise MissionError(f"forbidden cells {sorted(bad)} outside the grid")

    def contains(self, cell: Cell) -> bool:
        i, j = cell
        return 0 <= i < self.rows and 0 <= j < self.cols

    @property
    def cells(self) -> list[Cell]:
        return [(i, j) for i in range(self.rows) for j in range(self.cols)]

    def neighbours(self, cell: Cell) -> list[Cell]:
        i, j = cell
        cand = [(i - 1, j), (i, j - 1), (i, j + 1), (i + 1, j)]
        return [c for c in cand if self.contains(c)]

    def centre(self, cell: Cell) -> tuple[float, float]:
        i, j = cell
        return (self.origin[0] + (j + 0.5) * self.cell_size,
                self.origin[1] + (i + 0.5) * self.cell_size)

    def cell_at(self, x: float, y: float) -> Cell | None:
        j = int(np.floor((x - self.origin[0]) / self.cell_size))
        i = int(np.floor((y - self.origin[1]) / self.cell_size))
        return (i, j) if self.contains((i, j)) else None

    @property
    def num_edges(self) -> int:
        return self.rows * (self.cols - 1) + (self.rows - 1) * self.cols


def build_motion_lts(g: GridWorkspace, start: Cell) -> Lts:
    """Motion capability: one at-cell state per cell plus one in-transit state
    per directed pair of 4-adjacent cells.

    ``go[i][j]`` (controllable) leaves a cell towards a neighbour; the only
    thing that can follow it is ``arrived[i][j]`` (uncontrollable).
    """
    if not g.contains(start):
        raise StartOutOfGrid(f"start cell {start} outside {g.rows}x{g.cols} grid")
    at = {c: k for k, c in enumerate(g.cells)}
    n = len(at)
    trans = []
    for c in g.cells:
        for nb in g.neighbours(c):
            transit = n
            n += 1
            trans.append((at[c], go(*nb), transit))
            trans.append((transit, arrived(*nb), at[nb]))
    alphabet = {}
    for c in g.cells:
        alphabet[go(*c)] = True
        alphabet[arrived(*c)] = False
    return Lts(n, at[start], alphabet, trans)


def build_toggle_lts(on_action: str, off_action: str) -> Lts:
    """Two-state capability alternating ``on_action`` and ``off_action``, both
    controllable and instantaneous."""
    if on_action == off_action:
        raise MissionError("toggle actions must differ")
    return Lts(2, 0, {on_action: True, off_action: True},
               [(0, on_action, 1), (1, off_action, 0)])


@dataclass(frozen=True)
class Reaction:
    zone: tuple[Cell, ...]
    on: str
    off: str

    def __post_init__(self):
        object.__setattr__(self, "zone", tuple(sorted(set(self.zone))))


def toggle_fluent_name(on_action: str) -> str:
    head = on_action.split(".")[:-1] or [f"active_{on_action}"]
    return "".join(re.sub(r"\W", "_", p).capitalize() for p in head)


@dataclass(frozen=True)
class MissionSpec:
    grid: GridWorkspace
    start: Cell = (0, 0)
    patrol: tuple[Cell, ...] = ()
    avoid: frozenset[Cell] = frozenset()
    reactions: tuple[Reaction, ...] = ()
    fluents: tuple[Fluent, ...] = ()
    formulas: tuple[Formula, ...] = ()
    assumptions: tuple[Formula, ...] = ()
    plant: tuple[tuple[str, float], ...] = ()
    obstacle_threshold: float = DEFAULT_OBSTACLE_THRESHOLD

    def __post_init__(self):
        object.__setattr__(self, "patrol", tuple(tuple(c) for c in self.patrol))
        object.__setattr__(self, "avoid", frozenset(tuple(c) for c in self.avoid))
        object.__setattr__(self, "reactions", tuple(self.reactions))
        object.__setattr__(self, "fluents", tuple(self.fluents))
        object.__setattr__(self, "formulas", tuple(self.formulas))
        object.__setattr__(self, "assumptions", tuple(self.assumptions))
        object.__setattr__(self, "plant", tuple(sorted(dict(self.plant).items())))

    def with_obstacles(self, cells: Iterable[Cell]) -> "MissionSpec":
        return replace(self, avoid=self.avoid | frozenset(cells))

    def validate(self) -> None:
        g = self.grid
        if not g.contains(self.start):
            raise StartOutOfGrid(f"start cell {self.start} outside the grid")
        for what, cells in (("patrol", self.patrol), ("avoid", self.avoid)):
            bad = sorted(c for c in cells if not g.contains(c))
            if bad:
                raise MissionSemanticError(f"{what} cells {bad} outside the grid")
        clash = sorted(set(self.patrol) & self.avoid)
        if clash:
            raise MissionSemanticError(f"cells {clash} are both patrolled and avoided")
        if self.start in self.avoid:
            raise MissionSemanticError(f"start cell {self.start} is to be avoided")
        if self.start in g.forbidden:
            raise MissionSemanticError(f"start cell {self.start} is forbidden")
        for r in self.reactions:
            bad = sorted(c for c in r.zone if not g.contains(c))
            if bad:
                raise MissionSemanticError(f"reaction zone cells {bad} outside the grid")
            if not r.zone:
                raise MissionSemanticError("empty reaction zone")
            for act in (r.on, r.off):
                if not valid_label(act) or parse_cell_action(act):
                    raise MissionSemanticError(f"bad reaction action {act!r}")
            if r.on == r.off:
                raise MissionSemanticError("reaction on/off actions must differ")
        names = [fl.name for fl in self.fluents]
        if len(set(names)) != len(names):
            raise MissionSemanticError("duplicate fluent declaration")
        if not 0.0 <= self.obstacle_threshold < 1.0:
            raise MissionSemanticError("obstacle threshold must lie in [0, 1)")


def _toggles(m: MissionSpec) -> dict[tuple[str, str], str]:
    out: dict[tuple[str, str], str] = {}
    for r in m.reactions:
        key = (r.on, r.off)
        if key not in out:
            out[key] = toggle_fluent_name(r.on)
    return out


def compile_mission(m: MissionSpec, obstacles: Iterable[Cell] = ()) -> ControlProblem:
    """Build ``<E, G, L>``: motion LTS composed with every toggle capability,
    patrol goals, avoidance safety, prompt-reaction rules and extra formulas."""
    m = m.with_obstacles(obstacles) if obstacles else m
    m.validate()
    g = m.grid
    toggles = _toggles(m)
    env = compose_all([build_motion_lts(g, m.start)]
                      + [build_toggle_lts(on, off) for on, off in toggles])
    alpha = env.alphabet
    in_grid = set(g.cells)

    fluents = list(m.fluents)
    for fl in fluents:
        unknown = sorted((fl.set_true | fl.set_false) - set(alpha))
        if unknown:
            raise MissionSemanticError(f"fluent {fl.name} uses unknown actions {unknown}")
    for (on, off), name in toggles.items():
        fluents.append(Fluent(name, {on}, {off}, False))
    safety: list[Formula] = []
    for k, r in enumerate(m.reactions):
        zone = set(r.zone)
        outside = in_grid - zone
        zin, zout = f"InZone{k}", f"OutZone{k}"
        fluents.append(Fluent(zin, {arrived(*c) for c in zone}, {go(*c) for c in outside},
                              m.start in zone))
        fluents.append(Fluent(zout, {arrived(*c) for c in outside}, {go(*c) for c in zone},
                              m.start not in zone))
        flag = Atom(toggles[(r.on, r.off)])
        safety.append(Always(Implies(And(Atom(zin), Not(flag)), Next(Atom(r.on)))))
        safety.append(Always(Implies(And(Atom(zout), flag), Next(Atom(r.off)))))
    names = [fl.name for fl in fluents]
    dup = sorted({n for n in names if names.count(n) > 1} | (set(names) & set(alpha)))
    if dup:
        raise MissionSemanticError(f"fluent names {dup} clash with other fluents or actions")

    avoid = [Always(Not(Atom(arrived(*c)))) for c in sorted(m.avoid | g.forbidden)]
    goals = [Always(Eventually(Atom(arrived(*c)))) for c in m.patrol]
    for f in m.formulas:
        s, gl = sort_formula(f)
        safety.extend(s)
        goals.extend(gl)
    spec = classify_gr1(avoid + safety, m.assumptions, goals, fluents)
    try:
        return ControlProblem(env, spec, env.controllable)
    except UnknownAtom as exc:
        raise MissionSemanticError(str(exc)) from exc


# -- mission files ----------------------------------------------------------------

_PLANT_KEYS = {"K", "D", "Kp", "vfwd", "drift", "dt", "Vmax"}


def _ints(tokens, n, lineno, col):
    if len(tokens) != n:
        raise MissionSyntaxError(f"expected {n} integers", lineno, col)
    try:
        return tuple(int(t) for t in tokens)
    except ValueError:
        raise MissionSyntaxError(f"expected integers, got {' '.join(tokens)!r}", lineno, col) from None


def _kv(text: str, lineno: int) -> dict[str, str]:
    out = {}
    for m in re.finditer(r"(\w+)=(\([^)]*\)|\{[^}]*\}|\S+)", text):
        out[m.group(1)] = m.group(2)
    rest = re.sub(r"(\w+)=(\([^)]*\)|\{[^}]*\}|\S+)", "", text).strip()
    if rest:
        raise MissionSyntaxError(f"unexpected text {rest!r}", lineno, text.find(rest) + 1)
    return out


def _action_set(text: str, lineno: int) -> frozenset[str]:
    if not (text.startswith("{") and text.endswith("}")):
        raise MissionSyntaxError(f"expected {{...}} action set, got {text!r}", lineno)
    items = [a.strip() for a in text[1:-1].split(",") if a.strip()]
    for a in items:
        if not valid_label(a):
            raise MissionSyntaxError(f"malformed action {a!r}", lineno)
    return frozenset(items)


def parse_mission(text: str) -> MissionSpec:
    """Parse the line-oriented mission format; see ``format_mission`` for the
    canonical rendering."""
    grid = None
    origin = (0.0, 0.0)
    start = None
    patrol, avoid, reactions, fluents, formulas, assumptions = [], [], [], [], [], []
    plant: dict[str, float] = {}
    threshold = DEFAULT_OBSTACLE_THRESHOLD
    cell_lines: list[tuple[str, Cell, int]] = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].rstrip()
        if not line.strip():
            continue
        indent = len(line) - len(line.lstrip())
        line = line.strip()
        kw, _, rest = line.partition(" ")
        rest = rest.strip()
        col = indent + len(kw) + 2
        toks = rest.split()
        if kw == "grid":
            if grid is not None:
                raise MissionSemanticError("duplicate grid declaration", lineno)
            if len(toks) != 3:
                raise MissionSyntaxError("expected 'grid ROWS COLS CELLSIZE_MM'", lineno, col)
            r, c = _ints(toks[:2], 2, lineno, col)
            try:
                size = float(toks[2])
            except ValueError:
                raise MissionSyntaxError(f"bad cell size {toks[2]!r}", lineno, col) from None
            grid = (r, c, size)
        elif kw == "origin":
            try:
                origin = tuple(float(t) for t in toks)
            except ValueError:
                raise MissionSyntaxError("expected 'origin X Y'", lineno, col) from None
            if len(origin) != 2:
                raise MissionSyntaxError("expected 'origin X Y'", lineno, col)
        elif kw == "start":
            start = _ints(toks, 2, lineno, col)
            cell_lines.append(("start", start, lineno))
        elif kw == "patrol":
            cell = _ints(toks, 2, lineno, col)
            patrol.append(cell)
            cell_lines.append(("patrol", cell, lineno))
        elif kw == "avoid":
            cell = _ints(toks, 2, lineno, col)
            avoid.append(cell)
            cell_lines.append(("avoid", cell, lineno))
        elif kw == "react":
            kv = _kv(rest, lineno)
            missing = {"zone", "on", "off"} - set(kv)
            if missing:
                raise MissionSyntaxError(f"react needs {sorted(missing)}", lineno, col)
            z = kv["zone"]
            if not (z.startswith("(") and z.endswith(")")):
                raise MissionSyntaxError("zone must be written (i j;i j;...)", lineno, col)
            zone = []
            for part in z[1:-1].split(";"):
                if part.strip():
                    cell = _ints(part.split(), 2, lineno, col)
                    zone.append(cell)
                    cell_lines.append(("zone", cell, lineno))
            for key in ("on", "off"):
                if not valid_label(kv[key]):
                    raise MissionSyntaxError(f"malformed action {kv[key]!r}", lineno, col)
            reactions.append(Reaction(tuple(zone), kv["on"], kv["off"]))
        elif kw == "fluent":
            name, _, body = rest.partition(" ")
            if not re.fullmatch(r"[A-Za-z_]\w*", name):
                raise MissionSyntaxError(f"bad fluent name {name!r}", lineno, col)
            kv = _kv(body, lineno)
            if set(kv) - {"true", "false", "init"}:
                raise MissionSyntaxError(f"unknown fluent fields {sorted(set(kv) - {'true', 'false', 'init'})}",
                                         lineno, col)
            if any(fl.name == name for fl in fluents):
                raise MissionSemanticError(f"duplicate fluent {name}", lineno)
            init = kv.get("init", "0")
            if init not in ("0", "1"):
                raise MissionSyntaxError("init must be 0 or 1", lineno, col)
            try:
                fluents.append(Fluent(name, _action_set(kv.get("true", "{}"), lineno),
                                      _action_set(kv.get("false", "{}"), lineno), init == "1"))
            except ValueError as exc:
                if isinstance(exc, MissionError):
                    raise
                raise MissionSemanticError(str(exc), lineno) from exc
        elif kw in ("formula", "assume"):
            try:
                f = parse_formula(rest)
            except ValueError as exc:
                raise MissionSyntaxError(str(exc), lineno, col) from exc
            (formulas if kw == "formula" else assumptions).append(f)
        elif kw == "plant":
            for k, v in _kv(rest, lineno).items():
                if k not in _PLANT_KEYS:
                    raise MissionSyntaxError(f"unknown plant parameter {k!r}", lineno, col)
                try:
                    plant[k] = float(v)
                except ValueError:
                    raise MissionSyntaxError(f"bad value for {k}: {v!r}", lineno, col) from None
        elif kw == "obstacle_threshold":
            try:
                threshold = float(rest)
            except ValueError:
                raise MissionSyntaxError("expected a fraction", lineno, col) from None
        else:
            raise MissionSyntaxError(f"unknown declaration {kw!r}", lineno, indent + 1)
    if grid is None:
        raise MissionSyntaxError("missing grid declaration")
    rows, cols, size = grid
    try:
        gw = GridWorkspace(rows, cols, size, origin)
    except MissionError as exc:
        raise MissionSemanticError(str(exc)) from exc
    for what, (i, j), lineno in cell_lines:
        if not gw.contains((i, j)):
            raise MissionSemanticError(f"{what} cell ({i}, {j}) outside {rows}x{cols} grid", lineno)
    spec = MissionSpec(gw, start if start is not None else (0, 0), tuple(patrol), frozenset(avoid),
                       tuple(reactions), tuple(fluents), tuple(formulas), tuple(assumptions),
                       tuple(plant.items()), threshold)
    try:
        spec.validate()
    except MissionSemanticError:
        raise
    except MissionError as exc:
        raise MissionSemanticError(str(exc)) from exc
    return spec


def _num(x: float) -> str:
    return f"{x:g}"


def format_mission(m: MissionSpec) -> str:
    g = m.grid
    out = [f"grid {g.rows} {g.cols} {_num(g.cell_size)}"]
    if g.origin != (0.0, 0.0):
        out.append(f"origin {_num(g.origin[0])} {_num(g.origin[1])}")
    out.append(f"start {m.start[0]} {m.start[1]}")
    out.extend(f"patrol {i} {j}" for i, j in m.patrol)
    out.extend(f"avoid {i} {j}" for i, j in sorted(m.avoid))
    for r in m.reactions:
        zone = ";".join(f"{i} {j}" for i, j in r.zone)
        out.append(f"react zone=({zone}) on={r.on} off={r.off}")
    for fl in m.fluents:
        out.append(f"fluent {fl.name} true={{{','.join(sorted(fl.set_true))}}} "
                   f"false={{{','.join(sorted(fl.set_false))}}} init={int(fl.initial)}")
    out.extend(f"assume {format_formula(f)}" for f in m.assumptions)
    out.extend(f"formula {format_formula(f)}" for f in m.formulas)
    if m.plant:
        out.append("plant " + " ".join(f"{k}={_num(v)}" for k, v in m.plant))
    if m.obstacle_threshold != DEFAULT_OBSTACLE_THRESHOLD:
        out.append(f"obstacle_threshold {_num(m.obstacle_threshold)}")
    return "\n".join(out) + "\n"


def load_mission(path: str | Path) -> MissionSpec:
    return parse_mission(Path(path).read_text())


# -- obstacle snapshots -------------------------------------------------------------

def _parse_snapshot(text: str) -> np.ndarray:
    lines = [ln.strip() for ln in text.splitlines() if ln.strip() and not ln.startswith("#")]
    if not lines:
        raise DimensionMismatch("empty snapshot")
    head = lines[0].split()
    if len(head) != 3 or head[0] != "P":
        raise DimensionMismatch("snapshot header must be 'P ROWS COLS'")
    rows, cols = int(head[1]), int(head[2])
    body = [ln.replace(" ", "") for ln in lines[1:]]
    if len(body) != rows or any(len(b) != cols for b in body):
        raise DimensionMismatch(f"snapshot body is not {rows}x{cols} pixels")
    if any(set(b) - {"0", "1"} for b in body):
        raise DimensionMismatch("snapshot pixels must be 0 or 1")
    return np.array([[ch == "1" for ch in b] for b in body], dtype=bool)


def ingest_obstacles(snapshot: str | np.ndarray, grid: GridWorkspace,
                     threshold: float = DEFAULT_OBSTACLE_THRESHOLD) -> frozenset[Cell]:
    """Cells whose occupied-pixel fraction exceeds ``threshold``.

    ``snapshot`` is either the text format (``P ROWS COLS`` header followed by
    rows of 0/1 pixels) or a boolean pixel array. Pixel blocks per cell must
    be square and tile the grid exactly.
    """
    px = _parse_snapshot(snapshot) if isinstance(snapshot, str) else np.asarray(snapshot, dtype=bool)
    rows, cols = px.shape
    if rows % grid.rows or cols % grid.cols or rows // grid.rows != cols // grid.cols:
        raise DimensionMismatch(f"{rows}x{cols} pixels do not tile a {grid.rows}x{grid.cols} grid "
                                f"with square cells")
    k = rows // grid.rows
    frac = px.reshape(grid.rows, k, grid.cols, k).mean(axis=(1, 3))
    return frozenset((int(i), int(j)) for i, j in zip(*np.nonzero(frac > threshold)))


def render_snapshot(px: np.ndarray) -> str:
    px = np.asarray(px, dtype=bool)
    lines = [f"P {px.shape[0]} {px.shape[1]}"]
    lines.extend("".join("1" if v else "0" for v in row) for row in px)
    return "\n".join(lines) + "\n"
