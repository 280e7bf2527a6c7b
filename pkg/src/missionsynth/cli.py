"""Command-line pipeline: synthesize, simulate, verify, check-trace, dump-lts.

Exit codes: 0 success, 2 unrealizable, 3 verification failure, 4 parse or
validation error.
"""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .enactor import check_trace, format_trace, format_verdicts, parse_trace
from .fltl import FormulaSyntaxError, parse_formula
from .lts import LtsError, dump_lts
from .pipeline import load_obstacles, render_svg, simulate_mission, synthesize_mission
from .robot_sim import PlantParams
from .synthesis import ControllerFormatError, dump_controller, load_controller
from .verification import verify_controller
from .workspace import MissionError, compile_mission, load_mission

log = logging.getLogger("missionsynth")

EXIT_OK, EXIT_UNREALIZABLE, EXIT_VERIFY, EXIT_PARSE = 0, 2, 3, 4


class InputError(Exception):
    pass


def _mission(args):
    path = Path(args.mission)
    if not path.exists():
        raise InputError(f"mission file {path} not found")
    m = load_mission(path)
    if getattr(args, "obstacles", None):
        if not Path(args.obstacles).exists():
            raise InputError(f"obstacle snapshot {args.obstacles} not found")
        m = m.with_obstacles(load_obstacles(args.obstacles, m))
    return m


def _plant(args, mission) -> PlantParams:
    p = PlantParams().with_overrides(dict(mission.plant))
    over = {k: getattr(args, "plant_" + k) for k in PlantParams.ALIASES
            if getattr(args, "plant_" + k, None) is not None}
    return p.with_overrides(over)


def _out(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_synthesize(args) -> int:
    res = synthesize_mission(_mission(args))
    print(res.report())
    out = _out(args)
    (out / "report.txt").write_text(res.report() + "\n")
    if not res.realizable:
        return EXIT_UNREALIZABLE
    (out / "controller.ctl").write_text(dump_controller(res.controller))
    print(f"controller written to {out / 'controller.ctl'}")
    return EXIT_OK


def cmd_simulate(args) -> int:
    mission = _mission(args)
    if args.budget < 0:
        raise InputError("budget must be non-negative")
    if args.controller:
        ctrl = load_controller(Path(args.controller).read_text())
    else:
        res = synthesize_mission(mission)
        if not res.realizable:
            print(res.report())
            return EXIT_UNREALIZABLE
        ctrl = res.controller
    if args.budget == 0:
        log.warning("zero budget: nothing simulated")
    sim = simulate_mission(mission, ctrl, _plant(args, mission), seed=args.seed,
                           budget=args.budget, log=True, pos_noise_px=args.pos_noise,
                           theta_noise=args.theta_noise)
    out = _out(args)
    (out / "trace.txt").write_text(format_trace(sim.trace))
    (out / "ticks.log").write_text(sim.tick_log.text())
    (out / "trajectory.csv").write_text(sim.tick_log.csv())
    path = [(x, y) for _, x, y, _ in sim.tick_log.rows[::10]]
    (out / "path.svg").write_text(render_svg(mission, path))
    print(f"{len(sim.trace)} trace entries over {args.budget:g} s; outputs in {out}")
    return EXIT_OK


def cmd_verify(args) -> int:
    mission = _mission(args)
    ctrl = load_controller(Path(args.controller).read_text())
    problem = compile_mission(mission)
    rep = verify_controller(problem.environment, ctrl, problem.spec)
    print(rep.format())
    return EXIT_OK if rep.all_ok else EXIT_VERIFY


def cmd_check_trace(args) -> int:
    prefix, loop = parse_trace(Path(args.trace).read_text())
    fluents = ()
    formulas = [parse_formula(f) for f in args.formula or ()]
    if args.mission:
        problem = compile_mission(_mission(args))
        fluents = problem.spec.fluents
        formulas = problem.spec.formulas() + formulas
    if not formulas:
        raise InputError("nothing to check: give --mission and/or --formula")
    verdicts = check_trace(prefix, loop, formulas, fluents)
    sys.stdout.write(format_verdicts(verdicts))
    return EXIT_VERIFY if any(v == "fail" for _, v in verdicts) else EXIT_OK


def cmd_dump_lts(args) -> int:
    text = dump_lts(compile_mission(_mission(args)).environment)
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="missionsynth", description=__doc__.splitlines()[0])
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    def mission_args(p, obstacles=True):
        p.add_argument("--mission", required=True, help="mission file")
        if obstacles:
            p.add_argument("--obstacles", help="occupancy snapshot of cells to avoid")

    p = sub.add_parser("synthesize", help="synthesize a controller for a mission")
    mission_args(p)
    p.add_argument("--out", default="out")
    p.set_defaults(func=cmd_synthesize)

    p = sub.add_parser("simulate", help="enact a controller on the simulated robot")
    mission_args(p)
    p.add_argument("--controller", help="controller file (synthesized inline if omitted)")
    p.add_argument("--out", default="out")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--budget", type=float, default=1800.0, help="simulated seconds")
    p.add_argument("--pos-noise", type=float, default=0.0, help="position noise std, pixels")
    p.add_argument("--theta-noise", type=float, default=0.0, help="heading noise std, rad")
    for key in PlantParams.ALIASES:
        p.add_argument(f"--plant.{key}", dest=f"plant_{key}", type=float)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("verify", help="check a controller file against a mission")
    mission_args(p)
    p.add_argument("--controller", required=True)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("check-trace", help="evaluate a recorded trace")
    p.add_argument("--trace", required=True)
    p.add_argument("--mission")
    p.add_argument("--obstacles")
    p.add_argument("--formula", action="append", help="extra formula (repeatable)")
    p.set_defaults(func=cmd_check_trace)

    p = sub.add_parser("dump-lts", help="print the environment LTS of a mission")
    mission_args(p)
    p.add_argument("--out")
    p.set_defaults(func=cmd_dump_lts)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s: %(message)s")
    try:
        return args.func(args)
    except (MissionError, FormulaSyntaxError, ControllerFormatError, LtsError,
            InputError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE


if __name__ == "__main__":
    sys.exit(main())
