"""Command-line entry points.

Exit codes: 0 success, 1 usage or configuration error, 2 data error.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import os
import sys
from importlib.resources import files
from pathlib import Path
from typing import Sequence

from .archive import Archive, Cell, GenerationLog, behavior_class, champions, evolve
from .config import ALLOWED_BOXES, ConfigError, RunConfig, physics_from_archive_params
from .cppn import Genome, develop
from .errors import MorphocompError
from .evaluation import variable_schedule_default
from .morphology import body_length, from_text, validate
from .physics import PhysicsParams, StimulusPattern, read_trace_csv
from .render import spacetime_svg
from .robots import PhysicalRobot
from . import swarm as sw

EXIT_OK, EXIT_USAGE, EXIT_DATA = 0, 1, 2

log = logging.getLogger("morphocomp")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _data_file(arg: str, suffix: str) -> Path:
    """A real path, or the stem of a file shipped with the package."""
    p = Path(arg)
    if p.exists():
        return p
    shipped = files("morphocomp") / "data" / (arg + suffix)
    if shipped.is_file():
        return Path(str(shipped))
    return p


def _parse_pattern(text: str) -> StimulusPattern:
    try:
        a, b = (int(v) for v in text.split(","))
        if {a, b} - {0, 1}:
            raise ValueError
    except ValueError:
        raise UsageError(f"pattern must look like 0,1 (got {text!r})") from None
    return StimulusPattern(bool(a), bool(b))


def _check_box(h: int, w: int, allow_any: bool) -> None:
    if (h, w) not in ALLOWED_BOXES and not allow_any:
        raise ConfigError(f"bounding box {h}x{w} not in {sorted(ALLOWED_BOXES)}; "
                          f"pass --allow-any-box to override")


# -- evolve ---------------------------------------------------------------

def cmd_evolve(args) -> int:
    overrides = dict(height=args.height, width=args.width, generations=args.generations,
                     seed=args.seed, archive_path=args.out, log_path=args.log,
                     allow_any_box=True if args.allow_any_box else None)
    cfg = RunConfig.load(args.config, **overrides) if args.config else RunConfig.from_dict({}, **overrides)
    params = cfg.evolve_params()
    threads = args.threads or os.cpu_count() or 1

    log_path = cfg.resolved_log_path
    with open(log_path, "w", newline="") as fh:
        fh.write(",".join(GenerationLog.CSV_HEADER) + "\n")

        def on_gen(g: GenerationLog) -> None:
            fh.write(g.csv_row() + "\n")
            fh.flush()
            if not args.quiet and (g.generation % 10 == 0 or g.generation == params.generations):
                print(f"gen {g.generation:5d}  filled {g.filled:4d}  best f_variable {g.best_f_variable:.3f}",
                      file=sys.stderr)

        archive = evolve(params, workers=threads, checkpoint_path=cfg.archive_path, on_generation=on_gen)
    archive.save(cfg.archive_path)
    print(f"archive: {cfg.archive_path} ({len(archive)} cells)")
    print(f"log: {log_path}")
    return EXIT_OK


# -- replay ---------------------------------------------------------------

def _load_body(path: Path, height: int, width: int):
    """Genome JSON developed in an HxW box, or a text grid morphology."""
    try:
        text = path.read_text()
    except OSError as e:
        raise MorphocompError(f"cannot read {path}: {e.strerror}") from None
    if text.lstrip().startswith("{"):
        genome = Genome.from_json(text)
        grid = develop(genome, height, width)
        return validate(grid.reshape(-1), height, width)
    return from_text(text)


def cmd_replay(args) -> int:
    _check_box(args.height, args.width, args.allow_any_box)
    physics = PhysicsParams.from_dict(json.loads(Path(args.physics).read_text())) if args.physics \
        else PhysicsParams()
    if args.pattern:
        schedule = [(_parse_pattern(args.pattern), args.cycles)]
    else:
        schedule = variable_schedule_default(args.cycles)
    morph = _load_body(Path(args.body), args.height, args.width)
    robot = PhysicalRobot(morph, physics)
    for pattern, cycles in schedule:
        robot.advance(pattern, cycles)
    robot.trace.to_csv(args.out)
    bl = body_length(morph, physics.voxel_length)
    print(f"trace: {args.out} ({len(robot.trace)} rows)")
    print(f"body_length: {bl!r}")
    print(f"net_dx: {robot.trace.displacement(0, len(robot.trace)):.6f}")
    return EXIT_OK


# -- render ---------------------------------------------------------------

def cmd_render(args) -> int:
    if not args.traces:
        raise UsageError("render needs at least one trace CSV")
    bls = args.body_length
    if len(bls) not in (1, len(args.traces)):
        raise UsageError("give one --body-length, or one per trace")
    if len(bls) == 1:
        bls = bls * len(args.traces)
    traces = []
    for path, bl in zip(args.traces, bls):
        try:
            traces.append(read_trace_csv(Path(path), bl))
        except MorphocompError as e:
            raise MorphocompError(f"{path}: {e}") from None
    labels = args.labels or [Path(p).stem for p in args.traces]
    svg = spacetime_svg(traces, bls, labels=labels, title=args.title or "")
    Path(args.out).write_text(svg)
    print(f"svg: {args.out}")
    return EXIT_OK


# -- champions ------------------------------------------------------------

CHAMPION_COLUMNS = ("group", "behavior", "class", "f_variable", "f_min_fixed",
                    "n_active", "n_sensor", "n_total", "generation")


def champion_rows(archive: Archive) -> list[dict]:
    by_behavior = champions(archive)
    by_class: dict[str, Cell] = {}
    for cell in by_behavior.values():
        cls = behavior_class(cell.behavior)
        cur = by_class.get(cls)
        if cur is None or (cell.f_variable, cell.f_min_fixed, -cell.generation) > \
                (cur.f_variable, cur.f_min_fixed, -cur.generation):
            by_class[cls] = cell

    def row(group: str, cell: Cell) -> dict:
        return {"group": group, "behavior": cell.behavior, "class": behavior_class(cell.behavior),
                "f_variable": cell.f_variable, "f_min_fixed": cell.f_min_fixed,
                "n_active": cell.counts.n_active, "n_sensor": cell.counts.n_sensor,
                "n_total": cell.counts.n_total, "generation": cell.generation}

    return [row("behavior", c) for c in by_behavior.values()] + \
           [row("class", by_class[k]) for k in sorted(by_class)]


def format_table(rows: list[dict], fmt: str) -> str:
    if fmt == "csv":
        buf = io.StringIO()
        w = csv.DictWriter(buf, CHAMPION_COLUMNS, lineterminator="\n")
        w.writeheader()
        w.writerows(rows)
        return buf.getvalue()
    cells = [[f"{r[c]:.4f}" if isinstance(r[c], float) else str(r[c]) for c in CHAMPION_COLUMNS]
             for r in rows]
    widths = [max([len(c)] + [len(x[i]) for x in cells]) for i, c in enumerate(CHAMPION_COLUMNS)]
    lines = ["  ".join(c.ljust(wd) for c, wd in zip(CHAMPION_COLUMNS, widths))]
    lines += ["  ".join(v.ljust(wd) for v, wd in zip(x, widths)) for x in cells]
    return "\n".join(l.rstrip() for l in lines) + "\n"


def cmd_champions(args) -> int:
    archive = Archive.load(args.archive)
    rows = champion_rows(archive)
    text = format_table(rows, args.format)
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    if args.export:
        out = Path(args.export)
        out.mkdir(parents=True, exist_ok=True)
        for behavior, cell in champions(archive).items():
            cell.genome.save(out / f"{behavior}.json")
    return EXIT_OK


# -- swarm ----------------------------------------------------------------

def _swarm_setup(args):
    wiring = sw.load_wiring(_data_file(args.wiring, ".wiring"))
    schedule = sw.load_schedule(_data_file(args.schedule, ".csv"))
    if args.stubs:
        return wiring, schedule, sw.stub_robots(wiring)
    if not args.archive:
        raise UsageError("swarm needs --archive, or --stubs for scripted gates")
    archive = Archive.load(args.archive)
    cells = sw.resolve_gates(wiring, archive)
    physics = physics_from_archive_params(archive.params)
    return wiring, schedule, sw.physical_robots(wiring, cells, archive.height, archive.width, physics)


def cmd_swarm(args) -> int:
    wiring, schedule, robots = _swarm_setup(args)
    if args.action == "run":
        trace = sw.run_swarm(wiring, robots, schedule)
        if args.out:
            trace.to_csv(args.out)
            print(f"swarm trace: {args.out} ({len(trace.cycles)} cycles)")
        else:
            sys.stdout.write(trace.to_csv())
        return EXIT_OK
    report = sw.verify(wiring, robots, schedule, settle_cycles=args.settle)
    print(report.summary())
    if args.out and report.trace is not None:
        report.trace.to_csv(args.out)
    return EXIT_OK if report.passed else EXIT_DATA


# -- wiring up ------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="morphocomp", description="Evolve and wire soft voxel robots that compute by moving.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    e = sub.add_parser("evolve", help="run MAP-Elites and write an archive plus per-generation log")
    e.add_argument("--config", help="JSON run configuration")
    e.add_argument("--height", type=int)
    e.add_argument("--width", type=int)
    e.add_argument("--generations", type=int)
    e.add_argument("--seed", type=int)
    e.add_argument("--threads", type=int, help="evaluator processes (default: all cores)")
    e.add_argument("--out", help="archive JSON path")
    e.add_argument("--log", help="per-generation CSV log path")
    e.add_argument("--allow-any-box", action="store_true")
    e.add_argument("-q", "--quiet", action="store_true")
    e.set_defaults(func=cmd_evolve)

    r = sub.add_parser("replay", help="simulate one body and write its trace CSV")
    r.add_argument("body", help="genome JSON or text grid morphology")
    r.add_argument("--pattern", help="fixed stimulus pattern s1,s2; default is the 4-pattern schedule")
    r.add_argument("--cycles", type=int, default=10, help="cycles (per segment for the schedule)")
    r.add_argument("--height", type=int, default=5)
    r.add_argument("--width", type=int, default=5)
    r.add_argument("--allow-any-box", action="store_true")
    r.add_argument("--physics", help="JSON PhysicsParams overrides")
    r.add_argument("--out", default="trace.csv")
    r.set_defaults(func=cmd_replay)

    d = sub.add_parser("render", help="draw trace CSVs as an SVG spacetime diagram")
    d.add_argument("traces", nargs="*")
    d.add_argument("--body-length", type=float, nargs="+", required=True)
    d.add_argument("--labels", nargs="+")
    d.add_argument("--title")
    d.add_argument("--out", default="spacetime.svg")
    d.set_defaults(func=cmd_render)

    c = sub.add_parser("champions", help="best cell per behavior and per behavior class")
    c.add_argument("archive")
    c.add_argument("--format", choices=("text", "csv"), default="text")
    c.add_argument("--out")
    c.add_argument("--export", metavar="DIR", help="also write each champion genome as DIR/<behavior>.json")
    c.set_defaults(func=cmd_champions)

    s = sub.add_parser("swarm", help="co-simulate a wired swarm or verify it against the boolean oracle")
    s.add_argument("action", choices=("run", "verify"))
    s.add_argument("wiring", help="wiring file, or a shipped name (dlatch, xor_nand)")
    s.add_argument("--schedule", default="dlatch_schedule", help="schedule CSV or a shipped name")
    s.add_argument("--archive")
    s.add_argument("--stubs", action="store_true", help="use scripted gates instead of archive robots")
    s.add_argument("--settle", type=int, default=5)
    s.add_argument("--out")
    s.set_defaults(func=cmd_swarm)
    return p


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:     # --help, or a usage error already reported by argparse
        return int(e.code or 0)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (UsageError, ConfigError) as e:
        print(f"morphocomp: {e}", file=sys.stderr)
        return EXIT_USAGE
    except sw.GateResolutionError as e:
        print(f"morphocomp: {e}", file=sys.stderr)
        return EXIT_DATA
    except (MorphocompError, OSError, ValueError) as e:
        print(f"morphocomp: {e}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
