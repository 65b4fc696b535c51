"""Robots as two-input boolean gates, wired into synchronous swarms.

A robot outputs 1 when its centre of mass moved toward +x during the last
actuation cycle. Its two stimuli come either from the swarm inputs or from
other robots' previous-cycle outputs, so feedback wiring gives memory.
"""
from __future__ import annotations

import csv
import io
import itertools
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

from .archive import Archive, Cell, champions
from .errors import MorphocompError
from .morphology import validate
from .cppn import develop
from .physics import PhysicsParams, SimulationUnstable, StimulusPattern
from .robots import PhysicalRobot, Robot, ScriptedRobot, truth_table_policy

TruthTable = tuple[bool, bool, bool, bool]

NAMED_GATES: dict[str, TruthTable] = {
    # indexed by 2*s1 + s2: (0,0), (0,1), (1,0), (1,1)
    "AND": (False, False, False, True),
    "NAND": (True, True, True, False),
    "OR": (False, True, True, True),
    "NOR": (True, False, False, False),
    "XOR": (False, True, True, False),
    "XNOR": (True, False, False, True),
    "NOT1": (True, True, False, False),
    "NOT2": (True, False, True, False),
    "BUF1": (False, False, True, True),
    "BUF2": (False, True, False, True),
}


class SwarmError(MorphocompError):
    pass


class ParseError(SwarmError):
    def __init__(self, message: str, line: int | None = None):
        super().__init__(f"line {line}: {message}" if line is not None else message)
        self.line = line


class UnknownRobotRef(ParseError):
    pass


class DuplicateId(ParseError):
    pass


class GateResolutionError(SwarmError):
    def __init__(self, missing: Sequence[str]):
        super().__init__("no archived robot implements: " + ", ".join(missing))
        self.missing = list(missing)


def _check_behavior(behavior: str) -> None:
    if len(behavior) != 4 or set(behavior) - {"L", "R"}:
        raise ValueError(f"malformed behavior string {behavior!r}")


def behavior_to_truth(behavior: str) -> TruthTable:
    _check_behavior(behavior)
    return tuple(ch == "R" for ch in behavior)  # type: ignore[return-value]


def truth_to_behavior(truth: Sequence[bool]) -> str:
    if len(truth) != 4:
        raise ValueError("truth table needs 4 entries")
    return "".join("R" if t else "L" for t in truth)


def gate_truth(gate: str) -> TruthTable:
    """Truth table of a gate: a named function or a behavior string."""
    if gate in NAMED_GATES:
        return NAMED_GATES[gate]
    return behavior_to_truth(gate)


# -- wiring ---------------------------------------------------------------

@dataclass(frozen=True)
class WireSource:
    """``swarm`` is 1 or 2 for a swarm input; otherwise ``robot`` names the driver."""
    swarm: int | None = None
    robot: str | None = None

    def __str__(self) -> str:
        return f"IN{self.swarm}" if self.swarm else f"R:{self.robot}"


IN1 = WireSource(swarm=1)
IN2 = WireSource(swarm=2)


@dataclass(frozen=True)
class GateRobot:
    id: str
    gate: str
    in1: WireSource
    in2: WireSource

    @property
    def truth(self) -> TruthTable:
        return gate_truth(self.gate)


@dataclass(frozen=True)
class SwarmWiring:
    robots: tuple[GateRobot, ...]
    observe: tuple[str, ...] = ()

    def __post_init__(self):
        ids = [r.id for r in self.robots]
        dupes = {i for i in ids if ids.count(i) > 1}
        if dupes:
            raise DuplicateId(f"duplicate robot id(s): {sorted(dupes)}")
        known = set(ids)
        for r in self.robots:
            for src in (r.in1, r.in2):
                if src.robot is not None and src.robot not in known:
                    raise UnknownRobotRef(f"robot {r.id} references missing robot {src.robot}")
        for o in self.observe:
            if o not in known:
                raise UnknownRobotRef(f"observe references missing robot {o}")

    def robot(self, rid: str) -> GateRobot:
        for r in self.robots:
            if r.id == rid:
                return r
        raise KeyError(rid)

    def to_text(self) -> str:
        lines = [f"robot {r.id} gate={r.gate} in1={r.in1} in2={r.in2}" for r in self.robots]
        lines += [f"observe {o}" for o in self.observe]
        return "\n".join(lines) + "\n"


_GATE_RE = re.compile(r"^(?:[LR]{4}|AND|NAND|OR|NOR|XOR|XNOR|NOT1|NOT2|BUF1|BUF2)$")
_ID_RE = re.compile(r"^[A-Za-z0-9_\-]+$")


def _parse_source(tok: str, lineno: int) -> WireSource:
    if tok == "IN1":
        return IN1
    if tok == "IN2":
        return IN2
    if tok.startswith("R:") and _ID_RE.match(tok[2:]):
        return WireSource(robot=tok[2:])
    raise ParseError(f"bad input source {tok!r}", lineno)


def parse_wiring(text: str) -> SwarmWiring:
    """Parse the line-oriented wiring format.

    ``robot <id> gate=<spec> in1=<src> in2=<src>`` declares a gate,
    ``observe <id>`` marks an output of interest, ``#`` starts a comment.
    """
    robots: list[GateRobot] = []
    observe: list[str] = []
    seen: set[str] = set()
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        toks = line.split()
        if toks[0] == "observe":
            if len(toks) != 2:
                raise ParseError("observe takes exactly one robot id", lineno)
            observe.append(toks[1])
            continue
        if toks[0] != "robot" or len(toks) != 5:
            raise ParseError(f"unrecognised statement {line!r}", lineno)
        rid = toks[1]
        if not _ID_RE.match(rid):
            raise ParseError(f"bad robot id {rid!r}", lineno)
        if rid in seen:
            raise DuplicateId(f"duplicate robot id {rid!r}", lineno)
        seen.add(rid)
        fields_ = {}
        for tok in toks[2:]:
            if "=" not in tok:
                raise ParseError(f"expected key=value, got {tok!r}", lineno)
            k, v = tok.split("=", 1)
            fields_[k] = v
        if set(fields_) != {"gate", "in1", "in2"}:
            raise ParseError("robot needs gate=, in1= and in2=", lineno)
        if not _GATE_RE.match(fields_["gate"]):
            raise ParseError(f"unknown gate {fields_['gate']!r}", lineno)
        robots.append(GateRobot(rid, fields_["gate"], _parse_source(fields_["in1"], lineno),
                                _parse_source(fields_["in2"], lineno)))
    return SwarmWiring(tuple(robots), tuple(observe))


def load_wiring(path: str | Path) -> SwarmWiring:
    return parse_wiring(Path(path).read_text())


# -- schedules ------------------------------------------------------------

@dataclass(frozen=True)
class ScheduleEntry:
    s1: bool
    s2: bool
    hold_cycles: int = 10

    def __post_init__(self):
        if self.hold_cycles < 1:
            raise ValueError("hold_cycles must be >= 1")


InputSchedule = list[ScheduleEntry]


def parse_schedule(text: str) -> InputSchedule:
    rows = [r for r in csv.reader(io.StringIO(text)) if r and not r[0].lstrip().startswith("#")]
    if rows and [c.strip() for c in rows[0]] == ["s1", "s2", "hold_cycles"]:
        rows = rows[1:]
    out = []
    for n, row in enumerate(rows, start=1):
        try:
            s1, s2, hold = (int(c) for c in row)
            if s1 not in (0, 1) or s2 not in (0, 1):
                raise ValueError("stimuli must be 0 or 1")
            out.append(ScheduleEntry(bool(s1), bool(s2), hold))
        except ValueError as e:
            raise ParseError(f"schedule entry {n}: {e}") from None
    return out


def schedule_to_csv(schedule: InputSchedule) -> str:
    return "s1,s2,hold_cycles\n" + "".join(f"{int(e.s1)},{int(e.s2)},{e.hold_cycles}\n" for e in schedule)


def load_schedule(path: str | Path) -> InputSchedule:
    return parse_schedule(Path(path).read_text())


def expand_schedule(schedule: InputSchedule) -> list[tuple[bool, bool]]:
    return [(e.s1, e.s2) for e in schedule for _ in range(e.hold_cycles)]


# -- boolean oracle -------------------------------------------------------

def _stimuli(r: GateRobot, swarm: tuple[bool, bool], prev: Mapping[str, bool]) -> tuple[bool, bool]:
    def read(src: WireSource) -> bool:
        if src.swarm == 1:
            return swarm[0]
        if src.swarm == 2:
            return swarm[1]
        return prev[src.robot]
    return read(r.in1), read(r.in2)


def boolean_oracle(wiring: SwarmWiring, schedule: InputSchedule) -> list[dict[str, bool]]:
    """Synchronous gate-level simulation; one dict of output bits per cycle.

    Outputs entering cycle 0 are all 0. During cycle c each gate reads the
    current swarm inputs and the other gates' outputs from cycle c-1.
    """
    prev = {r.id: False for r in wiring.robots}
    out = []
    for swarm in expand_schedule(schedule):
        cur = {}
        for r in wiring.robots:
            s1, s2 = _stimuli(r, swarm, prev)
            cur[r.id] = r.truth[2 * s1 + s2]
        out.append(cur)
        prev = cur
    return out


# -- physical co-simulation -----------------------------------------------

@dataclass
class SwarmCycle:
    cycle: int
    swarm: tuple[bool, bool]
    stimuli: dict[str, tuple[bool, bool]]
    outputs: dict[str, bool]
    com_x: dict[str, float]


@dataclass
class SwarmTrace:
    robot_ids: tuple[str, ...]
    cycles: list[SwarmCycle] = field(default_factory=list)
    robot_cycles: int = 0

    def output_bits(self) -> list[dict[str, bool]]:
        return [c.outputs for c in self.cycles]

    def to_csv(self, path: str | Path | None = None) -> str:
        header = ["cycle", "s1", "s2"]
        for rid in self.robot_ids:
            header += [f"{rid}_in1", f"{rid}_in2", f"{rid}_out", f"{rid}_com_x"]
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(header)
        for c in self.cycles:
            row = [c.cycle, int(c.swarm[0]), int(c.swarm[1])]
            for rid in self.robot_ids:
                a, b = c.stimuli[rid]
                row += [int(a), int(b), int(c.outputs[rid]), repr(c.com_x[rid])]
            w.writerow(row)
        text = buf.getvalue()
        if path is not None:
            Path(path).write_text(text)
        return text

    @classmethod
    def from_csv(cls, text: str) -> "SwarmTrace":
        rows = list(csv.reader(io.StringIO(text)))
        header = rows[0]
        ids = tuple(h[:-len("_out")] for h in header if h.endswith("_out"))
        tr = cls(ids)
        for row in rows[1:]:
            rec = dict(zip(header, row))
            tr.cycles.append(SwarmCycle(
                int(rec["cycle"]), (rec["s1"] == "1", rec["s2"] == "1"),
                {r: (rec[f"{r}_in1"] == "1", rec[f"{r}_in2"] == "1") for r in ids},
                {r: rec[f"{r}_out"] == "1" for r in ids},
                {r: float(rec[f"{r}_com_x"]) for r in ids}))
        tr.robot_cycles = len(tr.cycles) * len(ids)
        return tr


def resolve_gates(wiring: SwarmWiring, archive: Archive) -> dict[str, Cell]:
    """Map each robot id to the archive champion whose truth table matches its gate."""
    best = champions(archive)
    resolved: dict[str, Cell] = {}
    missing: list[str] = []
    for r in wiring.robots:
        cell = best.get(truth_to_behavior(r.truth))
        if cell is None:
            if r.gate not in missing:
                missing.append(r.gate)
        else:
            resolved[r.id] = cell
    if missing:
        raise GateResolutionError(missing)
    return resolved


def physical_robots(wiring: SwarmWiring, cells: Mapping[str, Cell], height: int, width: int,
                    params: PhysicsParams = PhysicsParams()) -> dict[str, Robot]:
    robots: dict[str, Robot] = {}
    for r in wiring.robots:
        grid = develop(cells[r.id].genome, height, width)
        robots[r.id] = PhysicalRobot(validate(grid.reshape(-1), height, width), params)
    return robots


def stub_robots(wiring: SwarmWiring, steps_per_cycle: int = 8) -> dict[str, Robot]:
    """Scripted robots that move one unit per cycle as their truth table says."""
    return {r.id: ScriptedRobot(truth_table_policy(r.truth), steps_per_cycle) for r in wiring.robots}


def run_swarm(wiring: SwarmWiring, robots: Mapping[str, Robot], schedule: InputSchedule) -> SwarmTrace:
    """Advance every robot one actuation cycle per swarm cycle.

    Stimuli are exchanged only at cycle boundaries: each robot sees the
    current swarm inputs and the other robots' output bits from the
    previous cycle (all 0 before cycle 0).
    """
    ids = tuple(r.id for r in wiring.robots)
    trace = SwarmTrace(ids)
    prev = {rid: False for rid in ids}
    for c, swarm in enumerate(expand_schedule(schedule)):
        stimuli = {r.id: _stimuli(r, swarm, prev) for r in wiring.robots}
        outputs, coms = {}, {}
        for rid in ids:
            robot = robots[rid]
            x0 = robot.com_x
            try:
                robot.advance(StimulusPattern(*stimuli[rid]), 1)
            except SimulationUnstable as e:
                raise SimulationUnstable(f"robot {rid}: {e}", step=e.step, robot=rid) from e
            trace.robot_cycles += 1
            coms[rid] = robot.com_x
            outputs[rid] = (coms[rid] - x0) > 0.0
        trace.cycles.append(SwarmCycle(c, swarm, stimuli, outputs, coms))
        prev = outputs
    return trace


@dataclass
class EntryReport:
    index: int
    entry: ScheduleEntry
    expected: dict[str, bool]
    checked_cycles: int
    mismatches: int
    oracle_steady: bool

    @property
    def passed(self) -> bool:
        return self.mismatches == 0


@dataclass
class VerifyReport:
    entries: list[EntryReport]
    observed: tuple[str, ...]
    trace: SwarmTrace | None = None

    @property
    def agreement(self) -> float:
        total = sum(e.checked_cycles * len(self.observed) for e in self.entries)
        bad = sum(e.mismatches for e in self.entries)
        return 1.0 if total == 0 else 1.0 - bad / total

    @property
    def passed(self) -> bool:
        return all(e.passed for e in self.entries)

    def summary(self) -> str:
        lines = [f"entry {e.index}: s1={int(e.entry.s1)} s2={int(e.entry.s2)} hold={e.entry.hold_cycles} "
                 f"expect {''.join(str(int(e.expected[o])) for o in self.observed)} "
                 f"{'PASS' if e.passed else 'FAIL'} ({e.mismatches} mismatched bits)"
                 for e in self.entries]
        lines.append(f"agreement {self.agreement:.4f}")
        return "\n".join(lines)


def verify(wiring: SwarmWiring, robots: Mapping[str, Robot], schedule: InputSchedule,
           settle_cycles: int = 5) -> VerifyReport:
    """Compare post-settle physical output bits against the oracle's value
    at the end of each schedule entry."""
    for e in schedule:
        if e.hold_cycles <= settle_cycles:
            raise ValueError("every hold_cycles must exceed settle_cycles")
    observed = wiring.observe or tuple(r.id for r in wiring.robots)
    oracle = boolean_oracle(wiring, schedule)
    trace = run_swarm(wiring, robots, schedule)
    physical = trace.output_bits()
    entries = []
    start = 0
    for i, e in enumerate(schedule):
        end = start + e.hold_cycles
        expected = {o: oracle[end - 1][o] for o in observed}
        window = range(start + settle_cycles, end)
        steady = all(oracle[c][o] == expected[o] for c in window for o in observed)
        bad = sum(physical[c][o] != expected[o] for c in window for o in observed)
        entries.append(EntryReport(i, e, expected, len(window), bad, steady))
        start = end
    return VerifyReport(entries, tuple(observed), trace)


def all_behaviors() -> list[str]:
    return ["".join(p) for p in itertools.product("LR", repeat=4)]
