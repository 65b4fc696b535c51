"""Five-simulation fitness protocol, direction descriptor and consistency filter."""
from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Sequence

from .cppn import Genome, develop
from .errors import MorphocompError
from .morphology import InvalidMorphology, MorphCounts, Morphology, counts, validate
from .physics import PATTERNS, PhysicsParams, SimulationUnstable, StimulusPattern, Trace
from .robots import PhysicalRobot, Robot


class HasStationary(MorphocompError):
    pass


class Direction(Enum):
    LEFT = "L"
    RIGHT = "R"
    STATIONARY = "S"


Schedule = list[tuple[StimulusPattern, int]]


def variable_schedule_default(cycles: int = 10) -> Schedule:
    """The four stimulus patterns in index order, ``cycles`` each."""
    return [(p, cycles) for p in PATTERNS]


@dataclass(frozen=True)
class EvalParams:
    fixed_cycles: int = 10
    variable_schedule: tuple[tuple[StimulusPattern, int], ...] = tuple(variable_schedule_default())
    eps_move: float = 0.25
    physics: PhysicsParams = field(default_factory=PhysicsParams)

    def __post_init__(self):
        if self.eps_move <= 0:
            raise ValueError("eps_move must be > 0")
        if self.fixed_cycles < 1 or any(c < 1 for _, c in self.variable_schedule):
            raise ValueError("cycle counts must be >= 1")

    @property
    def segment_cycles(self) -> int:
        return self.variable_schedule[0][1]

    def to_dict(self) -> dict:
        return {
            "fixed_cycles": self.fixed_cycles,
            "variable_schedule": [[int(p.s1), int(p.s2), c] for p, c in self.variable_schedule],
            "eps_move": self.eps_move,
            "physics": self.physics.to_dict(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "EvalParams":
        d = dict(d)
        kw = {}
        if "fixed_cycles" in d:
            kw["fixed_cycles"] = int(d.pop("fixed_cycles"))
        if "segment_cycles" in d:
            c = int(d.pop("segment_cycles"))
            kw["variable_schedule"] = tuple(variable_schedule_default(c))
        if "variable_schedule" in d:
            kw["variable_schedule"] = tuple((StimulusPattern(bool(a), bool(b)), int(c))
                                            for a, b, c in d.pop("variable_schedule"))
        if "eps_move" in d:
            kw["eps_move"] = float(d.pop("eps_move"))
        if "physics" in d:
            kw["physics"] = PhysicsParams.from_dict(d.pop("physics"))
        if d:
            raise ValueError(f"unknown evaluation parameters: {sorted(d)}")
        return cls(**kw)


@dataclass
class EvalResult:
    valid: bool
    f_variable: float = 0.0
    f_min_fixed: float = 0.0
    behavior: tuple[Direction, ...] = ()
    consistent: bool = False
    morph_counts: MorphCounts | None = None
    fixed_displacements: tuple[float, ...] = ()
    variable_displacements: tuple[float, ...] = ()
    variable_directions: tuple[Direction, ...] = ()
    traces: list[Trace] = field(default_factory=list, repr=False)
    morphology: Morphology | None = None
    reason: str = ""

    @property
    def behavior_string(self) -> str:
        return behavior_string(self.behavior)


def segment_direction(trace: Trace, start_step: int, end_step: int, eps_move: float) -> Direction:
    """Thresholded direction of COM x motion between two step counts.

    ``start_step``/``end_step`` count recorded steps, so 0 is the initial
    state; a displacement exactly at +-eps counts as movement.
    """
    return direction_of(trace.displacement(start_step, end_step), eps_move)


def direction_of(dx: float, eps_move: float) -> Direction:
    if dx >= eps_move:
        return Direction.RIGHT
    if dx <= -eps_move:
        return Direction.LEFT
    return Direction.STATIONARY


def behavior_string(behavior: Sequence[Direction]) -> str:
    if len(behavior) != 4:
        raise ValueError("behavior needs one direction per stimulus pattern")
    if any(d is Direction.STATIONARY for d in behavior):
        raise HasStationary("behavior contains a stationary pattern")
    return "".join(d.value for d in behavior)


def is_consistent(fixed: Sequence[Direction],
                  variable: Sequence[tuple[StimulusPattern, Direction]]) -> bool:
    """Every variable-schedule window must move the way its fixed-pattern run does."""
    if any(d is Direction.STATIONARY for d in fixed):
        return False
    return all(d is not Direction.STATIONARY and d is fixed[p.index] for p, d in variable)


RobotFactory = Callable[[], Robot]


def evaluate_robot(make_robot: RobotFactory, params: EvalParams = EvalParams(),
                   early_exit: bool = False) -> EvalResult:
    """Run the protocol on fresh robots from ``make_robot``.

    Fixed-pattern runs go first; with ``early_exit`` the variable-schedule run
    is skipped once a fixed run is stationary, since the result is invalid
    either way.
    """
    traces: list[Trace] = []
    fixed_dx = []
    try:
        for pattern in PATTERNS:
            robot = make_robot()
            robot.advance(pattern, params.fixed_cycles)
            traces.append(robot.trace)
            fixed_dx.append(robot.trace.displacement(0, len(robot.trace)))
        fixed_dirs = tuple(direction_of(dx, params.eps_move) for dx in fixed_dx)
        f_min_fixed = min(abs(dx) for dx in fixed_dx)
        if early_exit and Direction.STATIONARY in fixed_dirs:
            return EvalResult(False, 0.0, f_min_fixed, fixed_dirs, False, None, tuple(fixed_dx),
                              traces=traces, reason="stationary under a fixed pattern")

        robot = make_robot()
        var_dx, var_dirs, windows = [], [], []
        start = 0
        for pattern, cycles in params.variable_schedule:
            robot.advance(pattern, cycles)
            end = len(robot.trace)
            dx = robot.trace.displacement(start, end)
            var_dx.append(dx)
            var_dirs.append(direction_of(dx, params.eps_move))
            windows.append((pattern, var_dirs[-1]))
            start = end
        traces.append(robot.trace)
    except SimulationUnstable as e:
        return EvalResult(False, traces=traces, reason=f"unstable: {e}")

    consistent = is_consistent(fixed_dirs, windows)
    return EvalResult(
        valid=consistent,
        f_variable=float(sum(abs(dx) for dx in var_dx)),
        f_min_fixed=float(f_min_fixed),
        behavior=fixed_dirs,
        consistent=consistent,
        fixed_displacements=tuple(fixed_dx),
        variable_displacements=tuple(var_dx),
        variable_directions=tuple(var_dirs),
        traces=traces,
        reason="" if consistent else "inconsistent or stationary directions",
    )


def evaluate_morphology(morph: Morphology, params: EvalParams = EvalParams(),
                        keep_traces: bool = True, early_exit: bool = False,
                        backend: str | None = None) -> EvalResult:
    result = evaluate_robot(lambda: PhysicalRobot(morph, params.physics, backend=backend),
                            params, early_exit=early_exit)
    result.morph_counts = counts(morph)
    result.morphology = morph
    if not keep_traces:
        result.traces = []
    return result


def evaluate(genome: Genome, params: EvalParams = EvalParams(), height: int = 5, width: int = 5,
             keep_traces: bool = True, early_exit: bool = False,
             backend: str | None = None) -> EvalResult:
    """Develop, validate and evaluate a genome in an H x W bounding box."""
    grid = develop(genome, height, width)
    try:
        morph = validate(grid.reshape(-1), height, width)
    except InvalidMorphology as e:
        return EvalResult(False, reason=f"{type(e).__name__}: {e}")
    return evaluate_morphology(morph, params, keep_traces=keep_traces, early_exit=early_exit,
                               backend=backend)
