"""2D mass-spring model of a voxel robot standing on flat ground.

Each occupied voxel becomes a square of four point masses joined by four
edge springs and two diagonals; edges shared by neighbouring voxels are
merged. Active voxels oscillate their horizontal rest length, sensory
voxels ramp it toward 0.6 or 1.6 depending on their stimulus.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, fields, replace
from typing import Literal, NamedTuple

import numpy as np

from ..errors import MorphocompError
from ..morphology import MaterialKind, Morphology
from . import _pykernel
from ._pykernel import D_SPRING, H_SPRING, N_PARAMS, V_SPRING
from .backend import get_kernel
from .trace import Trace

SCALE_MIN = 0.6
SCALE_MAX = 1.6


class SimulationUnstable(MorphocompError):
    def __init__(self, message: str, step: int | None = None, robot: str | None = None):
        super().__init__(message)
        self.step = step
        self.robot = robot


class NotASensor(MorphocompError):
    pass


@dataclass(frozen=True)
class PhysicsParams:
    voxel_length: float = 1.0
    dt: float = 0.005
    steps_per_cycle: int = 256
    gravity: float = 9.81
    stiffness_soft: float = 1000.0
    stiffness_rigid: float = 5000.0
    spring_damping: float = 5.0
    global_drag: float = 0.99
    ground_stiffness: float = 800.0
    ground_damping: float = 20.0
    friction_mu: float = 0.8
    sensor_ramp_cycles: float = 0.25
    speed_cap: float = 50.0

    def __post_init__(self):
        for name in ("voxel_length", "dt", "stiffness_soft", "stiffness_rigid", "spring_damping",
                     "ground_stiffness", "ground_damping", "global_drag", "speed_cap"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be strictly positive")
        if self.steps_per_cycle < 8:
            raise ValueError("steps_per_cycle must be >= 8")
        if not 0 < self.sensor_ramp_cycles <= 1:
            raise ValueError("sensor_ramp_cycles must be in (0, 1]")
        if self.friction_mu < 0 or self.gravity < 0:
            raise ValueError("friction_mu and gravity must be non-negative")

    @property
    def sensor_max_delta(self) -> float:
        """Largest per-step change of a sensory voxel's scale."""
        return (SCALE_MAX - SCALE_MIN) / (self.sensor_ramp_cycles * self.steps_per_cycle)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "PhysicsParams":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown physics parameters: {sorted(unknown)}")
        return cls(**d)

    def vector(self) -> np.ndarray:
        v = np.empty(N_PARAMS, dtype=np.float64)
        v[_pykernel.P_L0] = self.voxel_length
        v[_pykernel.P_DT] = self.dt
        v[_pykernel.P_TSTEPS] = self.steps_per_cycle
        v[_pykernel.P_G] = self.gravity
        v[_pykernel.P_CD] = self.spring_damping
        v[_pykernel.P_DRAG] = self.global_drag
        v[_pykernel.P_KG] = self.ground_stiffness
        v[_pykernel.P_GDAMP] = self.ground_damping
        v[_pykernel.P_MU] = self.friction_mu
        v[_pykernel.P_DMAX] = self.sensor_max_delta
        v[_pykernel.P_VCAP] = self.speed_cap
        return v


class StimulusPattern(NamedTuple):
    s1: bool
    s2: bool

    @property
    def index(self) -> int:
        return 2 * int(self.s1) + int(self.s2)

    @classmethod
    def from_index(cls, i: int) -> "StimulusPattern":
        if not 0 <= i <= 3:
            raise ValueError(f"pattern index {i} outside 0..3")
        return cls(bool(i & 2), bool(i & 1))


PATTERNS = tuple(StimulusPattern.from_index(i) for i in range(4))

_AXIS_NAMES = {H_SPRING: "horizontal", V_SPRING: "vertical", D_SPRING: "diagonal"}


@dataclass(frozen=True)
class Spring:
    i: int
    j: int
    axis: Literal["horizontal", "vertical", "diagonal"]
    base_rest_length: float
    stiffness: float
    owners: tuple[int, ...]


@dataclass
class SimState:
    """Mutable physics world. Arrays are owned by this state alone."""

    pos: np.ndarray          # (n, 2)
    vel: np.ndarray          # (n, 2)
    mass: np.ndarray         # (n,)
    spr_i: np.ndarray
    spr_j: np.ndarray
    spr_kind: np.ndarray
    spr_k: np.ndarray
    spr_o1: np.ndarray
    spr_o2: np.ndarray       # -1 when the spring has a single owner
    vox_kind: np.ndarray     # material index per occupied voxel
    vox_cell: np.ndarray     # (n_vox, 2) grid row/col of each occupied voxel
    scales: np.ndarray
    t: int = 0
    voxel_length: float = 1.0

    @property
    def n_vertices(self) -> int:
        return self.pos.shape[0]

    @property
    def n_springs(self) -> int:
        return self.spr_i.shape[0]

    def springs(self) -> list[Spring]:
        out = []
        for s in range(self.n_springs):
            kind = int(self.spr_kind[s])
            base = {H_SPRING: 1.0, V_SPRING: 1.0, D_SPRING: math.sqrt(2.0)}[kind] * self.voxel_length
            owners = (int(self.spr_o1[s]),) if self.spr_o2[s] < 0 else (int(self.spr_o1[s]), int(self.spr_o2[s]))
            out.append(Spring(int(self.spr_i[s]), int(self.spr_j[s]), _AXIS_NAMES[kind], base,
                              float(self.spr_k[s]), owners))
        return out

    def com(self) -> tuple[float, float]:
        m = self.mass.sum()
        return float((self.mass * self.pos[:, 0]).sum() / m), float((self.mass * self.pos[:, 1]).sum() / m)

    def copy(self) -> "SimState":
        return replace(self, **{f.name: getattr(self, f.name).copy()
                                for f in fields(self) if isinstance(getattr(self, f.name), np.ndarray)})


def material_stiffness(kind: MaterialKind, params: PhysicsParams) -> float:
    return params.stiffness_rigid if kind == MaterialKind.RIGID else params.stiffness_soft


def build_sim(morph: Morphology, params: PhysicsParams = PhysicsParams()) -> SimState:
    """Construct the resting physics state of a validated morphology."""
    L0 = params.voxel_length
    occupied = morph.occupied()
    rmax = max(r for r, _ in occupied)
    cmin = min(c for _, c in occupied)

    corner_ids: dict[tuple[int, int], int] = {}
    for r, c in sorted({(r + dr, c + dc) for r, c in occupied for dr in (0, 1) for dc in (0, 1)}):
        corner_ids[(r, c)] = len(corner_ids)
    n = len(corner_ids)
    pos = np.zeros((n, 2))
    mass = np.zeros(n)
    for (r, c), vid in corner_ids.items():
        pos[vid] = ((c - cmin) * L0, (rmax + 1 - r) * L0)

    springs: dict[tuple[int, int, int], list] = {}   # (i, j, kind) -> [stiffness, owners]
    vox_kind = np.zeros(len(occupied), dtype=np.int64)
    vox_cell = np.zeros((len(occupied), 2), dtype=np.int64)
    for v, (r, c) in enumerate(occupied):
        kind = morph[r, c]
        vox_kind[v] = int(kind)
        vox_cell[v] = (r, c)
        k = material_stiffness(kind, params)
        tl, tr = corner_ids[(r, c)], corner_ids[(r, c + 1)]
        bl, br = corner_ids[(r + 1, c)], corner_ids[(r + 1, c + 1)]
        for a, b, axis in ((tl, tr, H_SPRING), (bl, br, H_SPRING), (tl, bl, V_SPRING),
                           (tr, br, V_SPRING), (tl, br, D_SPRING), (tr, bl, D_SPRING)):
            key = (min(a, b), max(a, b), axis)
            entry = springs.setdefault(key, [0.0, []])
            entry[0] = max(entry[0], k)
            entry[1].append(v)
        for vid in (tl, tr, bl, br):
            mass[vid] += 0.25

    keys = list(springs)
    m = len(keys)
    spr_o2 = np.full(m, -1, dtype=np.int64)
    spr_o1 = np.zeros(m, dtype=np.int64)
    for s, key in enumerate(keys):
        owners = springs[key][1]
        spr_o1[s] = owners[0]
        if len(owners) > 1:
            spr_o2[s] = owners[1]

    return SimState(
        pos=pos,
        vel=np.zeros((n, 2)),
        mass=mass,
        spr_i=np.array([k[0] for k in keys], dtype=np.int64),
        spr_j=np.array([k[1] for k in keys], dtype=np.int64),
        spr_kind=np.array([k[2] for k in keys], dtype=np.int64),
        spr_k=np.array([springs[k][0] for k in keys], dtype=np.float64),
        spr_o1=spr_o1,
        spr_o2=spr_o2,
        vox_kind=vox_kind,
        vox_cell=vox_cell,
        scales=np.ones(len(occupied)),
        t=0,
        voxel_length=L0,
    )


def active_scale(phase: Literal["A", "B"] | MaterialKind, cycle_fraction: float) -> float:
    """Scale of an active voxel at a point in its actuation cycle."""
    if phase in ("A", MaterialKind.ACTIVE_A):
        offset = 0.0
    elif phase in ("B", MaterialKind.ACTIVE_B):
        offset = math.pi
    else:
        raise ValueError(f"not an active phase: {phase!r}")
    s = 1.1 + 0.5 * math.sin(2.0 * math.pi * cycle_fraction + offset)
    return min(SCALE_MAX, max(SCALE_MIN, s))


def sensor_target(kind: MaterialKind, pattern: StimulusPattern) -> float:
    kind = MaterialKind(kind)
    if not kind.is_sensor:
        raise NotASensor(f"{kind.name} is not a sensory material")
    present = pattern.s1 if kind in (MaterialKind.SENSOR1_EXPAND, MaterialKind.SENSOR1_CONTRACT) else pattern.s2
    expands = kind in (MaterialKind.SENSOR1_EXPAND, MaterialKind.SENSOR2_EXPAND)
    return SCALE_MAX if present == expands else SCALE_MIN


def set_actuation(state: SimState, pattern: StimulusPattern, params: PhysicsParams) -> SimState:
    """Apply the actuation rule for the state's current step, in place."""
    _pykernel.actuate(state.vox_kind, state.scales, state.t, params.steps_per_cycle,
                      bool(pattern.s1), bool(pattern.s2), params.sensor_max_delta)
    return state


def rest_length(spring: Spring, scales: np.ndarray, voxel_length: float = 1.0) -> float:
    sbar = float(np.mean([scales[o] for o in spring.owners]))
    if spring.axis == "horizontal":
        return sbar * voxel_length
    if spring.axis == "vertical":
        return voxel_length
    return voxel_length * math.sqrt(sbar * sbar + 1.0)


def _advance(state: SimState, params: PhysicsParams, n_steps: int, pattern: StimulusPattern | None,
             record_scales: bool = False, backend: str | None = None) -> tuple[np.ndarray, np.ndarray]:
    run_steps = get_kernel(backend)
    com = np.zeros((n_steps, 2))
    scales_out = np.zeros((n_steps if record_scales else 0, state.scales.shape[0]))
    s1, s2 = (pattern.s1, pattern.s2) if pattern is not None else (False, False)
    status = run_steps(state.pos, state.vel, state.mass, state.spr_i, state.spr_j, state.spr_kind,
                       state.spr_k, state.spr_o1, state.spr_o2, state.vox_kind, state.scales,
                       params.vector(), state.t, n_steps, int(s1), int(s2), int(pattern is not None),
                       com, scales_out)
    if status:
        state.t += status
        raise SimulationUnstable(f"non-finite state at step {state.t}", step=state.t)
    state.t += n_steps
    return com, scales_out


def step(state: SimState, params: PhysicsParams = PhysicsParams(), backend: str | None = None) -> SimState:
    """One integration step using the scales currently stored in the state."""
    _advance(state, params, 1, None, backend=backend)
    return state


def simulate_segment(state: SimState, pattern: StimulusPattern, cycles: int,
                     trace: Trace | None = None, params: PhysicsParams = PhysicsParams(),
                     record_scales: bool = False, backend: str | None = None) -> tuple[SimState, Trace]:
    """Run ``cycles`` actuation cycles under a fixed stimulus pattern.

    One trace record is appended per physics step. With ``record_scales``
    the per-step voxel scales are kept on the trace as well.
    """
    if cycles < 1:
        raise ValueError("cycles must be >= 1")
    if trace is None:
        trace = Trace.empty(state.com()[0], state.com()[1])
    n = cycles * params.steps_per_cycle
    t0 = state.t
    com, scales = _advance(state, params, n, pattern, record_scales=record_scales, backend=backend)
    steps = np.arange(t0 + 1, t0 + n + 1, dtype=np.int64)
    trace.extend(steps, steps / params.steps_per_cycle, com[:, 0], com[:, 1], pattern.s1, pattern.s2,
                 scales if record_scales else None)
    return state, trace
