"""Voxel-grid bodies: material taxonomy, validity rules and descriptor counts."""
from __future__ import annotations

from dataclasses import dataclass
from enum import IntEnum
from typing import Iterable, Sequence

import numpy as np

from .errors import MorphocompError


class MaterialKind(IntEnum):
    # Index order is frozen: it is the CPPN output order and the argmax tie-break.
    EMPTY = 0
    SOFT = 1
    RIGID = 2
    ACTIVE_A = 3
    ACTIVE_B = 4
    SENSOR1_EXPAND = 5
    SENSOR1_CONTRACT = 6
    SENSOR2_EXPAND = 7
    SENSOR2_CONTRACT = 8

    @property
    def is_active(self) -> bool:
        return self in (MaterialKind.ACTIVE_A, MaterialKind.ACTIVE_B)

    @property
    def is_sensor(self) -> bool:
        return MaterialKind.SENSOR1_EXPAND <= self <= MaterialKind.SENSOR2_CONTRACT

    @property
    def char(self) -> str:
        return MATERIAL_CHARS[self]


MATERIAL_CHARS = ".SRAB1!2?"
_CHAR_TO_KIND = {c: MaterialKind(i) for i, c in enumerate(MATERIAL_CHARS)}

MAX_SIDE = 10


class InvalidMorphology(MorphocompError):
    """Base class for bodies that fail validation."""


class EmptyBody(InvalidMorphology):
    pass


class Disconnected(InvalidMorphology):
    pass


class NoActuator(InvalidMorphology):
    pass


@dataclass(frozen=True)
class MorphCounts:
    n_active: int
    n_sensor: int
    n_total: int

    def as_list(self) -> list[int]:
        return [self.n_active, self.n_sensor, self.n_total]


@dataclass(frozen=True)
class Morphology:
    """An immutable H x W grid of materials; row 0 is the top row.

    Build instances through :func:`validate` (or :func:`from_text`), which
    enforces the connectivity and actuator rules.
    """

    height: int
    width: int
    cells: tuple[MaterialKind, ...]

    def __getitem__(self, rc: tuple[int, int]) -> MaterialKind:
        r, c = rc
        return self.cells[r * self.width + c]

    def as_array(self) -> np.ndarray:
        return np.array([int(k) for k in self.cells], dtype=np.int64).reshape(self.height, self.width)

    def occupied(self) -> list[tuple[int, int]]:
        return [(i // self.width, i % self.width) for i, k in enumerate(self.cells) if k != MaterialKind.EMPTY]

    def to_text(self) -> str:
        return to_text(self)

    def __str__(self) -> str:
        return self.to_text()


def _components(grid: np.ndarray) -> int:
    """Number of 4-connected components of nonzero cells."""
    H, W = grid.shape
    seen = np.zeros_like(grid, dtype=bool)
    n = 0
    for r0 in range(H):
        for c0 in range(W):
            if grid[r0, c0] == 0 or seen[r0, c0]:
                continue
            n += 1
            stack = [(r0, c0)]
            seen[r0, c0] = True
            while stack:
                r, c = stack.pop()
                for rr, cc in ((r - 1, c), (r + 1, c), (r, c - 1), (r, c + 1)):
                    if 0 <= rr < H and 0 <= cc < W and grid[rr, cc] != 0 and not seen[rr, cc]:
                        seen[rr, cc] = True
                        stack.append((rr, cc))
    return n


def validate(grid: Sequence[int] | np.ndarray, height: int, width: int,
             require_actuator: bool = True) -> Morphology:
    """Check a row-major grid and wrap it as a :class:`Morphology`.

    Raises EmptyBody, Disconnected or NoActuator. ``require_actuator=False``
    admits passive-only bodies, which the physics tests use as controls.
    """
    if not (1 <= height <= MAX_SIDE and 1 <= width <= MAX_SIDE):
        raise InvalidMorphology(f"grid size {height}x{width} outside 1..{MAX_SIDE}")
    flat = np.asarray(grid, dtype=np.int64).reshape(-1)
    if flat.size != height * width:
        raise InvalidMorphology(f"expected {height * width} cells, got {flat.size}")
    if flat.min(initial=0) < 0 or flat.max(initial=0) > 8:
        raise InvalidMorphology("material index out of range 0..8")
    arr = flat.reshape(height, width)
    if not arr.any():
        raise EmptyBody("no occupied voxels")
    if _components(arr) != 1:
        raise Disconnected("occupied voxels are not 4-connected")
    if require_actuator and not np.isin(flat, (3, 4)).any():
        raise NoActuator("body has no active voxel")
    return Morphology(height, width, tuple(MaterialKind(int(v)) for v in flat))


def counts(morph: Morphology) -> MorphCounts:
    n_active = sum(1 for k in morph.cells if k.is_active)
    n_sensor = sum(1 for k in morph.cells if k.is_sensor)
    n_total = sum(1 for k in morph.cells if k != MaterialKind.EMPTY)
    return MorphCounts(n_active, n_sensor, n_total)


def body_length(morph: Morphology, voxel_length: float = 1.0) -> float:
    cols = [c for _, c in morph.occupied()]
    return (max(cols) - min(cols) + 1) * voxel_length


def mirror_lr(morph: Morphology) -> Morphology:
    arr = morph.as_array()[:, ::-1]
    return Morphology(morph.height, morph.width, tuple(MaterialKind(int(v)) for v in arr.reshape(-1)))


def from_text(text: str | Iterable[str], require_actuator: bool = True) -> Morphology:
    """Parse the text grid format: one line per row, one character per voxel."""
    lines = text.splitlines() if isinstance(text, str) else list(text)
    rows = [ln.strip() for ln in lines if ln.strip()]
    if not rows:
        raise EmptyBody("empty grid text")
    width = len(rows[0])
    if any(len(r) != width for r in rows):
        raise InvalidMorphology("ragged grid text")
    try:
        flat = [int(_CHAR_TO_KIND[ch]) for r in rows for ch in r]
    except KeyError as e:
        raise InvalidMorphology(f"unknown material character {e.args[0]!r}") from None
    return validate(flat, len(rows), width, require_actuator=require_actuator)


def to_text(morph: Morphology) -> str:
    rows = []
    for r in range(morph.height):
        rows.append("".join(MATERIAL_CHARS[morph[r, c]] for c in range(morph.width)))
    return "\n".join(rows) + "\n"
