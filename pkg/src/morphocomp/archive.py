"""MAP-Elites over morphology bins x behavior bits, with dominance replacement."""
from __future__ import annotations

import json
import logging
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Callable, Iterable, NamedTuple

import numpy as np

from .cppn import Genome, mutate, new_minimal
from .errors import MorphocompError
from .evaluation import EvalParams, EvalResult, evaluate
from .morphology import MorphCounts

logger = logging.getLogger(__name__)

N_BINS = 4
KEY_SPACE = N_BINS ** 3 * 16


class ArchiveError(MorphocompError):
    pass


class EmptyArchive(ArchiveError):
    pass


class InvalidResult(ArchiveError):
    pass


class InsertOutcome(Enum):
    INSERTED_EMPTY = "inserted_empty"
    REPLACED = "replaced"
    REJECTED_DOMINANCE = "rejected_dominance"
    REJECTED_INVALID = "rejected_invalid"


class ArchiveKey(NamedTuple):
    bin_active: int
    bin_sensor: int
    bin_total: int
    b0: bool
    b1: bool
    b2: bool
    b3: bool

    def as_list(self) -> list[int]:
        return [int(v) for v in self]


def bin_count(count: int, max_count: int) -> int:
    if not 0 <= count <= max_count:
        raise ValueError(f"count {count} outside 0..{max_count}")
    return min(N_BINS - 1, (N_BINS * count) // (max_count + 1))


def key_from(counts: MorphCounts, behavior: str, height: int, width: int) -> ArchiveKey:
    cap = height * width
    bits = tuple(ch == "R" for ch in behavior)
    return ArchiveKey(bin_count(counts.n_active, cap), bin_count(counts.n_sensor, cap),
                      bin_count(counts.n_total, cap), *bits)


def key_of(result: EvalResult, height: int, width: int) -> ArchiveKey:
    if not result.valid:
        raise InvalidResult("only valid results have an archive key")
    return key_from(result.morph_counts, result.behavior_string, height, width)


@dataclass
class Cell:
    genome: Genome
    f_variable: float
    f_min_fixed: float
    counts: MorphCounts
    behavior: str
    generation: int

    def to_dict(self, key: ArchiveKey) -> dict:
        return {
            "key": key.as_list(),
            "f_variable": self.f_variable,
            "f_min_fixed": self.f_min_fixed,
            "behavior": self.behavior,
            "counts": self.counts.as_list(),
            "generation": self.generation,
            "genome": self.genome.to_dict(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Cell":
        return cls(Genome.from_dict(d["genome"]), float(d["f_variable"]), float(d["f_min_fixed"]),
                   MorphCounts(*map(int, d["counts"])), str(d["behavior"]), int(d.get("generation", 0)))


def dominates(a: tuple[float, float], b: tuple[float, float]) -> bool:
    """Strictly better in both objectives."""
    return a[0] > b[0] and a[1] > b[1]


@dataclass
class Archive:
    height: int
    width: int
    cells: dict[ArchiveKey, Cell] = field(default_factory=dict)
    generation: int = 0
    params: dict = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.cells)

    def try_insert(self, result: EvalResult, genome: Genome, generation: int | None = None) -> InsertOutcome:
        if not result.valid:
            return InsertOutcome.REJECTED_INVALID
        key = key_of(result, self.height, self.width)
        cand = (result.f_variable, result.f_min_fixed)
        incumbent = self.cells.get(key)
        if incumbent is not None and not dominates(cand, (incumbent.f_variable, incumbent.f_min_fixed)):
            return InsertOutcome.REJECTED_DOMINANCE
        self.cells[key] = Cell(genome, result.f_variable, result.f_min_fixed, result.morph_counts,
                               result.behavior_string, self.generation if generation is None else generation)
        return InsertOutcome.INSERTED_EMPTY if incumbent is None else InsertOutcome.REPLACED

    def sorted_items(self) -> list[tuple[ArchiveKey, Cell]]:
        return sorted(self.cells.items(), key=lambda kv: kv[0].as_list())

    def select_parents(self, rng: np.random.Generator, n: int = 16) -> list[Genome]:
        """Uniform sampling with replacement over occupied cells (in key order)."""
        if not self.cells:
            raise EmptyArchive("cannot select parents from an empty archive")
        items = self.sorted_items()
        idx = rng.integers(len(items), size=n)
        return [items[int(i)][1].genome for i in idx]

    def key_integrity(self) -> bool:
        return all(key_from(c.counts, c.behavior, self.height, self.width) == k
                   for k, c in self.cells.items())

    # -- persistence --------------------------------------------------------

    def to_dict(self) -> dict:
        return {
            "params": self.params,
            "height": self.height,
            "width": self.width,
            "generation": self.generation,
            "cells": [c.to_dict(k) for k, c in self.sorted_items()],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=1) + "\n"

    def save(self, path: str | Path) -> None:
        path = Path(path)
        tmp = path.with_name(path.name + ".tmp")
        tmp.write_text(self.to_json())
        os.replace(tmp, path)

    @classmethod
    def from_dict(cls, d: dict) -> "Archive":
        if not isinstance(d, dict):
            raise ArchiveError("corrupt archive: top level must be a JSON object")
        try:
            params = d.get("params", {})
            height = int(d.get("height", params.get("height")))
            width = int(d.get("width", params.get("width")))
            arch = cls(height, width, generation=int(d.get("generation", 0)), params=params)
            for cd in d["cells"]:
                key = ArchiveKey(*(int(v) for v in cd["key"][:3]), *(bool(v) for v in cd["key"][3:]))
                if len(cd["key"]) != 7:
                    raise ValueError(f"key {cd['key']} must have 7 entries")
                arch.cells[key] = Cell.from_dict(cd)
        except (KeyError, TypeError, ValueError) as e:
            raise ArchiveError(f"corrupt archive: {e}") from None
        return arch

    @classmethod
    def load(cls, path: str | Path) -> "Archive":
        try:
            d = json.loads(Path(path).read_text())
        except json.JSONDecodeError as e:
            raise ArchiveError(f"corrupt archive {path}: {e}") from None
        return cls.from_dict(d)


# -- evolution loop -------------------------------------------------------

@dataclass(frozen=True)
class EvolveParams:
    height: int = 5
    width: int = 5
    generations: int = 3000
    offspring_per_gen: int = 16
    init_population: int = 64
    seed: int = 0
    eval: EvalParams = field(default_factory=EvalParams)
    checkpoint_every: int = 50

    def to_dict(self) -> dict:
        return {
            "height": self.height, "width": self.width, "generations": self.generations,
            "offspring_per_gen": self.offspring_per_gen, "init_population": self.init_population,
            "seed": self.seed, "checkpoint_every": self.checkpoint_every, "eval": self.eval.to_dict(),
        }


@dataclass
class GenerationLog:
    generation: int
    filled: int
    best_f_variable: float
    best_f_min_fixed: float
    inserted: int = 0
    replaced: int = 0
    rejected_dominance: int = 0
    rejected_invalid: int = 0

    CSV_HEADER = ("generation", "filled", "best_f_variable", "best_f_min_fixed",
                  "inserted", "replaced", "rejected_dominance", "rejected_invalid")

    def csv_row(self) -> str:
        return ",".join(str(getattr(self, h)) if not isinstance(getattr(self, h), float)
                        else repr(getattr(self, h)) for h in self.CSV_HEADER)


@dataclass
class ReplacementEvent:
    """One archive write, kept for auditing monotonicity."""
    generation: int
    key: ArchiveKey
    old: tuple[float, float] | None
    new: tuple[float, float]


def _eval_job(args) -> EvalResult:
    genome, params, height, width = args
    return evaluate(genome, params, height, width, keep_traces=False, early_exit=True)


class _Evaluator:
    def __init__(self, workers: int):
        self.workers = max(1, workers)
        self.pool = ProcessPoolExecutor(self.workers) if self.workers > 1 else None

    def map(self, genomes: list[Genome], params: EvalParams, height: int, width: int) -> list[EvalResult]:
        jobs = [(g, params, height, width) for g in genomes]
        if self.pool is None:
            return [_eval_job(j) for j in jobs]
        # map() yields in submission order, whatever the completion order
        return list(self.pool.map(_eval_job, jobs))

    def close(self):
        if self.pool is not None:
            self.pool.shutdown()


def _record(archive: Archive, results: Iterable[tuple[Genome, EvalResult]], generation: int,
            events: list[ReplacementEvent] | None) -> GenerationLog:
    log = GenerationLog(generation, 0, 0.0, 0.0)
    for genome, res in results:
        old = None
        if res.valid:
            k = key_of(res, archive.height, archive.width)
            if k in archive.cells:
                old = (archive.cells[k].f_variable, archive.cells[k].f_min_fixed)
        outcome = archive.try_insert(res, genome, generation)
        if outcome is InsertOutcome.INSERTED_EMPTY:
            log.inserted += 1
        elif outcome is InsertOutcome.REPLACED:
            log.replaced += 1
        elif outcome is InsertOutcome.REJECTED_DOMINANCE:
            log.rejected_dominance += 1
        else:
            log.rejected_invalid += 1
        if events is not None and outcome in (InsertOutcome.INSERTED_EMPTY, InsertOutcome.REPLACED):
            events.append(ReplacementEvent(generation, k, old, (res.f_variable, res.f_min_fixed)))
    log.filled = len(archive)
    if archive.cells:
        log.best_f_variable = max(c.f_variable for c in archive.cells.values())
        log.best_f_min_fixed = max(c.f_min_fixed for c in archive.cells.values())
    return log


def evolve(params: EvolveParams, workers: int = 1,
           checkpoint_path: str | Path | None = None,
           on_generation: Callable[[GenerationLog], None] | None = None,
           events: list[ReplacementEvent] | None = None) -> Archive:
    """Run MAP-Elites; deterministic for a given seed, whatever ``workers`` is.

    Generation 0 is the random initial population. If the archive is still
    empty when parents are needed, a fresh batch of random genomes is
    evaluated in place of offspring.
    """
    rng = np.random.default_rng(params.seed)
    archive = Archive(params.height, params.width, params=params.to_dict())
    evaluator = _Evaluator(workers)
    try:
        genomes = [new_minimal(rng) for _ in range(params.init_population)]
        results = evaluator.map(genomes, params.eval, params.height, params.width)
        log = _record(archive, zip(genomes, results), 0, events)
        if on_generation:
            on_generation(log)
        for gen in range(1, params.generations + 1):
            archive.generation = gen
            if archive.cells:
                parents = archive.select_parents(rng, params.offspring_per_gen)
                genomes = [mutate(p, rng) for p in parents]
            else:
                genomes = [new_minimal(rng) for _ in range(params.offspring_per_gen)]
            results = evaluator.map(genomes, params.eval, params.height, params.width)
            log = _record(archive, zip(genomes, results), gen, events)
            if on_generation:
                on_generation(log)
            if checkpoint_path is not None and params.checkpoint_every and gen % params.checkpoint_every == 0:
                archive.save(checkpoint_path)
            logger.debug("gen %d filled %d", gen, log.filled)
    finally:
        evaluator.close()
    archive.generation = params.generations
    return archive


# -- analysis -------------------------------------------------------------

def behavior_class(behavior: str) -> str:
    """Collapse mirror-symmetric behaviors: first letter becomes X, the other Y."""
    if len(behavior) != 4 or set(behavior) - {"L", "R"}:
        raise ValueError(f"malformed behavior string {behavior!r}")
    first = behavior[0]
    return "".join("X" if ch == first else "Y" for ch in behavior)


def champions(archive: Archive) -> dict[str, Cell]:
    """Best cell per behavior string: max f_variable, then f_min_fixed, then earliest."""
    best: dict[str, Cell] = {}
    for _, cell in archive.sorted_items():
        cur = best.get(cell.behavior)
        if cur is None or (cell.f_variable, cell.f_min_fixed, -cell.generation) > \
                (cur.f_variable, cur.f_min_fixed, -cur.generation):
            best[cell.behavior] = cell
    return dict(sorted(best.items()))
