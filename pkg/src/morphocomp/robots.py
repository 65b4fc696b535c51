"""Robots that can be stepped one stimulus window at a time.

``PhysicalRobot`` wraps a physics state. ``ScriptedRobot`` follows a
displacement policy instead of physics; tests and stub swarms use it as a
drop-in stand-in with the same trace output.
"""
from __future__ import annotations

from typing import Callable, Protocol

import numpy as np

from .morphology import Morphology, body_length
from .physics import PhysicsParams, StimulusPattern, Trace, build_sim, simulate_segment


class Robot(Protocol):
    trace: Trace

    @property
    def com_x(self) -> float: ...

    def advance(self, pattern: StimulusPattern, cycles: int = 1) -> None: ...


class PhysicalRobot:
    def __init__(self, morph: Morphology, params: PhysicsParams = PhysicsParams(),
                 record_scales: bool = False, backend: str | None = None):
        self.morph = morph
        self.params = params
        self.state = build_sim(morph, params)
        x0, y0 = self.state.com()
        self.trace = Trace.empty(x0, y0, body_length(morph, params.voxel_length))
        self.record_scales = record_scales
        self.backend = backend

    @property
    def com_x(self) -> float:
        return self.trace.com_x_at(len(self.trace))

    def advance(self, pattern: StimulusPattern, cycles: int = 1) -> None:
        simulate_segment(self.state, pattern, cycles, self.trace, self.params,
                         record_scales=self.record_scales, backend=self.backend)


# policy(pattern, cycle_number) -> COM x displacement over that cycle
Policy = Callable[[StimulusPattern, int], float]


class ScriptedRobot:
    def __init__(self, policy: Policy, steps_per_cycle: int = PhysicsParams().steps_per_cycle,
                 body_length: float = 1.0):
        self.policy = policy
        self.steps_per_cycle = steps_per_cycle
        self.cycle = 0
        self.trace = Trace.empty(0.0, 0.5, body_length)

    @property
    def com_x(self) -> float:
        return self.trace.com_x_at(len(self.trace))

    def advance(self, pattern: StimulusPattern, cycles: int = 1) -> None:
        T = self.steps_per_cycle
        frac = np.arange(1, T + 1) / T
        for _ in range(cycles):
            x0 = self.com_x
            dx = float(self.policy(pattern, self.cycle))
            step0 = self.cycle * T
            steps = np.arange(step0 + 1, step0 + T + 1, dtype=np.int64)
            com_x = x0 + dx * frac
            com_x[-1] = x0 + dx
            self.trace.extend(steps, steps / T, com_x, np.full(T, 0.5), pattern.s1, pattern.s2)
            self.cycle += 1


def truth_table_policy(truth: tuple[bool, bool, bool, bool], speed: float = 1.0) -> Policy:
    """Move +speed per cycle where the table is true, -speed otherwise."""
    def policy(pattern: StimulusPattern, cycle: int) -> float:
        return speed if truth[pattern.index] else -speed
    return policy
