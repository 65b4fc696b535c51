from .backend import BACKEND, KERNELS, get_kernel
from .sim import (
    PATTERNS,
    SCALE_MAX,
    SCALE_MIN,
    NotASensor,
    PhysicsParams,
    SimState,
    SimulationUnstable,
    Spring,
    StimulusPattern,
    active_scale,
    build_sim,
    rest_length,
    sensor_target,
    set_actuation,
    simulate_segment,
    step,
)
from .trace import Trace, TraceFormatError, read_trace_csv

__all__ = [
    "BACKEND", "KERNELS", "get_kernel", "PATTERNS", "SCALE_MAX", "SCALE_MIN", "NotASensor",
    "PhysicsParams", "SimState", "SimulationUnstable", "Spring", "StimulusPattern",
    "active_scale", "build_sim", "rest_length", "sensor_target", "set_actuation",
    "simulate_segment", "step", "Trace", "TraceFormatError", "read_trace_csv",
]
