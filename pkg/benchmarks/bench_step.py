"""Physics steps per second for each available kernel on a 5x5 body.

    python benchmarks/bench_step.py [--cycles 10] [--repeat 5]
"""
import argparse
import time

import numpy as np

from morphocomp.morphology import from_text
from morphocomp.physics import KERNELS, PATTERNS, PhysicsParams, build_sim, simulate_segment

BODY = "SASAS\nRSBSR\nS1S2S\nABABA\nSRSRS"


def bench(backend: str, cycles: int, repeat: int) -> tuple[float, np.ndarray]:
    params = PhysicsParams()
    morph = from_text(BODY)
    best = float("inf")
    for _ in range(repeat):
        state = build_sim(morph, params)
        t0 = time.perf_counter()
        simulate_segment(state, PATTERNS[3], cycles, params=params, backend=backend)
        best = min(best, time.perf_counter() - t0)
    return cycles * params.steps_per_cycle / best, state.pos


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--cycles", type=int, default=10)
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()

    rates, final = {}, {}
    for name in sorted(KERNELS):
        rates[name], final[name] = bench(name, args.cycles, args.repeat)
        print(f"{name:>8}: {rates[name]:>12,.0f} steps/s  "
              f"({args.cycles}-cycle sim in {args.cycles * PhysicsParams().steps_per_cycle / rates[name] * 1e3:.1f} ms)")
    if len(rates) == 2:
        print(f" speedup: {rates['cython'] / rates['python']:.1f}x")
        print(f"max |pos difference|: {np.abs(final['cython'] - final['python']).max():.3g}")


if __name__ == "__main__":
    main()
