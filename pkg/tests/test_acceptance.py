"""Acceptance checks, one test per criterion.

Each test records a ``[PASS]`` or ``[FAIL]`` line through ``report``; the
lines are echoed in the terminal summary by ``conftest.py``. The two
evolution criteria share one session-scoped set of runs.
"""
import time
import xml.etree.ElementTree as ET

import numpy as np
import pytest

from morphocomp.archive import KEY_SPACE, EvolveParams, behavior_class, dominates, evolve, key_of
from morphocomp.cppn import develop, mutate, new_minimal
from morphocomp.evaluation import EvalParams, evaluate, evaluate_robot, variable_schedule_default
from morphocomp.morphology import InvalidMorphology, MaterialKind, from_text, mirror_lr, validate
from morphocomp.physics import PATTERNS, PhysicsParams, StimulusPattern, sensor_target, step
from morphocomp.render import spacetime_svg
from morphocomp.robots import PhysicalRobot, ScriptedRobot
from morphocomp.swarm import (
    NAMED_GATES, ScheduleEntry, all_behaviors, behavior_to_truth, boolean_oracle, parse_wiring,
    run_swarm, stub_robots,
)

from conftest import BODIES

RESULTS: list[str] = []


def report(name: str, ok: bool, detail: str) -> None:
    RESULTS.append(f"[{'PASS' if ok else 'FAIL'}] {name}: {detail}")
    assert ok, detail


P = PhysicsParams()
FULL_5X5 = "SASAS\nRSBSR\nS1S2S\nABABA\nSRSRS"


def random_bodies(n: int, seed: int = 0):
    rng = np.random.default_rng(seed)
    out = []
    while len(out) < n:
        g = new_minimal(rng)
        for _ in range(int(rng.integers(0, 8))):
            g = mutate(g, rng)
        try:
            out.append(validate(develop(g, 5, 5).reshape(-1), 5, 5))
        except InvalidMorphology:
            pass
    return out


# -- physics -----------------------------------------------------------------------

def test_physics_determinism_and_speed():
    bodies = random_bodies(8) + [from_text(t) for t in BODIES.values()]
    identical = 0
    for m in bodies:
        csvs = []
        for _ in range(2):
            r = PhysicalRobot(m)
            for p, n in variable_schedule_default(2):
                r.advance(p, n)
            csvs.append(r.trace.to_csv())
        identical += csvs[0] == csvs[1]

    m = from_text(FULL_5X5)
    PhysicalRobot(m).advance(PATTERNS[3], 1)    # warm-up
    t0 = time.perf_counter()
    PhysicalRobot(m).advance(PATTERNS[3], 10)
    elapsed = time.perf_counter() - t0
    ok = identical == len(bodies) and elapsed < 1.0
    report("physics determinism", ok,
           f"{identical}/{len(bodies)} bodies byte-identical; 10-cycle 5x5 sim {elapsed * 1000:.1f} ms (< 1 s)")


ALL_NINE = "SRA.\nB1!2\n??SS"


def test_actuation_bounds():
    m = from_text(ALL_NINE)
    kinds = set(m.cells)
    assert kinds == set(MaterialKind)
    r = PhysicalRobot(m, record_scales=True)
    for p, n in variable_schedule_default():
        r.advance(p, n)
    scales = r.trace.scales
    assert scales.shape[0] == 40 * P.steps_per_cycle
    lo, hi = scales.min(), scales.max()
    active = np.isin(r.state.vox_kind, [MaterialKind.ACTIVE_A, MaterialKind.ACTIVE_B])
    a_lo, a_hi = scales[:, active].min(), scales[:, active].max()
    ok = lo >= 0.6 and hi <= 1.6 and abs(a_lo - 0.6) <= 1e-6 and abs(a_hi - 1.6) <= 1e-6
    report("actuation bounds", ok,
           f"all scales in [{lo:.9f}, {hi:.9f}]; active min {a_lo:.9f} max {a_hi:.9f}")


PASSIVE = ["SSSSS\nSSSSS\nSSSSS\nSSSSS\nSSSSS", "RRRRR\nRSSSR\nRRRRR", "S\nS\nS\nS\nS", "SSSSSSSSSS",
           "R.R\nSSS"]
SYMMETRIC = ["SAS\nR.R", "ASA\nSBS\nR.R", "SSASS\nS1S1S\nRR.RR", "BAB\n2S2\nS.S"]


def test_rest_and_symmetry():
    worst_rest = 0.0
    for text in PASSIVE:
        r = PhysicalRobot(from_text(text, require_actuator=False))
        r.advance(PATTERNS[0], 5)
        # every step of the following cycle stays below the threshold too
        for _ in range(P.steps_per_cycle):
            step(r.state, P)
            worst_rest = max(worst_rest, float(np.hypot(*r.state.vel.T).max()))

    worst_drift = 0.0
    for text in SYMMETRIC:
        m = from_text(text)
        assert mirror_lr(m) == m
        for p in PATTERNS:
            r = PhysicalRobot(m)
            r.advance(p, 10)
            worst_drift = max(worst_drift, abs(r.trace.displacement(0, len(r.trace))))
    ok = worst_rest < 0.01 and worst_drift < 0.05
    report("rest and symmetry", ok,
           f"max passive speed after 5 cycles {worst_rest:.2e} (< 0.01); "
           f"max symmetric |dx| over 10 cycles {worst_drift:.2e} (< 0.05)")


SENSORS = [MaterialKind.SENSOR1_EXPAND, MaterialKind.SENSOR1_CONTRACT,
           MaterialKind.SENSOR2_EXPAND, MaterialKind.SENSOR2_CONTRACT]


def _steps_to_target(text: str, before: StimulusPattern, after: StimulusPattern) -> int:
    m = from_text(text)
    r = PhysicalRobot(m, record_scales=True)
    r.advance(before, 2)
    n0 = len(r.trace)
    r.advance(after, 1)
    sensor = int(np.flatnonzero(np.isin(r.state.vox_kind, SENSORS))[0])
    col = r.trace.scales[n0:, sensor]
    target = sensor_target(MaterialKind(int(r.state.vox_kind[sensor])), after)
    return int(np.flatnonzero(np.abs(col - target) < 1e-9)[0]) + 1


def test_sensor_response():
    ramp = round(P.sensor_ramp_cycles * P.steps_per_cycle)
    cases = {
        "expand1 off->on": ("SAS\n.1.", PATTERNS[0], PATTERNS[2]),
        "expand1 on->off": ("SAS\n.1.", PATTERNS[2], PATTERNS[0]),
        "contract2 off->on": ("SAS\n.?.", PATTERNS[0], PATTERNS[1]),
        "expand2 on->off": ("SAS\n.2.", PATTERNS[3], PATTERNS[2]),
    }
    got = {k: _steps_to_target(*v) for k, v in cases.items()}
    ok = all(abs(n - ramp) <= 1 for n in got.values())
    report("sensor response", ok,
           f"steps to target {got} vs {ramp} (= {P.sensor_ramp_cycles} cycles) +-1")


# -- evaluation --------------------------------------------------------------------

def test_evaluation_protocol():
    sched = EvalParams().variable_schedule
    expected = tuple((PATTERNS[i], 10) for i in range(4))
    schedule_ok = sched == expected and sum(n for _, n in sched) == 40

    fixed_cycles = EvalParams().fixed_cycles

    def reverser():
        # right for the length of a fixed run, left afterwards
        return ScriptedRobot(lambda p, c: 0.5 if c < fixed_cycles else -0.5, steps_per_cycle=16)

    res = evaluate_robot(reverser)
    rejected = not res.valid and not res.consistent
    report("evaluation protocol", schedule_ok and rejected,
           f"schedule {[(p.index, n) for p, n in sched]} total {sum(n for _, n in sched)}; "
           f"reversing robot valid={res.valid}")


# -- archive and evolution ----------------------------------------------------------

EVOLVE_SEEDS = (0, 1, 2)


@pytest.fixture(scope="session")
def evolution_runs():
    runs = {}
    for seed in EVOLVE_SEEDS:
        events = []
        t0 = time.perf_counter()
        archive = evolve(EvolveParams(height=5, width=5, generations=200, seed=seed), events=events)
        runs[seed] = (archive, events, time.perf_counter() - t0)
    return runs


@pytest.mark.slow
def test_archive_invariants(evolution_runs):
    archive, events, elapsed = evolution_runs[0]
    latest: dict = {}
    bad_writes = 0
    for e in events:
        if e.old is not None and (latest.get(e.key) != e.old or not dominates(e.new, e.old)):
            bad_writes += 1
        if e.old is None and e.key in latest:
            bad_writes += 1
        latest[e.key] = e.new
    final_matches = latest == {k: (c.f_variable, c.f_min_fixed) for k, c in archive.cells.items()}

    # re-evaluate a sample of stored genomes from scratch
    params = EvolveParams().eval
    sample = archive.sorted_items()[::max(1, len(archive) // 8)]
    recomputed = all(
        key_of(r := evaluate(c.genome, params, 5, 5), 5, 5) == k
        and (r.f_variable, r.f_min_fixed) == (c.f_variable, c.f_min_fixed)
        for k, c in sample)
    ok = (bad_writes == 0 and final_matches and len(archive) <= KEY_SPACE and archive.key_integrity()
          and recomputed and elapsed < 600)
    replaced = sum(e.old is not None for e in events)
    report("archive invariants", ok,
           f"{len(events)} writes ({replaced} replacements), {bad_writes} non-dominating; "
           f"|archive| {len(archive)} <= {KEY_SPACE}; keys recompute: {archive.key_integrity()}; "
           f"{len(sample)} re-evaluated cells match: {recomputed}; run {elapsed:.0f} s")


@pytest.mark.slow
def test_evolution_smoke(evolution_runs):
    sizes = {s: len(a) for s, (a, _, _) in evolution_runs.items()}
    classes = {s: sorted({behavior_class(c.behavior) for c in a.cells.values()})
               for s, (a, _, _) in evolution_runs.items()}
    responsive = [s for s, cl in classes.items() if any(c != "XXXX" for c in cl)]
    total = sum(t for _, _, t in evolution_runs.values())
    ok = all(n >= 30 for n in sizes.values()) and responsive and total < 1800
    report("evolution smoke", bool(ok),
           f"cells per seed {sizes} (>= 30); seeds with responsive classes {responsive}; "
           f"classes seed 0 {classes[0]}; total {total:.0f} s")


# -- swarm -------------------------------------------------------------------------

def test_gate_semantics():
    tables = {behavior_to_truth(b) for b in all_behaviors()}
    nand = behavior_to_truth("RRRL") == NAMED_GATES["NAND"] == (True, True, True, False)
    report("gate semantics", nand and len(tables) == 16,
           f"RRRL -> NAND: {nand}; {len(tables)} distinct tables from 16 strings")


XOR_NAND = ("robot a gate=NAND in1=IN1 in2=IN2\nrobot b gate=NAND in1=IN1 in2=R:a\n"
            "robot c gate=NAND in1=R:a in2=IN2\nrobot x gate=NAND in1=R:b in2=R:c\nobserve x\n")
DLATCH = ("robot n1 gate=NAND in1=IN1 in2=IN2\nrobot n2 gate=NAND in1=R:n1 in2=IN2\n"
          "robot q gate=NAND in1=R:n1 in2=R:qbar\nrobot qbar gate=NAND in1=R:n2 in2=R:q\nobserve q\n")
CORPUS = {
    "nand": "robot g gate=NAND in1=IN1 in2=IN2\n",
    "and": "robot g gate=AND in1=IN1 in2=IN2\n",
    "xor": "robot g gate=XOR in1=IN1 in2=IN2\n",
    "not1": "robot g gate=NOT1 in1=IN1 in2=IN2\n",
    "xor_from_nands": XOR_NAND,
    "dlatch": DLATCH,
    "ring": "robot a gate=NOT1 in1=R:c in2=IN1\nrobot b gate=NOT1 in1=R:a in2=IN1\n"
            "robot c gate=NOT1 in1=R:b in2=IN2\n",
}


def test_swarm_oracle_equivalence():
    rng = np.random.default_rng(7)
    checked = mismatches = 0
    for name, text in CORPUS.items():
        w = parse_wiring(text)
        for _ in range(5):
            n = int(rng.integers(20, 31))
            sched = [ScheduleEntry(bool(rng.integers(2)), bool(rng.integers(2)), int(rng.integers(1, 8)))
                     for _ in range(n)]
            trace = run_swarm(w, stub_robots(w), sched)
            mismatches += trace.output_bits() != boolean_oracle(w, sched)
            checked += 1
    report("swarm oracle equivalence", mismatches == 0,
           f"{len(CORPUS)} wirings x 5 schedules of 20-30 entries: {checked - mismatches}/{checked} bit-identical")


def test_dlatch_semantics():
    w = parse_wiring(DLATCH)
    # (D, E) per entry: set, hold with D low, hold with D high, reset, hold with D high, hold with D low
    rows = [(1, 1), (0, 0), (1, 0), (0, 1), (1, 0), (0, 0)]
    sched = [ScheduleEntry(bool(d), bool(e), 10) for d, e in rows]
    stub_q = [o["q"] for o in run_swarm(w, stub_robots(w), sched).output_bits()]
    oracle_q = [o["q"] for o in boolean_oracle(w, sched)]
    settle = 4
    follows = holds = True
    state = None
    for i, (d, e) in enumerate(rows):
        window = oracle_q[i * 10 + settle:(i + 1) * 10]
        if e:
            follows &= all(q == bool(d) for q in window)
            state = bool(d)
        else:
            holds &= all(q == state for q in window)
    ends = [oracle_q[(i + 1) * 10 - 1] for i in range(len(rows))]
    ok = follows and holds and stub_q == oracle_q and ends == [True, True, True, False, False, False]
    report("D-latch semantics", ok,
           f"Q at end of set/hold/hold/reset/hold/hold = {[int(q) for q in ends]}; "
           f"follows D when E=1: {follows}; holds when E=0: {holds}; stub == oracle: {stub_q == oracle_q}")


# -- rendering -----------------------------------------------------------------------

def test_rendering():
    m = from_text(BODIES["walker"])
    r = PhysicalRobot(m)
    for p, n in variable_schedule_default():
        r.advance(p, n)
    svg = spacetime_svg([r.trace])
    root = ET.fromstring(svg)
    cls = lambda c: [el for el in root.iter() if c in el.get("class", "").split()]
    bands = cls("stimulus-band")
    (line,) = cls("trajectory")
    lo, hi = float(root.get("data-position-min")), float(root.get("data-position-max"))
    frame = next(el for el in root.iter("{http://www.w3.org/2000/svg}rect") if el.get("fill") == "none")
    x0, w = float(frame.get("x")), float(frame.get("width"))
    last_px = float(line.get("points").split()[-1].split(",")[0])
    end_bl = lo + (last_px - x0) / w * (hi - lo)
    expected = r.trace.displacement(0, len(r.trace)) / r.trace.body_length
    labels = " | ".join(el.text for el in cls("axis-label"))
    ok = (len(bands) == 4 and float(root.get("data-time-max")) == 40.0
          and root.get("data-time-unit") == "actuation-cycles"
          and root.get("data-position-unit") == "body-lengths"
          and abs(end_bl - expected) < 0.01 * max(1.0, abs(expected)))
    report("rendering", ok,
           f"{len(bands)} stimulus bands; time axis 0-{root.get('data-time-max')} cycles; "
           f"final x {end_bl:.3f} vs {expected:.3f} body lengths; labels '{labels}'")
