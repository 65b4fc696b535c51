import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from morphocomp.morphology import Disconnected, MaterialKind, mirror_lr, validate
from morphocomp.physics import (
    KERNELS, PATTERNS, NotASensor, PhysicsParams, SimulationUnstable, StimulusPattern, Trace,
    TraceFormatError, active_scale, build_sim, read_trace_csv, rest_length, sensor_target,
    set_actuation, simulate_segment, step,
)
from morphocomp.physics.sim import Spring
from morphocomp.robots import PhysicalRobot

from conftest import BODIES, body

P = PhysicsParams()
K = MaterialKind


# -- construction ------------------------------------------------------------

def test_single_voxel_structure():
    s = build_sim(body("S", require_actuator=False))
    assert s.n_vertices == 4
    assert np.all(s.mass == 0.25)
    axes = sorted(sp.axis for sp in s.springs())
    assert axes == ["diagonal"] * 2 + ["horizontal"] * 2 + ["vertical"] * 2


def test_horizontal_pair_shares_one_edge():
    s = build_sim(body("SS", require_actuator=False))
    assert s.n_vertices == 6
    springs = s.springs()
    assert sum(sp.axis != "diagonal" for sp in springs) == 7
    assert sum(sp.axis == "diagonal" for sp in springs) == 4
    assert sorted(s.mass) == [0.25] * 4 + [0.5] * 2


def test_gap_is_rejected_before_simulation():
    with pytest.raises(Disconnected):
        validate([3, 0, 3], 1, 3)


def test_placement_and_initial_state(corpus_body):
    s = build_sim(corpus_body)
    assert s.pos[:, 1].min() == 0.0 and s.pos[:, 0].min() == 0.0
    assert not s.vel.any()
    assert np.all(s.scales == 1.0) and s.t == 0
    assert math.isclose(s.mass.sum(), len(corpus_body.occupied()))
    corners = {(r + dr, c + dc) for r, c in corpus_body.occupied() for dr in (0, 1) for dc in (0, 1)}
    assert s.n_vertices == len(corners)


def test_shared_edge_takes_stiffer_material():
    s = build_sim(body("SR", require_actuator=False))
    shared = [sp for sp in s.springs() if len(sp.owners) == 2]
    assert len(shared) == 1 and shared[0].axis == "vertical"
    assert shared[0].stiffness == P.stiffness_rigid


def test_springs_unique_and_nondegenerate(corpus_body):
    s = build_sim(corpus_body)
    seen = set()
    for sp in s.springs():
        assert sp.i != sp.j
        key = (min(sp.i, sp.j), max(sp.i, sp.j))
        assert key not in seen
        seen.add(key)


# -- actuation rules -----------------------------------------------------------

@pytest.mark.parametrize("phase, c, expected", [("A", 0.0, 1.1), ("A", 0.25, 1.6), ("B", 0.25, 0.6),
                                                ("B", 0.75, 1.6), ("A", 0.75, 0.6)])
def test_active_scale_examples(phase, c, expected):
    assert active_scale(phase, c) == pytest.approx(expected, abs=1e-12)


@given(st.sampled_from("AB"), st.floats(0.0, 1.0, exclude_max=True))
def test_active_scale_within_bounds(phase, c):
    assert 0.6 <= active_scale(phase, c) <= 1.6


def test_sensor_targets():
    on, off = StimulusPattern(True, False), StimulusPattern(False, False)
    assert sensor_target(K.SENSOR1_EXPAND, on) == 1.6
    assert sensor_target(K.SENSOR1_EXPAND, off) == 0.6
    assert sensor_target(K.SENSOR1_CONTRACT, on) == 0.6
    assert sensor_target(K.SENSOR1_CONTRACT, off) == 1.6
    for s2 in (False, True):
        a = sensor_target(K.SENSOR2_CONTRACT, StimulusPattern(False, s2))
        b = sensor_target(K.SENSOR2_CONTRACT, StimulusPattern(True, s2))
        assert a == b == (0.6 if s2 else 1.6)
    with pytest.raises(NotASensor):
        sensor_target(K.ACTIVE_A, on)


def test_sensor_ramp_reaches_target_in_ramp_steps():
    params = PhysicsParams(steps_per_cycle=128)
    s = build_sim(body("A1"), params)
    sensor = int(np.flatnonzero(s.vox_kind == K.SENSOR1_EXPAND)[0])
    s.scales[sensor] = 0.6
    n = round(params.sensor_ramp_cycles * params.steps_per_cycle)
    assert n == 32
    for k in range(n):
        set_actuation(s, StimulusPattern(True, False), params)
        s.t += 1
        if k < n - 1:
            assert s.scales[sensor] < 1.6
    assert s.scales[sensor] == pytest.approx(1.6, abs=1e-12)
    set_actuation(s, StimulusPattern(True, False), params)
    assert s.scales[sensor] == pytest.approx(1.6, abs=1e-12)


def test_active_voxel_ignores_prior_value():
    s = build_sim(body("AB"))
    s.scales[:] = 0.7
    set_actuation(s, PATTERNS[0], P)
    assert np.allclose(s.scales, 1.1)


def test_passive_voxels_stay_at_rest_scale():
    s = build_sim(body("SRA"))
    for t in range(40):
        s.t = t
        set_actuation(s, PATTERNS[3], P)
        assert s.scales[s.vox_kind == K.SOFT][0] == 1.0
        assert s.scales[s.vox_kind == K.RIGID][0] == 1.0


def test_rest_length_examples():
    h1 = Spring(0, 1, "horizontal", 1.0, 1.0, (0,))
    d1 = Spring(0, 2, "diagonal", math.sqrt(2), 1.0, (0,))
    h2 = Spring(0, 1, "horizontal", 1.0, 1.0, (0, 1))
    v = Spring(0, 3, "vertical", 1.0, 1.0, (0, 1))
    assert rest_length(h1, np.array([1.0])) == 1.0
    assert rest_length(d1, np.array([1.0])) == pytest.approx(math.sqrt(2))
    assert rest_length(h2, np.array([0.6, 1.6])) == pytest.approx(1.1)
    assert rest_length(v, np.array([0.6, 1.6]), voxel_length=2.0) == 2.0


# -- dynamics --------------------------------------------------------------------

def test_ground_penetration_matches_force_balance():
    s = build_sim(body("S", require_actuator=False))
    for _ in range(4000):
        step(s, P)
    bottom = s.pos[:, 1] < 0.5
    # each bottom corner carries half the body's weight
    expected = -(s.mass.sum() / 2) * P.gravity / P.ground_stiffness
    assert np.allclose(s.pos[bottom, 1], expected, rtol=1e-3)


def test_zero_gravity_rest_state_is_fixed_point():
    params = PhysicsParams(gravity=0.0)
    s = build_sim(body("SR\nSS", require_actuator=False), params)
    before = s.pos.copy()
    for _ in range(50):
        step(s, params)
    assert np.array_equal(s.pos, before)
    assert not s.vel.any()


def test_segment_record_count():
    params = PhysicsParams(steps_per_cycle=128)
    s = build_sim(body(BODIES["quad"]), params)
    _, tr = simulate_segment(s, PATTERNS[1], 10, params=params)
    assert len(tr) == 1280
    assert np.all(np.diff(tr.step) == 1)
    assert tr.cycle[-1] == pytest.approx(10.0)
    with pytest.raises(ValueError):
        simulate_segment(s, PATTERNS[1], 0, params=params)


def test_repeat_runs_are_bit_identical(corpus_body):
    a, b = PhysicalRobot(corpus_body), PhysicalRobot(corpus_body)
    for r in (a, b):
        r.advance(PATTERNS[2], 3)
        r.advance(PATTERNS[1], 2)
    assert a.trace.to_csv() == b.trace.to_csv()
    assert np.array_equal(a.state.pos, b.state.pos)


def test_non_finite_state_raises():
    s = build_sim(body("AS"))
    s.pos[1, 0] = np.nan
    with pytest.raises(SimulationUnstable) as ei:
        step(s, P)
    assert ei.value.step == 1


def test_no_blowup_over_80_cycles(corpus_body):
    r = PhysicalRobot(corpus_body)
    for p in PATTERNS * 2:
        r.advance(p, 10)
        speed = np.hypot(r.state.vel[:, 0], r.state.vel[:, 1])
        assert np.all(np.isfinite(r.state.pos))
        assert speed.max() <= P.speed_cap
    assert len(r.trace) == 80 * P.steps_per_cycle


def _net_dx(morph, pattern, cycles=10):
    r = PhysicalRobot(morph)
    r.advance(pattern, cycles)
    return r.trace.displacement(0, len(r.trace))


@pytest.mark.parametrize("name", ["walker", "quad", "all_kinds"])
@pytest.mark.parametrize("pattern", PATTERNS)
def test_mirroring_negates_displacement(name, pattern):
    m = body(BODIES[name])
    assert _net_dx(mirror_lr(m), pattern) == pytest.approx(-_net_dx(m, pattern), abs=0.05)


def test_symmetric_body_does_not_drift():
    m = body("SAS\nR.R")
    for p in PATTERNS:
        assert abs(_net_dx(m, p)) < 0.05


# -- backends ----------------------------------------------------------------------

@pytest.mark.skipif("cython" not in KERNELS, reason="compiled kernel not built")
@pytest.mark.parametrize("name", sorted(BODIES))
def test_compiled_and_numpy_kernels_agree(name):
    m = body(BODIES[name])
    robots = [PhysicalRobot(m, record_scales=True, backend=b) for b in ("python", "cython")]
    for r in robots:
        r.advance(PATTERNS[2], 2)
        r.advance(PATTERNS[1], 1)
    py, cy = robots
    assert np.array_equal(py.state.pos, cy.state.pos)
    assert np.array_equal(py.state.vel, cy.state.vel)
    assert np.array_equal(py.trace.scales, cy.trace.scales)
    # COM is a mass-weighted sum whose summation order differs between kernels
    assert np.allclose(py.trace.com_x, cy.trace.com_x, rtol=0, atol=1e-12)


def test_unknown_backend_rejected():
    with pytest.raises(ValueError):
        PhysicalRobot(body("A"), backend="fortran").advance(PATTERNS[0])


# -- params and traces ---------------------------------------------------------------

def test_params_round_trip_and_validation():
    p = PhysicsParams(dt=0.004, friction_mu=0.5)
    assert PhysicsParams.from_dict(p.to_dict()) == p
    with pytest.raises(ValueError):
        PhysicsParams.from_dict({"dt": 0.01, "wind": 3})
    for bad in ({"dt": 0.0}, {"steps_per_cycle": 4}, {"sensor_ramp_cycles": 1.5},
                {"stiffness_soft": -1.0}):
        with pytest.raises(ValueError):
            PhysicsParams(**bad)
    assert P.sensor_max_delta == pytest.approx(1.0 / (P.sensor_ramp_cycles * P.steps_per_cycle))


def test_stimulus_pattern_indexing():
    assert [p.index for p in PATTERNS] == [0, 1, 2, 3]
    assert PATTERNS == ((False, False), (False, True), (True, False), (True, True))
    with pytest.raises(ValueError):
        StimulusPattern.from_index(4)


def test_trace_csv_round_trip(tmp_path):
    r = PhysicalRobot(body(BODIES["quad"]))
    r.advance(PATTERNS[1], 1)
    r.advance(PATTERNS[2], 1)
    path = tmp_path / "t.csv"
    r.trace.to_csv(path)
    back = read_trace_csv(path, body_length=4.0)
    assert back.to_csv() == r.trace.to_csv()
    assert back.body_length == 4.0
    assert np.array_equal(back.s1, r.trace.s1)


@pytest.mark.parametrize("text, row", [
    ("", 1),
    ("step,cycle,x\n", 1),
    ("step,cycle,com_x,com_y,s1,s2\n1,0.1,0,0,0,0\n2,0.2,0,0,0\n", 3),
    ("step,cycle,com_x,com_y,s1,s2\n1,0.1,0,0,0,0\n2,0.2,zz,0,0,0\n", 3),
    ("step,cycle,com_x,com_y,s1,s2\n5,0.1,0,0,0,0\n5,0.2,0,0,0,0\n", 3),
])
def test_malformed_trace_reports_row(tmp_path, text, row):
    path = tmp_path / "bad.csv"
    path.write_text(text)
    with pytest.raises(TraceFormatError) as ei:
        read_trace_csv(path)
    assert ei.value.row == row
    assert f"row {row}" in str(ei.value)


def test_trace_steps_strictly_increase():
    tr = Trace.empty()
    tr.extend(np.array([1, 2]), np.array([0.1, 0.2]), np.zeros(2), np.zeros(2), False, False)
    with pytest.raises(ValueError):
        tr.extend(np.array([2]), np.array([0.3]), np.zeros(1), np.zeros(1), False, False)
