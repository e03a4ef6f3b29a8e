import math
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import assume, given
from hypothesis import strategies as st

from tirealloc.envelope import (EnvelopeInputs, SlipBounds, build_envelope, circle_envelope,
                                contains, convex_hull, extremum_envelope, octagon_envelope,
                                polygon_vertices, slip_angle_bounds, slip_ratio_bounds,
                                steer_bounds, table_ii_points, torque_bounds, violation)
from tirealloc.params import DEG
from tirealloc.plant import KinematicSingularity, VehicleState, wheel_kinematics
from tirealloc.tire import brush_force, slip_gamma

from oracles import sample_attainable

F_Z = 3000.0


@st.composite
def slip_bounds(draw, straddle=False, k_max=0.3, a_max=0.3, w_min=0.0):
    if straddle:
        k = (-draw(st.floats(w_min, k_max)), draw(st.floats(w_min, k_max)))
        a = (-draw(st.floats(w_min, a_max)), draw(st.floats(w_min, a_max)))
    else:
        k = sorted([draw(st.floats(-k_max, k_max)), draw(st.floats(-k_max, k_max))])
        a = sorted([draw(st.floats(-a_max, a_max)), draw(st.floats(-a_max, a_max))])
    return SlipBounds(k[0], k[1], a[0], a[1])


def test_torque_bounds(ap):
    assert torque_bounds(0.0, ap, 0.01) == (-500.0, 500.0)
    assert torque_bounds(1000.0, ap, 0.01) == (500.0, 1250.0)
    assert torque_bounds(ap.T_max, ap, 0.01)[1] == ap.T_max


def test_steer_bounds(ap):
    lo, hi = steer_bounds(0.0, ap, 0.01)
    assert (lo, hi) == pytest.approx((-0.5 * DEG, 0.5 * DEG), abs=1e-15)
    assert steer_bounds(34.9 * DEG, ap, 0.01)[1] == pytest.approx(35 * DEG, abs=1e-15)


def test_slip_ratio_bounds_symmetric_and_oracle(vp):
    s = VehicleState.rolling(22.2, vp)
    lo, hi = slip_ratio_bounds(s, 0, 0.0, (-500.0, 500.0), vp, 0.01)
    assert lo == pytest.approx(-hi, abs=1e-15)
    assert hi == pytest.approx(0.055930930930930930931, rel=1e-12)


def test_slip_ratio_bounds_frozen_wheel(vp, ap):
    s = replace(VehicleState.rolling(22.2, vp), omega=(75.0, 74.0, 74.5, 74.5))
    f_x = 900.0
    T = f_x * vp.r
    frozen = replace(ap, T_rate=0.0)
    rng = torque_bounds(T, frozen, 0.01)
    lo, hi = slip_ratio_bounds(s, 0, f_x, rng, vp, 0.01)
    kappa = wheel_kinematics(s, [0.0] * 4, vp)[0][0]
    assert lo == pytest.approx(kappa, abs=1e-15) and hi == pytest.approx(kappa, abs=1e-15)


def test_slip_ratio_bounds_singularity(vp):
    with pytest.raises(KinematicSingularity):
        slip_ratio_bounds(VehicleState(v_x=0.05), 0, 0.0, (-1.0, 1.0), vp, 0.01)


def test_slip_angle_bounds_pair_reversed(vp):
    s = VehicleState.rolling(22.2, vp)
    lo, hi = slip_angle_bounds(s, 0, (-0.01, 0.02), vp)
    assert (lo, hi) == (-0.02, 0.01)


def test_zero_width_bounds_give_point(tp):
    env = polygon_vertices(SlipBounds(0, 0, 0, 0), F_Z, 1.0, tp)
    assert env.vertices == ((0.0, 0.0),)
    assert env.degenerate and len(env.equalities) == 2
    assert contains(env, (0.0, 0.0)) and not contains(env, (1.0, 0.0), tol=1e-3)


def test_segment_envelope(tp):
    env = polygon_vertices(SlipBounds(0.0, 0.01, 0.0, 0.0), F_Z, 1.0, tp)
    assert len(env.vertices) == 2 and len(env.equalities) == 1 and len(env.halfspaces) == 2
    mid = tuple(0.5 * (a + b) for a, b in zip(*env.vertices))
    assert contains(env, mid, tol=1e-9)


def test_category_a_has_eight_vertices_and_a1(tp):
    b = SlipBounds(-0.02, 0.02, -0.02, 0.02)
    env = polygon_vertices(b, F_Z, 1.0, tp)
    assert len(env.vertices) == 8
    assert env.rules[0] == "A1:zero-crossing"
    a1 = brush_force(0.0, 0.02, F_Z, 1.0, tp)
    assert a1 in env.vertices


def test_all_corners_saturated_lie_on_circle(tp):
    b = SlipBounds(-0.5, 0.5, -0.5, 0.5)
    pts = table_ii_points(b, F_Z, 1.0, tp)
    for alpha, kappa, rule in pts[1::2]:
        assert rule.endswith("saturated") or rule.endswith("replaced")
        f = brush_force(kappa, alpha, F_Z, 1.0, tp)
        assert math.hypot(*f) == pytest.approx(F_Z, rel=1e-6)


def test_saturation_replacement_hits_onset(tp):
    b = SlipBounds(-0.2, 0.2, -0.005, 0.005)  # slip angle alone does not saturate
    for alpha, kappa, rule in table_ii_points(b, F_Z, 1.0, tp)[1::2]:
        assert rule.endswith("saturation-replaced")
        assert slip_gamma(kappa, alpha, tp) == pytest.approx(3 * F_Z, rel=1e-6)
        assert slip_gamma(kappa, alpha, tp) <= 3 * F_Z


@given(slip_bounds(), st.floats(200.0, 9000.0), st.floats(0.3, 1.2))
def test_vertices_map_back_exactly(tp, b, f_z, mu):
    env = polygon_vertices(b, f_z, mu, tp)
    for v, (alpha, kappa) in zip(env.vertices, env.sources):
        assert brush_force(kappa, alpha, f_z, mu, tp) == v


@given(slip_bounds(), st.floats(200.0, 9000.0), st.floats(0.3, 1.2))
def test_adhesion_soundness(tp, b, f_z, mu):
    for env in (polygon_vertices(b, f_z, mu, tp), octagon_envelope(f_z, mu)):
        for v in env.vertices:
            assert math.hypot(*v) <= mu * f_z + 1e-9


@given(slip_bounds(), st.floats(200.0, 9000.0))
def test_polygon_is_ccw_convex_without_duplicates(tp, b, f_z):
    env = polygon_vertices(b, f_z, 1.0, tp)
    v = env.vertices
    assume(len(v) >= 3)
    for i in range(len(v)):
        o, a, c = v[i], v[(i + 1) % len(v)], v[(i + 2) % len(v)]
        assert (a[0] - o[0]) * (c[1] - o[1]) - (a[1] - o[1]) * (c[0] - o[0]) > 0
        assert math.hypot(a[0] - o[0], a[1] - o[1]) > 1.0
    for p in v:
        assert contains(env, p, tol=1e-6)


@given(slip_bounds(straddle=True), st.floats(200.0, 9000.0))
def test_origin_inside_straddling_envelopes(tp, b, f_z):
    env = polygon_vertices(b, f_z, 1.0, tp)
    assume(not env.degenerate)
    assert contains(env, (0.0, 0.0), tol=1e-6)


@given(slip_bounds(straddle=True, k_max=0.2, a_max=0.2, w_min=1e-3), st.floats(200.0, 9000.0))
def test_category_a_raw_vertices_in_convex_position(tp, b, f_z):
    pts = [brush_force(k, a, f_z, 1.0, tp) for a, k, _ in table_ii_points(b, f_z, 1.0, tp)]
    distinct = []
    for p in pts:
        if all(math.hypot(p[0] - q[0], p[1] - q[1]) > 1.0 for q in distinct):
            distinct.append(p)
    assume(len(distinct) >= 3)
    assert len(convex_hull(distinct)) == len(distinct)


@pytest.mark.xfail(strict=True, reason="an eight-vertex hull cuts chords across the saturated "
                   "arc, so a sub-box's corners can fall outside it (see the counterexample test)")
@given(slip_bounds(), st.floats(0, 1), st.floats(0, 1), st.floats(0, 1), st.floats(0, 1),
       st.floats(200.0, 9000.0))
def test_shrinking_bounds_shrink_polygon(tp, b2, u1, u2, u3, u4, f_z):
    k = sorted([b2.kappa_lo + u1 * (b2.kappa_hi - b2.kappa_lo),
                b2.kappa_lo + u2 * (b2.kappa_hi - b2.kappa_lo)])
    a = sorted([b2.alpha_lo + u3 * (b2.alpha_hi - b2.alpha_lo),
                b2.alpha_lo + u4 * (b2.alpha_hi - b2.alpha_lo)])
    outer = polygon_vertices(b2, f_z, 1.0, tp)
    inner = polygon_vertices(SlipBounds(k[0], k[1], a[0], a[1]), f_z, 1.0, tp)
    for v in inner.vertices:
        assert contains(outer, v, tol=1e-6)


def test_shrinking_bounds_counterexample(tp):
    # pure slip angle saturates; the outer polygon's chord from the kappa = 0 vertex
    # to the kappa_hi corner passes inside the inner box's corners
    f_z = 683.67
    outer = polygon_vertices(SlipBounds(-0.00434, 0.09465, -0.02977, -0.02916), f_z, 1.0, tp)
    inner = polygon_vertices(SlipBounds(0.01081, 0.04208, -0.02942, -0.02922), f_z, 1.0, tp)
    worst = max(violation(outer, v) for v in inner.vertices)
    assert worst > 0.1 * f_z


def test_simple_envelopes():
    R = F_Z
    c, o, e = circle_envelope(F_Z, 1.0), octagon_envelope(F_Z, 1.0), extremum_envelope(F_Z, 1.0)
    assert contains(c, (R, 0.0)) and not contains(c, (R, R))
    assert contains(e, (R, R))
    assert o.vertices[0] == (R, 0.0)
    assert len(o.vertices) == 8 and len(o.halfspaces) == 8
    for th in np.linspace(0, 2 * np.pi, 721):
        inner = R * math.cos(math.pi / 8) * (1 - 1e-12)
        assert contains(o, (inner * math.cos(th), inner * math.sin(th)))


def test_nesting_on_random_points():
    rng = np.random.default_rng(7)
    c, o, e = circle_envelope(F_Z, 1.0), octagon_envelope(F_Z, 1.0), extremum_envelope(F_Z, 1.0)
    pts = rng.uniform(-1.5 * F_Z, 1.5 * F_Z, (1000, 2))
    for p in pts:
        if contains(o, p):
            assert contains(c, p)
        if contains(c, p):
            assert contains(e, p)


def test_violation_measure():
    e = extremum_envelope(F_Z, 1.0)
    assert violation(e, (0.0, 0.0)) == 0.0
    assert violation(e, (F_Z + 10.0, 0.0)) == pytest.approx(10.0)
    assert violation(circle_envelope(F_Z, 1.0), (0.0, F_Z + 5.0)) == pytest.approx(5.0)


def test_build_envelope_dispatch(vp, tp, ap):
    s = VehicleState.rolling(22.2, vp)
    inp = EnvelopeInputs(3000.0, 1.0)
    assert build_envelope("none", s, 0, inp, vp, tp, ap, 0.01) is None
    for kind in ("extremum", "circle", "octagon", "polygon"):
        assert build_envelope(kind, s, 0, inp, vp, tp, ap, 0.01).kind == kind
    with pytest.raises(ValueError):
        build_envelope("hexagon", s, 0, inp, vp, tp, ap, 0.01)
    with pytest.raises(ValueError):
        SlipBounds(0.1, 0.0, 0.0, 0.0)


def test_rate_limits_off_widen_polygon(vp, tp, ap):
    s = VehicleState.rolling(22.2, vp)
    inp = EnvelopeInputs(3000.0, 1.0)
    tight = build_envelope("polygon", s, 0, inp, vp, tp, ap, 0.01, rate_limits=True)
    wide = build_envelope("polygon", s, 0, inp, vp, tp, ap, 0.01, rate_limits=False)
    assert max(abs(v[1]) for v in wide.vertices) > 2 * max(abs(v[1]) for v in tight.vertices)


def test_brute_force_containment_small_sample(tp):
    rng = np.random.default_rng(3)
    b = SlipBounds(-0.02, 0.02, -0.01, 0.01)
    env = polygon_vertices(b, F_Z, 1.0, tp)
    F = sample_attainable(b, F_Z, 1.0, tp.K_s, tp.K_alpha, 1000, rng)
    assert np.mean([contains(env, f, 0.02 * F_Z) for f in F]) >= 0.99
