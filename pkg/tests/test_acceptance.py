"""Acceptance criteria C1..C11, each timed against its budget.

Every test records one PASS/FAIL line in conftest.ACCEPTANCE, printed in the
terminal summary, and also prints it directly (visible with -s).
"""

import math
import time

import numpy as np
import pytest

import conftest
from oracles import allocation_oracle, sample_attainable
from problems import random_problem
from tirealloc.actuators import deadbeat_compensate, first_order_step
from tirealloc.allocation import solve_active_set
from tirealloc.envelope import (SlipBounds, circle_envelope, contains, extremum_envelope,
                                octagon_envelope, polygon_vertices, slip_angle_bounds,
                                slip_ratio_bounds, steer_bounds, torque_bounds)
from tirealloc.harness import BASELINE, PRESETS, AblationConfig, compute_metrics, read_series_csv, run, write_outputs
from tirealloc.load_estimation import estimate_ltrpz, estimate_ltxy, estimate_st
from tirealloc.params import DEG
from tirealloc.plant import VehicleState, true_loads
from tirealloc.scenarios import SCENARIOS, ScenarioConfig
from tirealloc.tire import brush_force, slip_gamma


def _report(cid, ok, detail, elapsed, budget):
    in_time = budget is None or elapsed < budget
    line = detail + (f" [{elapsed:.1f} s" + (f" / {budget} s]" if budget else "]"))
    conftest.ACCEPTANCE[cid] = (ok and in_time, line)
    print(f"{cid} {'PASS' if ok and in_time else 'FAIL'}  {line}")
    assert ok, f"{cid}: {detail}"
    assert in_time, f"{cid}: runtime {elapsed:.1f} s over {budget} s"


def test_c1_deadbeat_identity(ap):
    t0 = time.perf_counter()
    rng = np.random.default_rng(101)
    n = 100_000
    # draws span the actuator magnitudes: torque (N m) for half, steer angle (rad) for half
    scale = np.where(np.arange(n) < n // 2, ap.T_max, ap.delta_max)
    u_o = (rng.uniform(-1, 1, n) * scale).tolist()
    u_cmd = (rng.uniform(-1, 1, n) * scale).tolist()
    tau = rng.uniform(1e-3, 1.0, n).tolist()
    dt = rng.uniform(1e-3, 0.05, n).tolist()
    worst = 0.0
    for uo, uc, ta, h in zip(u_o, u_cmd, tau, dt):
        worst = max(worst, abs(first_order_step(uo, deadbeat_compensate(uc, uo, ta, h), ta, h) - uc))
    _report("C1", worst <= 1e-12, f"max |error| {worst:.2e} over 1e5 draws",
            time.perf_counter() - t0, 1)


def test_c2_brush_soundness(tp):
    t0 = time.perf_counter()
    f_z, mu = 3000.0, 1.0
    worst = -math.inf
    for k in np.linspace(-0.9, 0.9, 200).tolist():
        for a in np.linspace(-0.5, 0.5, 200).tolist():
            f_x, f_y = brush_force(k, a, f_z, mu, tp)
            worst = max(worst, math.hypot(f_x, f_y) - mu * f_z)
    # both branches meet at gamma_t = 3 mu f_z, along several slip directions
    jump = 0.0
    for th in np.linspace(0.05, 1.5, 12).tolist():
        # K_s kappa/(1+kappa) = 3 mu f_z cos(th), K_alpha tan(alpha)/(1+kappa) = 3 mu f_z sin(th)
        q = 3 * mu * f_z * math.cos(th) / tp.K_s
        k_sw = q / (1 - q)
        a_sw = math.atan(3 * mu * f_z * math.sin(th) * (1 + k_sw) / tp.K_alpha)
        assert slip_gamma(k_sw, a_sw, tp) == pytest.approx(3 * mu * f_z, rel=1e-12)
        lo = brush_force(k_sw * (1 - 1e-13), a_sw * (1 - 1e-13), f_z, mu, tp)
        hi = brush_force(k_sw * (1 + 1e-13), a_sw * (1 + 1e-13), f_z, mu, tp)
        jump = max(jump, math.hypot(hi[0] - lo[0], hi[1] - lo[1]) / (mu * f_z))
    ok = worst <= 1e-9 and jump <= 1e-9
    _report("C2", ok, f"max excess over mu f_z {worst:.2e} N; branch jump {jump:.1e} rel",
            time.perf_counter() - t0, 1)


def test_c3_envelope_correctness(vp, tp, ap):
    t0 = time.perf_counter()
    rng = np.random.default_rng(3)
    # category (a) bounds from one control period at 80 km/h, straight, T = 0, delta = 0
    state = VehicleState.rolling(22.2, vp)
    f_z, dt = vp.m * vp.g / 4, 0.01
    kl, kh = slip_ratio_bounds(state, 0, 0.0, torque_bounds(0.0, ap, dt), vp, dt)
    al, ah = slip_angle_bounds(state, 0, steer_bounds(0.0, ap, dt), vp)
    b = SlipBounds(kl, kh, al, ah)
    env = polygon_vertices(b, f_z, 1.0, tp)
    exact = all(brush_force(k, a, f_z, 1.0, tp) == v for v, (a, k) in zip(env.vertices, env.sources))
    # the same identity over many random bound sets
    for _ in range(200):
        k = np.sort(rng.uniform(-0.2, 0.2, 2))
        a = np.sort(rng.uniform(-0.2, 0.2, 2))
        fz = rng.uniform(300, 8000)
        e = polygon_vertices(SlipBounds(k[0], k[1], a[0], a[1]), fz, 1.0, tp)
        exact &= all(brush_force(kk, aa, fz, 1.0, tp) == v for v, (aa, kk) in zip(e.vertices, e.sources))
    forces = sample_attainable(b, f_z, 1.0, tp.K_s, tp.K_alpha, 10_000, rng)
    frac = float(np.mean([contains(env, f, 0.02 * f_z) for f in forces]))
    nested = True
    o, c, x = octagon_envelope(f_z, 1.0), circle_envelope(f_z, 1.0), extremum_envelope(f_z, 1.0)
    for p in rng.uniform(-1.5 * f_z, 1.5 * f_z, (1000, 2)):
        nested &= (not contains(o, p) or contains(c, p)) and (not contains(c, p) or contains(x, p))
    ok = exact and frac >= 0.99 and nested and len(env.vertices) == 8
    _report("C3", ok, f"vertices exact={exact}; containment {100 * frac:.2f} % "
            f"(kappa [{kl:.4f}, {kh:.4f}], alpha +-{ah / DEG:.2f} deg); nesting={nested}",
            time.perf_counter() - t0, 5)


def test_c4_qp_correctness(vp, tp):
    t0 = time.perf_counter()
    rng = np.random.default_rng(11)
    worst_rel, worst_kkt = 0.0, 0.0
    for i in range(50):
        p = random_problem(rng, vp, tp, "dynamic" if i % 2 else "static")
        assert len(p.linear_constraints()[0]) <= 32
        r = solve_active_set(p)
        _, J = allocation_oracle(p)
        worst_rel = max(worst_rel, abs(r.objective - J) / max(abs(J), 1e-12))
        worst_kkt = max(worst_kkt, r.kkt_max)
    # every accepted solve in full scenario runs
    runs = [(ScenarioConfig("dlc"), PRESETS["1"]), (ScenarioConfig("slalom"), BASELINE),
            (ScenarioConfig("step_yaw"), AblationConfig("ltxy", "dynamic", "octagon", True, True, True))]
    run_kkt = 0.0
    for sc, ab in runs:
        m = run(sc, ab).metrics
        assert m.failure is None
        run_kkt = max(run_kkt, m.kkt_max)
    ok = worst_rel <= 1e-6 and worst_kkt <= 1e-8 and run_kkt <= 1e-8
    _report("C4", ok, f"oracle rel objective gap {worst_rel:.1e}; random KKT {worst_kkt:.1e}; "
            f"scenario KKT {run_kkt:.1e}", time.perf_counter() - t0, None)


def test_c5_load_estimators(vp):
    t0 = time.perf_counter()
    rng = np.random.default_rng(5)
    w = vp.m * vp.g
    cons = 0.0
    for a_x, a_y in rng.uniform(-10, 10, (1000, 2)).tolist():
        cons = max(cons, abs(estimate_st(vp).total - w) / w, abs(estimate_ltxy(a_x, a_y, vp).total - w) / w)
    st_ = np.array(estimate_st(vp).f_z_hat)
    static = max(np.max(np.abs(np.array(f) - st_) / st_) for f in (
        estimate_ltxy(0.0, 0.0, vp).f_z_hat, estimate_ltrpz(0.0, 0.0, vp.g, 0.0, 0.0, vp).f_z_hat,
        true_loads(VehicleState.rolling(20.0, vp), vp)))
    order_ok, parts = True, []
    for name in SCENARIOS:
        errs = []
        for est in ("st", "ltxy", "ltrpz"):
            m = run(ScenarioConfig(name), AblationConfig(load_estimator=est)).metrics
            errs.append(math.inf if m.failure else m.load_est_error_pct)
        order_ok &= errs[0] > errs[1] > errs[2]
        parts.append(f"{name} " + "/".join(f"{e:.2f}" for e in errs))
    ok = cons <= 1e-9 and static <= 1e-12 and order_ok
    _report("C5", ok, f"sum rel err {cons:.1e}; static agreement {static:.1e}; ST/LTXY/LTRPZ % "
            + "; ".join(parts), time.perf_counter() - t0, 60)


def test_c6_actuator_dynamics_ablation():
    t0 = time.perf_counter()
    sc = ScenarioConfig("slalom")
    naive = run(sc, AblationConfig("true", "static", "polygon", True, False, True)).metrics
    aware = run(sc, AblationConfig("true", "dynamic", "polygon", True, False, True)).metrics
    e_n = math.inf if naive.failure else naive.mean_abs_e_y
    e_a = math.inf if aware.failure else aware.mean_abs_e_y
    ratio = e_n / e_a
    _report("C6", ratio >= 2.0, f"mean |e_y| static {e_n:.4f} m vs dynamic+deadbeat {e_a:.4f} m "
            f"(ratio {ratio:.1f})", time.perf_counter() - t0, 30)


def test_c7_constraint_ablation():
    t0 = time.perf_counter()
    sc = ScenarioConfig("dlc")
    errs, res = [], {}
    for c in ("extremum", "circle", "octagon", "polygon"):
        m = run(sc, AblationConfig("ltrpz", "dynamic", c, True, True, True),
                polygon_diagnostics=(c == "extremum")).metrics
        res[c] = m
        errs.append(math.inf if m.failure else m.max_abs_e_y)
    mono = all(errs[i] >= errs[i + 1] for i in range(3))
    poly = res["polygon"]
    member = poly.failure is None and poly.envelope_violation_alloc <= 1e-3
    excursions = res["extremum"].polygon_excursions or 0
    ok = mono and member and excursions > 0
    _report("C7", ok, "max |e_y| ext/circ/oct/poly " + "/".join(f"{e:.3f}" for e in errs)
            + f" m; polygon membership {poly.envelope_violation_alloc:.1e} mu f_z "
            f"(realized forces {poly.envelope_violation_realized:.3f}); extremum outside polygon "
            f"{excursions} ticks", time.perf_counter() - t0, 30)


def test_c8_bump_steer_ablation():
    t0 = time.perf_counter()
    sc = ScenarioConfig("step_yaw")
    on = run(sc, AblationConfig(bump_compensation=True)).metrics
    off = run(sc, AblationConfig(bump_compensation=False)).metrics
    e_on = float(np.mean(on.fy_exec_error_steady))
    e_off = float(np.mean(off.fy_exec_error_steady))
    ratio = e_off / e_on
    ok = on.failure is None and off.failure is None and ratio >= 10.0
    _report("C8", ok, f"steady mean per-wheel f_y error off {e_off:.1f} N vs on {e_on:.2f} N "
            f"(ratio {ratio:.0f})", time.perf_counter() - t0, 15)


def test_c9_combined_presets():
    t0 = time.perf_counter()
    sc = ScenarioConfig("dlc")
    e = {}
    for k in ("1", "2", "4"):
        m = run(sc, PRESETS[k]).metrics
        e[k] = math.inf if m.failure else m.max_abs_e_y
    ok = e["4"] > e["1"] and e["2"] > e["1"]
    _report("C9", ok, f"DLC max |e_y| preset1 {e['1']:.3f} m, preset2 {e['2']:.3f} m, "
            f"preset4 {e['4']:.3f} m", time.perf_counter() - t0, 30)


def test_c10_step_yaw_regulation():
    t0 = time.perf_counter()
    r = run(ScenarioConfig("step_yaw"), BASELINE)
    m = r.metrics
    target = 22 * DEG
    t, w = r.column("t"), r.column("omega_r")
    held = bool(np.all(np.abs(w[t >= 4.0] - target) <= 0.05 * target))
    ok = m.failure is None and m.yaw_settling_time is not None and m.yaw_settling_time <= 3.0 and held
    _report("C10", ok, f"settles in {m.yaw_settling_time} s after the step; steady error "
            f"{m.yaw_steady_error_pct:.2f} %", time.perf_counter() - t0, 15)


def test_c11_determinism_and_schema(tmp_path):
    t0 = time.perf_counter()
    sc = ScenarioConfig("slalom", duration=3.0)
    ab = PRESETS["1"]
    a = write_outputs(run(sc, ab), tmp_path / "a", stem="x")
    r = run(sc, ab)
    b = write_outputs(r, tmp_path / "b", stem="x")
    same = all(a[k].read_bytes() == b[k].read_bytes() for k in ("series", "metrics", "figure"))
    m2 = compute_metrics(read_series_csv(b["series"]), sc)
    m1 = r.metrics
    gaps = [abs(getattr(m1, n) - getattr(m2, n)) for n in ("max_abs_e_y", "mean_abs_e_y", "load_est_error_pct")]
    gaps += list(np.abs(np.array(m1.fy_exec_error) - np.array(m2.fy_exec_error)))
    ok = same and max(gaps) <= 1e-9
    _report("C11", ok, f"byte-identical={same}; metric round-trip gap {max(gaps):.1e}",
            time.perf_counter() - t0, None)
