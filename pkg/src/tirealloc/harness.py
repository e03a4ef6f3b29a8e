"""Closed-loop experiment runner, metrics, ablation matrix and file output.

One run wires the layers together: every control period the load estimator,
motion controller, envelope builder, allocator and wheel-command conversion
run once; the plant then advances at its own step with the commands held.
"""

from __future__ import annotations

import csv
import json
import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

from . import actuators as act
from .allocation import AllocationError, AllocationWeights, Allocator, ForceDemand
from .envelope import EnvelopeInputs, build_envelope, violation
from .load_estimation import estimate, estimation_error
from .motion_control import MotionController, MotionGains
from .params import WHEELS, Config
from .plant import (KinematicSingularity, Plant, PlantDivergence, VehicleState,
                    effectiveness_matrix, suspension_jounce, tracking_errors)
from .reference import ReferenceExhausted
from .scenarios import ScenarioConfig, reference_path
from .steering import SuspensionKinematics, wheel_commands
from .tire import TableRangeError, build_inverse_lateral

log = logging.getLogger(__name__)

LOAD_ESTIMATORS = ("st", "ltxy", "ltrpz", "true")
ALLOC_MODES = ("static", "dynamic")
CONSTRAINTS = ("extremum", "circle", "octagon", "polygon", "none")


@dataclass(frozen=True)
class AblationConfig:
    load_estimator: str = "true"
    allocation_mode: str = "static"
    constraint: str = "polygon"
    actuator_dynamics: bool = False
    rate_limits: bool = False
    bump_compensation: bool = True

    def __post_init__(self):
        if self.load_estimator not in LOAD_ESTIMATORS:
            raise ValueError(f"unknown load estimator {self.load_estimator!r}")
        if self.allocation_mode not in ALLOC_MODES:
            raise ValueError(f"unknown allocation mode {self.allocation_mode!r}")
        if self.constraint not in CONSTRAINTS:
            raise ValueError(f"unknown constraint {self.constraint!r}")
        if self.constraint == "none" and self.rate_limits:
            raise ValueError("the unconstrained allocation is only valid with rate limits off")

    @property
    def label(self) -> str:
        return (f"{self.load_estimator}-{self.allocation_mode}-{self.constraint}"
                f"-dyn{int(self.actuator_dynamics)}-rate{int(self.rate_limits)}"
                f"-bump{int(self.bump_compensation)}")


BASELINE = AblationConfig()

# combined-factor presets: all factors, then one or more factors degraded
PRESETS = {
    "1": AblationConfig("ltrpz", "dynamic", "polygon", True, True, True),
    "2": AblationConfig("ltrpz", "dynamic", "polygon", True, True, False),
    "3": AblationConfig("ltxy", "dynamic", "polygon", True, True, True),
    "4": AblationConfig("ltxy", "dynamic", "octagon", True, True, False),
}

SERIES_COLUMNS = (
    ["t", "X", "Y", "v_x", "v_y", "omega_r", "e_y", "e_omega_r"]
    + [f"{q}_{w}" for q in ("kappa", "alpha", "delta", "T", "f_x", "f_y", "f_z", "f_z_hat")
       for w in WHEELS]
    + ["F_x_dem", "F_y_dem", "M_z_dem"]
    + [f"{q}_alloc_{w}" for w in WHEELS for q in ("f_x", "f_y")]
    + ["active_set_size", "phi", "omega_ref"]
)
_COL = {name: i for i, name in enumerate(SERIES_COLUMNS)}


@dataclass
class RunMetrics:
    max_abs_e_y: float
    mean_abs_e_y: float
    yaw_settling_time: float | None
    yaw_steady_error_pct: float | None
    load_est_error_pct: float
    fy_exec_error: list[float]
    fy_exec_error_steady: list[float] | None
    kkt_max: float = 0.0
    solver_fallbacks: int = 0
    envelope_violation_alloc: float = 0.0
    envelope_violation_realized: float = 0.0
    polygon_excursion_max: float | None = None
    polygon_excursions: int | None = None
    solver_time_mean_ms: float | None = None
    solver_time_max_ms: float | None = None
    failure: str | None = None

    @property
    def failed(self) -> bool:
        return self.failure is not None


@dataclass
class RunResult:
    scenario: ScenarioConfig
    ablation: AblationConfig
    metrics: RunMetrics
    series: np.ndarray  # rows x len(SERIES_COLUMNS)
    envelope_snapshots: list = field(default_factory=list)

    def column(self, name: str) -> np.ndarray:
        return self.series[:, _COL[name]]


_TABLE_CACHE: dict = {}


def _inverse_table(cfg: Config, mu: float):
    key = (cfg.tire, mu, cfg.vehicle.m, cfg.vehicle.g, cfg.control.load_floor)
    if key not in _TABLE_CACHE:
        hi = cfg.vehicle.m * cfg.vehicle.g
        _TABLE_CACHE[key] = build_inverse_lateral(cfg.tire, mu, (cfg.control.load_floor, hi))
    return _TABLE_CACHE[key]


def _initial_state(cfg: Config, v: float) -> VehicleState:
    return VehicleState.rolling(v, cfg.vehicle)


def run(scenario: ScenarioConfig, ablation: AblationConfig, cfg: Config | None = None,
        seed: int = 0, *, polygon_diagnostics: bool = False, timing: bool = False,
        envelope_every: int | None = None) -> RunResult:
    """Simulate one scenario under one ablation; failures are returned as data."""
    cfg = cfg or Config()
    vp, tp, ap, cp = cfg.vehicle, cfg.tire, cfg.actuators, cfg.control
    if vp.mu != scenario.mu:
        vp = replace(vp, mu=scenario.mu)
        cfg = replace(cfg, vehicle=vp)
    mu = scenario.mu
    rng = np.random.default_rng(seed)
    path = reference_path(scenario)
    table = _inverse_table(cfg, mu)
    kin = SuspensionKinematics.linear(cfg.suspension.toe_coeff)
    plant = Plant(cfg, _initial_state(cfg, scenario.speed), ablation.actuator_dynamics,
                  kin if cfg.suspension.plant_bump_steer else None)
    controller = MotionController(MotionGains.from_control(cp), vp)
    weights = AllocationWeights(cp.k_gamma, cp.k_d, mu * vp.m * vp.g / 4.0, 0.5 * vp.B)
    allocator = Allocator(weights, ablation.allocation_mode, mu)
    deadbeat = ablation.allocation_mode == "dynamic" and ablation.actuator_dynamics

    dt, dtc, sub = cp.dt_plant, cp.dt_control, cp.substeps
    n_steps = int(round(scenario.total_time / dt))
    rows = np.full((n_steps + 1, len(SERIES_COLUMNS)), np.nan)

    f_z_hat = [1.0] * 4
    demand = ForceDemand(0.0, 0.0, 0.0)
    f_alloc = np.zeros(8)
    active_size = 0
    inputs = act.ActuatorInputs([0.0] * 4, [0.0] * 4, [0.0] * 4)
    envelopes = [None] * 4
    kkt_max, viol_alloc, viol_real = 0.0, 0.0, 0.0
    poly_exc, poly_n = (0.0, 0) if polygon_diagnostics else (None, None)
    solve_times = []
    snapshots = []
    failure = None
    v_ref = path.speed

    for k in range(n_steps + 1):
        t = k * dt
        state = plant.state
        try:
            err = tracking_errors(state, path, v_ref)
        except (ReferenceExhausted, ValueError) as exc:
            failure = f"tracking: {exc}"
            rows = rows[:k]
            break
        if k % sub == 0 and k < n_steps:
            try:
                if envelopes[0] is not None:
                    # forces realized over the last period against the envelope predicted for it
                    for w in range(4):
                        fr = (plant.out.f[2 * w], plant.out.f[2 * w + 1])
                        viol_real = max(viol_real, violation(envelopes[w], fr) / (mu * f_z_hat[w]))
                f_z_hat, demand, f_alloc, active_size, envelopes, inputs, info = _control_tick(
                    plant, err, ablation, cfg, mu, controller, allocator, table, kin, rng,
                    scenario.sensor_noise, dtc, deadbeat, polygon_diagnostics, timing)
            except (AllocationError, TableRangeError, KinematicSingularity, ValueError) as exc:
                failure = f"control: {type(exc).__name__}: {exc}"
                rows = rows[:k]
                break
            kkt_max = max(kkt_max, info["kkt"])
            viol_alloc = max(viol_alloc, info["violation"])
            if polygon_diagnostics:
                poly_exc = max(poly_exc, info["poly_excursion"])
                poly_n += int(info["poly_excursion"] > 1e-3)
            if timing:
                solve_times.append(info["solve_time"])
            if envelope_every and (k // sub) % envelope_every == 0:
                snapshots.append((t, list(envelopes), f_alloc.copy()))
        _record(rows[k], t, state, err, plant, f_z_hat, demand, f_alloc, active_size)
        if k == n_steps:
            break
        try:
            plant.step(inputs, dt)
        except (PlantDivergence, KinematicSingularity, ValueError) as exc:
            failure = f"plant: {type(exc).__name__}: {exc}"
            rows = rows[:k + 1]
            break

    metrics = compute_metrics(rows, scenario, cp.load_metric)
    metrics.kkt_max = kkt_max
    metrics.solver_fallbacks = allocator.failures
    metrics.envelope_violation_alloc = viol_alloc
    metrics.envelope_violation_realized = viol_real
    metrics.polygon_excursion_max = poly_exc
    metrics.polygon_excursions = poly_n
    metrics.failure = failure
    if timing and solve_times:
        metrics.solver_time_mean_ms = 1e3 * float(np.mean(solve_times))
        metrics.solver_time_max_ms = 1e3 * float(np.max(solve_times))
    return RunResult(scenario, ablation, metrics, rows, snapshots)


def _control_tick(plant, err, ablation, cfg, mu, controller, allocator, table, kin, rng,
                  noise, dtc, deadbeat, polygon_diagnostics, timing):
    vp, tp, ap, cp = cfg.vehicle, cfg.tire, cfg.actuators, cfg.control
    state = plant.state
    a_x, a_y = state.a_x, state.a_y
    if noise > 0:
        a_x += noise * rng.standard_normal()
        a_y += noise * rng.standard_normal()
    est = estimate(ablation.load_estimator, vp, a_x=a_x, a_y=a_y, a_z=vp.g + state.a_z,
                   theta=state.theta, gamma=state.gamma, f_z_true=plant.out.f_z,
                   unsprung_printed=cp.ltrpz_unsprung_printed)
    f_z_hat = list(est.clamped(cp.load_floor).f_z_hat)

    F_x, F_y, M_z = controller.demand(err, state.v_x, state.omega_r, dtc)
    demand = ForceDemand(F_x, F_y, M_z)

    acts = plant.actuators
    jounce = suspension_jounce(state, vp)
    toe = [kin.toe(w, jounce[w]) if ablation.bump_compensation else 0.0 for w in range(4)]
    wheel_angle = [acts.delta[w] + toe[w] for w in range(4)]
    f_prev = allocator.f_prev
    envelopes = []
    for w in range(4):
        inp = EnvelopeInputs(f_z_hat[w], mu, acts.torque[w], acts.delta[w], float(f_prev[2 * w]),
                             toe[w])
        envelopes.append(build_envelope(ablation.constraint, state, w, inp, vp, tp, ap, dtc,
                                        ablation.rate_limits))
    M_f = effectiveness_matrix(wheel_angle, vp)
    bw = act.channel_bandwidths(f_prev, ap, tp)
    t0 = time.perf_counter() if timing else 0.0
    res = allocator.allocate(demand, M_f, f_z_hat, envelopes, bw)
    solve_time = time.perf_counter() - t0 if timing else 0.0
    f = res.f

    info = {"kkt": 0.0 if res.fallback else res.kkt_max, "solve_time": solve_time,
            "violation": 0.0, "poly_excursion": 0.0}
    for w in range(4):
        if envelopes[w] is not None:
            v = violation(envelopes[w], (f[2 * w], f[2 * w + 1])) / (mu * f_z_hat[w])
            info["violation"] = max(info["violation"], v)
    if polygon_diagnostics:
        for w in range(4):
            inp = EnvelopeInputs(f_z_hat[w], mu, acts.torque[w], acts.delta[w],
                                 float(f_prev[2 * w]), toe[w])
            poly = build_envelope("polygon", state, w, inp, vp, tp, ap, dtc, ablation.rate_limits)
            info["poly_excursion"] = max(info["poly_excursion"],
                                         violation(poly, (f[2 * w], f[2 * w + 1])) / (mu * f_z_hat[w]))

    # wheel commands
    tire = tp if cp.combined_slip_steer else None
    T_cmd, d_cmd = wheel_commands(f, f_z_hat, state, table, vp,
                                  kin if ablation.bump_compensation else None, jounce, tire)
    inputs = _actuator_inputs(T_cmd, d_cmd, acts, ap, dtc, ablation.rate_limits, deadbeat)
    acts.T_cmd, acts.delta_cmd = T_cmd, d_cmd
    return f_z_hat, demand, np.array(f), len(res.active), envelopes, inputs, info


def _actuator_inputs(T_cmd, d_cmd, acts, ap, dtc, rate_limits, deadbeat) -> act.ActuatorInputs:
    """Rate/magnitude limits on the commands, then optional deadbeat shaping."""
    drive, brake, steer = [], [], []
    for w in range(4):
        T_lo, T_hi = act.rate_window(acts.torque[w], "torque", ap, dtc, rate_limits)
        d_lo, d_hi = act.rate_window(acts.delta[w], "steer", ap, dtc, rate_limits)
        T = min(max(T_cmd[w], T_lo), T_hi)
        d = min(max(d_cmd[w], d_lo), d_hi)
        dr, br = act.split_torque(T)
        if deadbeat:
            dr = act.deadbeat_compensate(dr, acts.T_drive[w], ap.tau_d, dtc)
            br = act.deadbeat_compensate(br, acts.T_brake[w], ap.tau_b, dtc)
            d = act.deadbeat_compensate(d, acts.delta[w], ap.tau_s, dtc)
        drive.append(min(max(dr, 0.0), ap.T_max))
        brake.append(min(max(br, 0.0), -ap.T_min))
        steer.append(min(max(d, ap.delta_min), ap.delta_max))
    return act.ActuatorInputs(drive, brake, steer)


def _record(row, t, state, err, plant, f_z_hat, demand, f_alloc, active_size):
    o = plant.out
    T = plant.actuators.torque
    vals = [t, state.X, state.Y, state.v_x, state.v_y, state.omega_r, err.e_y, err.e_omega_r]
    vals += o.kappa + o.alpha + o.delta + list(T)
    vals += [o.f[2 * w] for w in range(4)] + [o.f[2 * w + 1] for w in range(4)]
    vals += list(o.f_z) + list(f_z_hat)
    vals += [demand.F_x, demand.F_y, demand.M_z] + list(f_alloc) + [active_size]
    vals += [state.phi, state.omega_r - err.e_omega_r]
    row[:] = vals


# ---------------------------------------------------------------- metrics

def _window(t, lo, hi):
    return (t >= lo - 1e-9) & (t <= hi + 1e-9)


def compute_metrics(series: np.ndarray, scenario: ScenarioConfig, load_metric: str = "mean") -> RunMetrics:
    """Metrics that depend only on the recorded series (so CSVs reproduce them)."""
    if len(series) == 0:
        nan = float("nan")
        return RunMetrics(nan, nan, None, None, nan, [nan] * 4, None)
    col = lambda name: series[:, _COL[name]]  # noqa: E731
    t = col("t")
    lo, hi = scenario.active_window
    m = _window(t, lo, hi)
    if not m.any():
        m = np.ones_like(t, dtype=bool)
    e_y = np.abs(col("e_y")[m])
    fz = np.column_stack([col(f"f_z_{w}") for w in WHEELS])[m]
    fzh = np.column_stack([col(f"f_z_hat_{w}") for w in WHEELS])[m]
    load_err = estimation_error(fzh, fz, load_metric) if np.all(fz > 0) else float("nan")
    fy_err = [float(np.mean(np.abs(col(f"f_y_{w}") - col(f"f_y_alloc_{w}"))[m])) for w in WHEELS]
    settle = steady = None
    fy_steady = None
    target = scenario.target_yaw_rate
    if target is not None:
        settle, steady = _yaw_settling(t, col("omega_r"), target, scenario.get("step_time"))
    sw = scenario.steady_window
    if sw is not None:
        ms = _window(t, *sw)
        if ms.any():
            fy_steady = [float(np.mean(np.abs(col(f"f_y_{w}") - col(f"f_y_alloc_{w}"))[ms]))
                         for w in WHEELS]
    return RunMetrics(
        max_abs_e_y=float(e_y.max()), mean_abs_e_y=float(e_y.mean()),
        yaw_settling_time=settle, yaw_steady_error_pct=steady,
        load_est_error_pct=float(load_err), fy_exec_error=fy_err,
        fy_exec_error_steady=fy_steady)


def _yaw_settling(t, omega_r, target, step_time, band=0.05):
    """Time after the step until yaw rate stays within the band; steady error in %."""
    after = t >= step_time - 1e-9
    if not after.any():
        return None, None
    tt, w = t[after], omega_r[after]
    outside = np.abs(w - target) > band * abs(target)
    tail = tt >= tt[-1] - 0.5
    steady = float(100.0 * np.max(np.abs(w[tail] - target)) / abs(target))
    if not outside.any():
        return 0.0, steady
    last = int(np.flatnonzero(outside)[-1])
    if last == len(tt) - 1:
        return None, steady
    return float(tt[last + 1] - step_time), steady


# ---------------------------------------------------------------- output

def _fmt(v) -> str:
    return format(float(v), ".17g")


def write_series_csv(path, series: np.ndarray) -> None:
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(SERIES_COLUMNS)
        for row in series:
            wr.writerow([_fmt(v) for v in row])


def read_series_csv(path) -> np.ndarray:
    with open(path, newline="") as fh:
        rd = csv.reader(fh)
        header = next(rd)
        if header != SERIES_COLUMNS:
            raise ValueError("series CSV header does not match the schema")
        data = [[float(v) for v in row] for row in rd]
    return np.array(data, dtype=float).reshape(-1, len(SERIES_COLUMNS))


def metrics_dict(result: RunResult) -> dict:
    return {
        "scenario": {"name": result.scenario.name, "speed": result.scenario.speed,
                     "mu": result.scenario.mu, "duration": result.scenario.total_time,
                     "params": dict(result.scenario.params)},
        "ablation": asdict(result.ablation),
        "metrics": _jsonable(asdict(result.metrics)),
    }


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, float) and not math.isfinite(obj):
        return None
    return obj


def write_outputs(result: RunResult, out_dir, stem: str = "run", svg: bool = True) -> dict:
    """Write series CSV, metrics JSON and figures; returns the written paths."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {"series": out / f"{stem}.csv", "metrics": out / f"{stem}_metrics.json"}
    write_series_csv(paths["series"], result.series)
    with open(paths["metrics"], "w") as fh:
        json.dump(metrics_dict(result), fh, indent=2, sort_keys=True)
        fh.write("\n")
    if svg and len(result.series):
        from .plotting import plot_envelope_snapshots, plot_run
        paths["figure"] = plot_run(result, out / f"{stem}.svg")
        if result.envelope_snapshots:
            paths["envelopes"] = plot_envelope_snapshots(result.envelope_snapshots,
                                                         out / f"{stem}_envelopes")
    return paths


# ---------------------------------------------------------------- ablation matrix

def _run_job(job):
    scenario, ablation, cfg = job
    return run(scenario, ablation, cfg)


def ablation_matrix(scenarios, ablations, cfg: Config | None = None, workers: int = 1) -> list[RunResult]:
    """Run the cross product; individual failures are kept as failure records."""
    jobs = [(s, a, cfg) for s in scenarios for a in ablations]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(_run_job, jobs))
    return [_run_job(j) for j in jobs]


REPORT_METRICS = ("max_abs_e_y", "mean_abs_e_y", "yaw_settling_time", "load_est_error_pct",
                  "fy_exec_error_mean", "kkt_max", "failure")


def report_rows(results) -> list[dict]:
    rows = []
    for r in results:
        m = r.metrics
        rows.append({
            "scenario": r.scenario.name, "ablation": r.ablation.label,
            "max_abs_e_y": m.max_abs_e_y, "mean_abs_e_y": m.mean_abs_e_y,
            "yaw_settling_time": m.yaw_settling_time, "load_est_error_pct": m.load_est_error_pct,
            "fy_exec_error_mean": float(np.mean(m.fy_exec_error)), "kkt_max": m.kkt_max,
            "failure": m.failure or "",
        })
    return rows


def write_report(results, path) -> None:
    rows = report_rows(results)
    with open(path, "w", newline="") as fh:
        wr = csv.DictWriter(fh, fieldnames=["scenario", "ablation", *REPORT_METRICS],
                            lineterminator="\n")
        wr.writeheader()
        for row in rows:
            wr.writerow({k: (_fmt(v) if isinstance(v, float) else ("" if v is None else v))
                         for k, v in row.items()})


__all__ = ["AblationConfig", "BASELINE", "PRESETS", "RunMetrics", "RunResult", "SERIES_COLUMNS",
           "ablation_matrix", "compute_metrics", "read_series_csv", "run", "write_outputs",
           "write_report"]
