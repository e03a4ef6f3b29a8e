"""Ground-truth 7-DOF double-track vehicle plant.

States are body-frame velocities, yaw rate, pose and four wheel speeds, with
roll and pitch following a first-order lag toward their quasi-static values.
Wheel order is fl, fr, rl, rr throughout; left wheels sit at +B/2.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

from . import actuators as act
from .params import IS_FRONT, SIDE, Config, VehicleParams
from .tire import brush_force, relaxation_step


class KinematicSingularity(ValueError):
    """Speeds too low for slip ratio / slip angle to be defined."""


class PlantDivergence(RuntimeError):
    """State left the sanity envelope (|v| > v_max or |omega_r| > omega_max)."""


@dataclass(frozen=True)
class VehicleState:
    v_x: float
    v_y: float = 0.0
    omega_r: float = 0.0
    phi: float = 0.0
    X: float = 0.0
    Y: float = 0.0
    omega: tuple[float, float, float, float] = (0.0, 0.0, 0.0, 0.0)
    theta: float = 0.0  # pitch, nose up positive
    gamma: float = 0.0  # roll, right side down positive
    a_x: float = 0.0
    a_y: float = 0.0
    a_z: float = 0.0  # heave acceleration of the sprung mass (0 on flat road)

    @classmethod
    def rolling(cls, v_x: float, params: VehicleParams, **kw) -> "VehicleState":
        """Straight-line state with free-rolling wheels."""
        w = v_x / params.r
        return cls(v_x=v_x, omega=(w, w, w, w), **kw)


@dataclass(frozen=True)
class TrackingErrors:
    e_vx: float
    e_phi: float
    e_y: float
    e_omega_r: float
    e_y_dot: float = 0.0
    k_ref: float = 0.0
    s: float = 0.0


def effectiveness_matrix(delta, params: VehicleParams) -> list[list[float]]:
    """3x8 map from tire-frame forces to (sum F_x, sum F_y, sum M_z)."""
    a, b, hb = params.a, params.b, 0.5 * params.B
    rows = ([], [], [])
    lever = (a, a, -b, -b)
    for w in range(4):
        c, s = math.cos(delta[w]), math.sin(delta[w])
        y = SIDE[w] * hb  # lateral position of the contact patch
        x = lever[w]
        # longitudinal tire force
        rows[0].append(c)
        rows[1].append(s)
        rows[2].append(x * s - y * c)
        # lateral tire force
        rows[0].append(-s)
        rows[1].append(c)
        rows[2].append(x * c + y * s)
    return [list(r) for r in rows]


def generalized_forces(f, delta, params: VehicleParams) -> tuple[float, float, float]:
    M = effectiveness_matrix(delta, params)
    return tuple(sum(M[i][j] * f[j] for j in range(8)) for i in range(3))


def resistance(v_x: float, params: VehicleParams) -> float:
    return params.m * params.g * params.f_roll + 0.5 * params.C_D * params.A_f * params.rho * v_x * v_x


def steady_roll(a_y: float, params: VehicleParams) -> float:
    """Quasi-static roll angle for lateral acceleration a_y."""
    return params.m_s * a_y * roll_arm(params) / (params.K_1_rad + params.K_2_rad)


def steady_pitch(a_x: float, params: VehicleParams) -> float:
    return params.m_s * a_x * sprung_cg_height(params) / params.K_pitch


def sprung_cg_height(params: VehicleParams) -> float:
    """Sprung-mass CG height consistent with total CG height h and unsprung masses at r."""
    m_u_total = params.m - params.m_s
    return (params.m * params.h - m_u_total * params.r) / params.m_s


def roll_arm(params: VehicleParams) -> float:
    return sprung_cg_height(params) - params.h_r


def _check_finite(*values):
    total = 0.0
    for v in values:
        total += sum(v) if isinstance(v, (tuple, list)) else v
    if not math.isfinite(total):
        raise ValueError("non-finite input to plant")


def step_dynamics(state: VehicleState, f, f_z, T, delta, dt: float, params: VehicleParams,
                  resistances: bool = True, v_max: float = 150.0,
                  omega_r_max: float = 10.0) -> VehicleState:
    """Advance one explicit Euler step of the chassis and wheel equations.

    f holds tire-frame forces [f_xfl, f_yfl, ..., f_yrr]; f_z is accepted for
    interface symmetry with the load model and only validated here.
    """
    _check_finite(f, f_z, T, delta, dt, state.v_x, state.v_y, state.omega_r)
    if not 0.0 < dt <= 0.002 + 1e-15:
        raise ValueError("dt must lie in (0, 2 ms]")
    p = params
    Fx, Fy, Mz = generalized_forces(f, delta, p)
    res = resistance(state.v_x, p) if resistances else 0.0
    m = p.m
    a_x = (Fx - res) / m
    a_y = Fy / m
    vx, vy, wr, phi = state.v_x, state.v_y, state.omega_r, state.phi
    dvx = a_x + wr * vy
    dvy = a_y - wr * vx
    dwr = Mz / p.I_z
    c, s = math.cos(phi), math.sin(phi)
    omega = tuple(state.omega[w] + dt * (T[w] - f[2 * w] * p.r) / p.I_w for w in range(4))
    eg = math.exp(-dt / p.roll_lag)
    ep = math.exp(-dt / p.pitch_lag)
    new = VehicleState(
        v_x=vx + dt * dvx,
        v_y=vy + dt * dvy,
        omega_r=wr + dt * dwr,
        phi=phi + dt * wr,
        X=state.X + dt * (vx * c - vy * s),
        Y=state.Y + dt * (vx * s + vy * c),
        omega=omega,
        theta=ep * state.theta + (1.0 - ep) * steady_pitch(a_x, p),
        gamma=eg * state.gamma + (1.0 - eg) * steady_roll(a_y, p),
        a_x=a_x,
        a_y=a_y,
        a_z=0.0,
    )
    if math.hypot(new.v_x, new.v_y) > v_max or abs(new.omega_r) > omega_r_max:
        raise PlantDivergence(f"state diverged: v=({new.v_x:.3g},{new.v_y:.3g}) "
                              f"omega_r={new.omega_r:.3g}")
    return new


def contact_kinematic_angle(state: VehicleState, wheel: int, params: VehicleParams) -> float:
    """Direction of the contact-patch velocity relative to the body x axis."""
    lever = params.a if IS_FRONT[wheel] else -params.b
    den = state.v_x - SIDE[wheel] * 0.5 * params.B * state.omega_r
    if abs(den) <= 0.05:
        raise KinematicSingularity(f"contact speed {den:.3g} m/s at wheel {wheel}")
    return math.atan((state.v_y + lever * state.omega_r) / den)


def wheel_kinematics(state: VehicleState, delta, params: VehicleParams):
    """Slip ratios (chassis v_x as reference speed) and slip angles per wheel."""
    if state.v_x <= 0.1:
        raise KinematicSingularity(f"v_x={state.v_x:.3g} m/s below 0.1 m/s")
    inv = 1.0 / abs(state.v_x)
    kappa = [(state.omega[w] * params.r - state.v_x) * inv for w in range(4)]
    alpha = [contact_kinematic_angle(state, w, params) - delta[w] for w in range(4)]
    return kappa, alpha


def tracking_errors(state: VehicleState, reference, v_xref: float | None = None) -> TrackingErrors:
    """Errors against a reference path (see reference.ReferencePath.project).

    e_y is the signed offset of the vehicle to the left of the path;
    e_phi = phi_ref - phi; e_omega_r = omega_r - v_xref k_ref / cos(e_phi).
    """
    proj = reference.project(state.X, state.Y)
    v_ref = reference.speed if v_xref is None else v_xref
    e_phi = _wrap(proj.heading - state.phi)
    if abs(e_phi) >= 0.5 * math.pi:
        raise ValueError("heading error beyond pi/2")
    e_y_dot = state.v_x * math.sin(-e_phi) + state.v_y * math.cos(e_phi)
    return TrackingErrors(
        e_vx=v_ref - state.v_x,
        e_phi=e_phi,
        e_y=proj.offset,
        e_omega_r=state.omega_r - v_ref * proj.curvature / math.cos(e_phi),
        e_y_dot=e_y_dot,
        k_ref=proj.curvature,
        s=proj.s,
    )


def _wrap(a: float) -> float:
    return (a + math.pi) % (2.0 * math.pi) - math.pi


def true_loads(state: VehicleState, params: VehicleParams) -> list[float]:
    """Ground-truth vertical loads from statics plus load transfer.

    Lateral transfer per axle goes through the roll centre, the unsprung
    masses, and the suspension roll moment. With the lagged roll model the
    suspension carries K*gamma + C*gamma_dot = K*gamma_ss, i.e. the roll moment
    transfers instantly while the roll angle itself lags.
    """
    p = params
    L, B, g, m = p.L, p.B, p.g, p.m
    gamma_ss = steady_roll(state.a_y, p)
    K1, K2 = p.K_1_rad, p.K_2_rad
    mu_ax = p.m_u_axle
    lat_f = (p.m_s * (p.b / L) * p.h_r * state.a_y + mu_ax * p.r * state.a_y + K1 * gamma_ss) / B
    lat_r = (p.m_s * (p.a / L) * p.h_r * state.a_y + mu_ax * p.r * state.a_y + K2 * gamma_ss) / B
    lon = m * state.a_x * p.h / (2.0 * L)
    sf = m * g * p.b / (2.0 * L)
    sr = m * g * p.a / (2.0 * L)
    loads = [sf - lon - lat_f, sf - lon + lat_f, sr + lon - lat_r, sr + lon + lat_r]
    return [max(0.0, f) for f in loads]


def suspension_jounce(state: VehicleState, params: VehicleParams) -> list[float]:
    """Per-wheel jounce (compression positive) from rigid-body roll and pitch."""
    hb = 0.5 * params.B
    lever = (-params.a, -params.a, params.b, params.b)
    return [-SIDE[w] * hb * state.gamma + lever[w] * state.theta for w in range(4)]


@dataclass
class PlantOutputs:
    kappa: list[float] = field(default_factory=lambda: [0.0] * 4)
    alpha: list[float] = field(default_factory=lambda: [0.0] * 4)
    delta: list[float] = field(default_factory=lambda: [0.0] * 4)
    f_z: list[float] = field(default_factory=lambda: [0.0] * 4)
    f: list[float] = field(default_factory=lambda: [0.0] * 8)
    jounce: list[float] = field(default_factory=lambda: [0.0] * 4)


class Plant:
    """Chassis, actuators, tire relaxation and bump steer advanced at dt_plant."""

    def __init__(self, cfg: Config, state: VehicleState, actuator_dynamics: bool = True,
                 toe_map=None):
        self.cfg = cfg
        self.state = state
        self.actuators = act.ActuatorState()
        self.actuator_dynamics = actuator_dynamics
        self.toe_map = toe_map
        self.f_dyn = [0.0] * 8
        self.out = PlantOutputs()
        self._measure()

    def _wheel_angles(self, jounce):
        d = self.actuators.delta
        if self.toe_map is None:
            return list(d)
        return [d[w] + self.toe_map.toe(w, jounce[w]) for w in range(4)]

    def _measure(self):
        p = self.cfg.vehicle
        jounce = suspension_jounce(self.state, p)
        delta = self._wheel_angles(jounce)
        kappa, alpha = wheel_kinematics(self.state, delta, p)
        o = self.out
        o.kappa, o.alpha, o.delta, o.jounce = kappa, alpha, delta, jounce
        o.f_z = true_loads(self.state, p)
        o.f = list(self.f_dyn)

    def step(self, inputs: act.ActuatorInputs, dt: float) -> VehicleState:
        cfg = self.cfg
        p, tp = cfg.vehicle, cfg.tire
        act.advance(self.actuators, inputs, cfg.actuators, dt, self.actuator_dynamics)
        jounce = self.out.jounce
        delta = self._wheel_angles(jounce)
        kappa, alpha = wheel_kinematics(self.state, delta, p)
        f_z = self.out.f_z
        f_dyn = self.f_dyn
        for w in range(4):
            k = max(kappa[w], -0.99)  # locked wheel slides at the saturated force
            fs = brush_force(k, alpha[w], f_z[w], p.mu, tp)
            f_dyn[2 * w], f_dyn[2 * w + 1] = relaxation_step(
                fs, (f_dyn[2 * w], f_dyn[2 * w + 1]), IS_FRONT[w], dt, tp)
        T = self.actuators.torque
        new = step_dynamics(self.state, f_dyn, f_z, T, delta, dt, p)
        if min(new.omega) < 0.0:
            new = replace(new, omega=tuple(max(0.0, w) for w in new.omega))
        self.state = new
        self._measure()
        return new
