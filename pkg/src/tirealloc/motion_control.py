"""Upper-layer motion controllers producing the total force and moment demand.

Longitudinal speed and yaw rate use PI control with clamped integrators;
lateral path tracking uses a first-order sliding-mode law with a linear
boundary layer.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .params import ControlParams, VehicleParams
from .plant import resistance


@dataclass(frozen=True)
class MotionGains:
    kp_vx: float = 2500.0
    ki_vx: float = 500.0
    int_vx_max: float = 5.0
    kp_wr: float = 12000.0
    ki_wr: float = 20000.0
    int_wr_max: float = 0.2
    lambda_smc: float = 2.0
    eta_smc: float = 3.0
    phi_boundary: float = 0.5
    smc_feedforward: bool = True

    def __post_init__(self):
        vals = (self.kp_vx, self.ki_vx, self.int_vx_max, self.kp_wr, self.ki_wr,
                self.int_wr_max, self.lambda_smc, self.eta_smc, self.phi_boundary)
        if any(v <= 0 for v in vals):
            raise ValueError("motion gains must be positive")

    @classmethod
    def from_control(cls, c: ControlParams) -> "MotionGains":
        return cls(c.kp_vx, c.ki_vx, c.int_vx_max, c.kp_wr, c.ki_wr, c.int_wr_max,
                   c.lambda_smc, c.eta_smc, c.phi_boundary, c.smc_feedforward)


@dataclass
class PIState:
    integral: float = 0.0


def _clamp(x: float, bound: float) -> float:
    return min(max(x, -bound), bound)


def sat(x: float) -> float:
    """Linear saturation: x clipped to [-1, 1]."""
    return _clamp(x, 1.0)


def longitudinal_pi(e_vx: float, dt: float, gains: MotionGains, state: PIState,
                    v_x: float | None = None, params: VehicleParams | None = None) -> float:
    """Total longitudinal force demand (N) for speed error e_vx = v_ref - v_x.

    When v_x and params are given, rolling and aerodynamic resistance are fed
    forward.
    """
    state.integral = _clamp(state.integral + e_vx * dt, gains.int_vx_max)
    out = gains.kp_vx * e_vx + gains.ki_vx * state.integral
    if v_x is not None and params is not None:
        out += resistance(v_x, params)
    return out


def yaw_pi(e_omega_r: float, dt: float, gains: MotionGains, state: PIState) -> float:
    """Total yaw moment demand (N m) for yaw-rate error e = omega_ref - omega_r."""
    state.integral = _clamp(state.integral + e_omega_r * dt, gains.int_wr_max)
    return gains.kp_wr * e_omega_r + gains.ki_wr * state.integral


def sliding_surface(e_y: float, e_y_dot: float, gains: MotionGains) -> float:
    return e_y_dot + gains.lambda_smc * e_y


def lateral_smc(e_y: float, e_y_dot: float, omega_r: float, v_x: float, mass: float,
                gains: MotionGains) -> float:
    """Total lateral force demand (N).

    e_y is the offset of the vehicle left of the path and e_y_dot its rate.
    The law drives s = e_y_dot + lambda e_y into the boundary layer |s| < phi.
    """
    s = sliding_surface(e_y, e_y_dot, gains)
    out = -mass * (gains.lambda_smc * e_y_dot + gains.eta_smc * sat(s / gains.phi_boundary))
    if gains.smc_feedforward:
        out += mass * omega_r * v_x
    return out


@dataclass
class MotionController:
    """Holds the integrator states of the three loops."""

    gains: MotionGains
    params: VehicleParams
    vx_state: PIState = None
    wr_state: PIState = None

    def __post_init__(self):
        self.vx_state = self.vx_state or PIState()
        self.wr_state = self.wr_state or PIState()

    def demand(self, errors, v_x: float, omega_r: float, dt: float) -> tuple[float, float, float]:
        """(F_x, F_y, M_z) from TrackingErrors (e_omega_r there is omega_r - omega_ref)."""
        F_x = longitudinal_pi(errors.e_vx, dt, self.gains, self.vx_state, v_x, self.params)
        M_z = yaw_pi(-errors.e_omega_r, dt, self.gains, self.wr_state)
        F_y = lateral_smc(errors.e_y, errors.e_y_dot, omega_r, v_x, self.params.m, self.gains)
        if not all(math.isfinite(v) for v in (F_x, F_y, M_z)):
            raise ValueError("non-finite motion demand")
        return F_x, F_y, M_z
