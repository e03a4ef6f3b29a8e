"""First-order drive/brake/steer actuators, limits and deadbeat compensation."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

from .params import ActuatorParams, TireParams

log = logging.getLogger(__name__)


def _gain(tau: float, dt: float) -> float:
    """1 - exp(-dt/tau) without cancellation for dt << tau."""
    return -math.expm1(-dt / tau)


def first_order_step(u_o: float, u_i: float, tau: float, dt: float) -> float:
    """Output of 1/(tau s + 1) after holding input u_i for dt, starting at u_o."""
    # increment form: exact hold when u_i == u_o, never overshoots u_i
    return u_o + _gain(tau, dt) * (u_i - u_o)


def deadbeat_compensate(u_cmd: float, u_o: float, tau: float, dt: float) -> float:
    """Held input that drives a first-order lag from u_o to u_cmd in one step."""
    if dt <= 0:
        raise ValueError("deadbeat compensation needs dt > 0")
    return (u_cmd - u_o) / _gain(tau, dt) + u_o


def apply_limits(u_i: float, u_prev_cmd: float, kind: str, params: ActuatorParams,
                 dt: float) -> float:
    """Clamp to magnitude bounds, then to the rate budget around u_prev_cmd."""
    lo, hi = params.bounds(kind)
    budget = params.rate_budget(kind, dt)
    u = min(max(u_i, lo), hi)
    u = min(max(u, u_prev_cmd - budget), u_prev_cmd + budget)
    if u != u_i:
        log.debug("%s command saturated: %.6g -> %.6g", kind, u_i, u)
    return u


def rate_window(u_prev: float, kind: str, params: ActuatorParams, dt: float,
                rate_limits: bool = True) -> tuple[float, float]:
    """Reachable command interval for the next period (magnitude and rate)."""
    lo, hi = params.bounds(kind)
    if not rate_limits:
        return lo, hi
    budget = params.rate_budget(kind, dt)
    return max(lo, u_prev - budget), min(hi, u_prev + budget)


def channel_bandwidths(f_prev, params: ActuatorParams, tire: TireParams) -> list[float]:
    """Per-channel bandwidths (rad/s) for the rate-weighted allocation.

    Series first-order stages are merged by summing time constants: the
    drive (or brake, when the previous longitudinal force was negative)
    actuator with the longitudinal force lag, and the steering actuator with
    the lateral force lag.
    """
    out = []
    for w in range(4):
        tau_fx, tau_fy = tire.taus(w < 2)
        tau_long = (params.tau_b if f_prev[2 * w] < 0 else params.tau_d) + tau_fx
        out.append(1.0 / tau_long)
        out.append(1.0 / (params.tau_s + tau_fy))
    return out


@dataclass
class ActuatorState:
    """Realized outputs of the drive, brake and steer actuators per wheel."""

    T_drive: list[float] = field(default_factory=lambda: [0.0] * 4)
    T_brake: list[float] = field(default_factory=lambda: [0.0] * 4)
    delta: list[float] = field(default_factory=lambda: [0.0] * 4)
    T_cmd: list[float] = field(default_factory=lambda: [0.0] * 4)
    delta_cmd: list[float] = field(default_factory=lambda: [0.0] * 4)

    @property
    def torque(self) -> list[float]:
        return [d - b for d, b in zip(self.T_drive, self.T_brake)]

    def copy(self) -> "ActuatorState":
        return ActuatorState(list(self.T_drive), list(self.T_brake), list(self.delta),
                             list(self.T_cmd), list(self.delta_cmd))


@dataclass
class ActuatorInputs:
    """Held actuator inputs u_i (after compensation and limits)."""

    drive: list[float]
    brake: list[float]
    steer: list[float]


def split_torque(T: float) -> tuple[float, float]:
    """Route a signed wheel torque to (drive, brake) magnitudes."""
    return (T, 0.0) if T >= 0.0 else (0.0, -T)


def advance(state: ActuatorState, inputs: ActuatorInputs, params: ActuatorParams,
            dt: float, dynamics: bool) -> None:
    """Advance realized outputs in place by one plant step."""
    if not dynamics:
        state.T_drive = list(inputs.drive)
        state.T_brake = list(inputs.brake)
        state.delta = list(inputs.steer)
        return
    for w in range(4):
        state.T_drive[w] = first_order_step(state.T_drive[w], inputs.drive[w], params.tau_d, dt)
        state.T_brake[w] = first_order_step(state.T_brake[w], inputs.brake[w], params.tau_b, dt)
        state.delta[w] = first_order_step(state.delta[w], inputs.steer[w], params.tau_s, dt)
