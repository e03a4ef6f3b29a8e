"""Lower-layer execution: allocated forces to wheel torques and steer angles."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from .params import SIDE, TireParams, VehicleParams
from .plant import VehicleState, contact_kinematic_angle, suspension_jounce  # noqa: F401
from .tire import InverseLateralTable, query_inverse_lateral


def torque_command(f_x_alloc: float, params: VehicleParams, omega_dot_ref: float = 0.0) -> float:
    """Wheel torque holding the wheel speed while transmitting f_x_alloc."""
    return f_x_alloc * params.r + params.I_w * omega_dot_ref


def nominal_steer(f_y_alloc: float, f_z_hat: float, state: VehicleState, wheel: int,
                  table: InverseLateralTable, params: VehicleParams,
                  f_x_alloc: float | None = None, tire: TireParams | None = None) -> float:
    """Wheel angle whose brush lateral force equals f_y_alloc at load f_z_hat.

    Without f_x_alloc the pure-lateral inverse is used directly. With it, the
    table is queried at the resultant force to recover the combined slip
    magnitude, which is then split along the allocated force direction.
    """
    alpha_req = required_slip_angle(f_y_alloc, f_z_hat, table, f_x_alloc, tire)
    return contact_kinematic_angle(state, wheel, params) - alpha_req


def required_slip_angle(f_y: float, f_z: float, table: InverseLateralTable,
                        f_x: float | None = None, tire: TireParams | None = None) -> float:
    if f_x is None or f_x == 0.0 or tire is None:
        return query_inverse_lateral(table, f_y, f_z)
    cap = table.mu * f_z * table.u_max
    rho = math.hypot(f_x, f_y)
    if rho == 0.0:
        return 0.0
    if rho > cap:
        f_x, f_y, rho = f_x * cap / rho, f_y * cap / rho, cap
    gamma = tire.K_alpha * math.tan(abs(query_inverse_lateral(table, rho, f_z)))
    sx = gamma * f_x / rho
    sy = -gamma * f_y / rho
    q = min(sx / tire.K_s, 0.5)  # kappa / (1 + kappa)
    return math.atan(sy / (tire.K_alpha * (1.0 - q)))


class SuspensionKinematics:
    """Per-wheel bump-steer map: jounce (m) to wheel-angle change (rad).

    The map is stored as toe-in versus jounce, shared by all corners and
    mirrored by side, so a toe-in change turns left wheels right and right
    wheels left. Outside the tabulated range the end segments extrapolate.
    """

    def __init__(self, jounce, toe_in):
        s = np.asarray(jounce, dtype=float)
        t = np.asarray(toe_in, dtype=float)
        if s.ndim != 1 or s.shape != t.shape or len(s) < 2:
            raise ValueError("need matching 1-D jounce and toe arrays with >= 2 points")
        if np.any(np.diff(s) <= 0):
            raise ValueError("jounce samples must be strictly increasing")
        if not s[0] <= 0.0 <= s[-1] or abs(float(np.interp(0.0, s, t))) > 1e-12:
            raise ValueError("bump-steer map must pass through (0, 0)")
        self.jounce = s
        self.toe_in = t
        self._sl, self._tl = s.tolist(), t.tolist()

    @classmethod
    def linear(cls, coeff: float, span: float = 0.2) -> "SuspensionKinematics":
        return cls([-span, 0.0, span], [-coeff * span, 0.0, coeff * span])

    @classmethod
    def from_csv(cls, path) -> "SuspensionKinematics":
        """Read (jounce_m, toe_in_rad) rows; a header row is skipped."""
        rows = []
        with open(path, newline="") as fh:
            for rec in csv.reader(fh):
                if not rec or rec[0].strip().startswith("#"):
                    continue
                try:
                    rows.append((float(rec[0]), float(rec[1])))
                except ValueError:
                    if rows:
                        raise
        rows.sort()
        return cls([r[0] for r in rows], [r[1] for r in rows])

    def toe_in_at(self, s_j: float) -> float:
        s, t = self._sl, self._tl
        if len(s) == 3 and s[0] <= s_j <= s[2]:
            k = 0 if s_j < s[1] else 1
            return t[k] + (s_j - s[k]) * (t[k + 1] - t[k]) / (s[k + 1] - s[k])
        if s_j < s[0]:
            return float(t[0] + (s_j - s[0]) * (t[1] - t[0]) / (s[1] - s[0]))
        if s_j > s[-1]:
            return float(t[-1] + (s_j - s[-1]) * (t[-1] - t[-2]) / (s[-1] - s[-2]))
        return float(np.interp(s_j, s, t))

    def toe(self, wheel: int, s_j: float) -> float:
        """Wheel-angle disturbance delta_s (rad, positive steers left)."""
        return -SIDE[wheel] * self.toe_in_at(s_j)


def bump_steer_feedforward(delta_n: float, s_j: float, kinematics: SuspensionKinematics,
                           wheel: int) -> float:
    """Actuator angle that cancels the suspension toe disturbance at jounce s_j."""
    return delta_n - kinematics.toe(wheel, s_j)


def wheel_commands(f_alloc, f_z_hat, state: VehicleState, table: InverseLateralTable,
                   params: VehicleParams, kinematics: SuspensionKinematics | None = None,
                   jounce=None, tire: TireParams | None = None) -> tuple[list[float], list[float]]:
    """(torque, steer angle) per wheel for an allocated 8-vector."""
    T, delta = [], []
    for w in range(4):
        T.append(torque_command(f_alloc[2 * w], params))
        d = nominal_steer(f_alloc[2 * w + 1], f_z_hat[w], state, w, table, params,
                          f_alloc[2 * w] if tire is not None else None, tire)
        if kinematics is not None and jounce is not None:
            d = bump_steer_feedforward(d, jounce[w], kinematics, w)
        if not math.isfinite(d):
            raise ValueError("non-finite steer command")
        delta.append(d)
    return T, delta
