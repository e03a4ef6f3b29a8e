"""Vertical-load estimators (ST, LTXY, LTRPZ), truth pass-through, error metric.

The roll-related terms of the roll/pitch/heave estimator are applied
anti-symmetrically and divided by the track width so that lateral transfer
moves load across an axle instead of adding it to both sides; the literal
same-sign unsprung term is available behind ``unsprung_printed``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .params import VehicleParams

METHODS = ("st", "ltxy", "ltrpz", "true")


@dataclass(frozen=True)
class LoadEstimate:
    f_z_hat: tuple[float, float, float, float]
    method: str

    def clamped(self, floor: float) -> "LoadEstimate":
        return LoadEstimate(tuple(max(floor, f) for f in self.f_z_hat), self.method)

    @property
    def total(self) -> float:
        return sum(self.f_z_hat)


def estimate_st(params: VehicleParams) -> LoadEstimate:
    p = params
    front = p.m * p.g * p.b / (2.0 * p.L)
    rear = p.m * p.g * p.a / (2.0 * p.L)
    return LoadEstimate((front, front, rear, rear), "st")


def estimate_ltxy(a_x: float, a_y: float, params: VehicleParams) -> LoadEstimate:
    p = params
    m, L, h, B, g = p.m, p.L, p.h, p.B, p.g
    kf = m * p.b / (2.0 * L)
    kr = m * p.a / (2.0 * L)
    lon_f = a_x * h / p.b
    lon_r = a_x * h / p.a
    lat = 2.0 * a_y * h / B
    return LoadEstimate((
        kf * (g - lon_f - lat),
        kf * (g - lon_f + lat),
        kr * (g + lon_r - lat),
        kr * (g + lon_r + lat),
    ), "ltxy")


def estimate_ltrpz(a_x: float, a_y: float, a_z: float, theta: float, gamma: float,
                   params: VehicleParams, unsprung_printed: bool = False) -> LoadEstimate:
    """Load transfer from accelerations plus measured roll, pitch and heave.

    a_z is the vertical accelerometer reading (specific force, g at rest);
    the sprung-mass heave term uses a_z - g. gamma is positive when the right
    side is down, which loads the right wheels.
    """
    p = params
    m, m_s, L, B, g, h = p.m, p.m_s, p.L, p.B, p.g, p.h
    heave = a_z - g
    ct = math.cos(theta)
    base_f = (m * p.b * g + m_s * ct * (p.b * heave - a_x * h)) / (2.0 * L)
    base_r = (m * p.a * g + m_s * ct * (p.a * heave + a_x * h)) / (2.0 * L)
    rc_f = m_s * a_y * p.b * p.h_r / (L * B)
    rc_r = m_s * a_y * p.a * p.h_r / (L * B)
    roll_f = p.K_1_rad * gamma / B
    roll_r = p.K_2_rad * gamma / B
    if unsprung_printed:
        us_l = us_r = p.m_u * a_y * p.r
    else:
        us = p.m_u_axle * a_y * p.r / B
        us_l, us_r = -us, us
    return LoadEstimate((
        base_f - rc_f + us_l - roll_f,
        base_f + rc_f + us_r + roll_f,
        base_r - rc_r + us_l - roll_r,
        base_r + rc_r + us_r + roll_r,
    ), "ltrpz")


def estimate(method: str, params: VehicleParams, *, a_x=0.0, a_y=0.0, a_z=None, theta=0.0,
             gamma=0.0, f_z_true=None, unsprung_printed=False) -> LoadEstimate:
    if method == "st":
        return estimate_st(params)
    if method == "ltxy":
        return estimate_ltxy(a_x, a_y, params)
    if method == "ltrpz":
        a_z = params.g if a_z is None else a_z
        return estimate_ltrpz(a_x, a_y, a_z, theta, gamma, params, unsprung_printed)
    if method == "true":
        if f_z_true is None:
            raise ValueError("true-load mode needs the plant loads")
        return LoadEstimate(tuple(float(f) for f in f_z_true), "true")
    raise ValueError(f"unknown load estimator {method!r}")


def estimation_error(f_z_hat_series, f_z_true_series, metric: str = "mean") -> float:
    """Relative estimation error in percent over time and wheels.

    'mean' is the mean of |hat - true| / true; 'rms' the root mean square of
    the same ratio.
    """
    est = np.asarray(f_z_hat_series, dtype=float)
    tru = np.asarray(f_z_true_series, dtype=float)
    if est.size == 0 or tru.size == 0:
        raise ValueError("empty load series")
    if est.shape != tru.shape:
        raise ValueError("estimate and truth series differ in shape")
    if np.any(tru <= 0):
        raise ValueError("true loads must be positive")
    rel = np.abs(est - tru) / tru
    if metric == "mean":
        return float(100.0 * rel.mean())
    if metric == "rms":
        return float(100.0 * math.sqrt(np.mean(rel * rel)))
    raise ValueError(f"unknown metric {metric!r}")
