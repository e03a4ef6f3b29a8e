"""Combined-slip brush tire, force relaxation, and the inverse lateral map."""

from __future__ import annotations

import bisect
import csv
import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from .params import TireParams


class TireDomainError(ValueError):
    """Slip or load outside the brush model's domain."""


def slip_gamma(kappa: float, alpha: float, params: TireParams) -> float:
    """Combined slip magnitude gamma_t (N) of the brush model."""
    d = 1.0 + kappa
    return math.hypot(params.K_s * kappa / d, params.K_alpha * math.tan(alpha) / d)


def _check_domain(kappa, alpha, f_z):
    if not (math.isfinite(kappa) and math.isfinite(alpha) and math.isfinite(f_z)):
        raise TireDomainError("non-finite tire input")
    if kappa <= -1.0:
        raise TireDomainError(f"slip ratio {kappa} <= -1")
    if abs(alpha) >= 0.5 * math.pi:
        raise TireDomainError(f"slip angle {alpha} outside (-pi/2, pi/2)")
    if f_z < 0.0:
        raise TireDomainError(f"negative vertical load {f_z}")


def brush_force(kappa: float, alpha: float, f_z: float, mu: float,
                params: TireParams) -> tuple[float, float]:
    """Steady-state (f_x, f_y) of the combined brush model.

    Positive slip ratio drives; positive slip angle produces negative lateral
    force. Past gamma_t = 3*mu*f_z the magnitude saturates at mu*f_z while
    the direction keeps the stiffness-weighted slip ratio.
    """
    _check_domain(kappa, alpha, f_z)
    if f_z == 0.0:
        return 0.0, 0.0
    d = 1.0 + kappa
    sx = params.K_s * kappa / d
    sy = params.K_alpha * math.tan(alpha) / d
    gamma = math.hypot(sx, sy)
    if gamma == 0.0:
        return 0.0, 0.0
    cap = mu * f_z
    if gamma <= 3.0 * cap:
        # gamma - gamma^2/(3F) + gamma^3/(27F^2); this factoring has no cancellation
        z = gamma / (3.0 * cap)
        ratio = 1.0 - z + z * z / 3.0  # f / gamma
    else:
        ratio = cap / gamma
    return sx * ratio, -sy * ratio


def brush_lateral_pure(alpha: float, f_z: float, mu: float, params: TireParams) -> float:
    return brush_force(0.0, alpha, f_z, mu, params)[1]


def relaxation_step(f_steady: tuple[float, float], f_dynamic_prev: tuple[float, float],
                    front: bool, dt: float, params: TireParams) -> tuple[float, float]:
    """Exact zero-order-hold update of the first-order force lag."""
    if dt < 0:
        raise ValueError("dt must be non-negative")
    tau_x, tau_y = params.taus(front)
    ex = math.exp(-dt / tau_x)
    ey = math.exp(-dt / tau_y)
    return (ex * f_dynamic_prev[0] + (1.0 - ex) * f_steady[0],
            ey * f_dynamic_prev[1] + (1.0 - ey) * f_steady[1])


class TableRangeError(ValueError):
    pass


@dataclass(frozen=True)
class InverseLateralTable:
    """alpha(f_z, u) with u = f_y / (mu f_z).

    f_z is uniform. u is clustered toward +-u_max, where alpha(u) steepens
    (1 - |u| vanishes like (1 - z)^3 at saturation).
    """

    f_z_grid: np.ndarray
    u_grid: np.ndarray
    alpha: np.ndarray  # shape (len(f_z_grid), len(u_grid))
    mu: float

    @property
    def u_max(self) -> float:
        return float(self.u_grid[-1])

    @property
    def f_z_range(self) -> tuple[float, float]:
        return float(self.f_z_grid[0]), float(self.f_z_grid[-1])

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["f_z", "u", "alpha"])
            for i, fz in enumerate(self.f_z_grid):
                for j, u in enumerate(self.u_grid):
                    w.writerow([repr(float(fz)), repr(float(u)), repr(float(self.alpha[i, j]))])


def _invert_pure_lateral(target: float, f_z: float, mu: float, params: TireParams) -> float:
    """Slip angle giving lateral force `target` on the monotone pure-lateral curve."""
    if target == 0.0:
        return 0.0
    mag = abs(target)
    hi = math.atan(3.0 * mu * f_z / params.K_alpha)
    alpha = brentq(lambda a: -brush_lateral_pure(a, f_z, mu, params) - mag, 0.0, hi,
                   xtol=1e-15, rtol=4 * np.finfo(float).eps)
    return -alpha if target > 0 else alpha


def build_inverse_lateral(params: TireParams, mu: float, f_z_range: tuple[float, float],
                          n_fz: int = 64, n_u: int = 129, u_max: float = 0.999,
                          cluster: float = 2.0) -> InverseLateralTable:
    lo, hi = f_z_range
    if not (0 < lo < hi):
        raise ValueError("f_z_range must be a positive interval")
    if not (0 < u_max < 1 and cluster >= 1):
        raise ValueError("need 0 < u_max < 1 and cluster >= 1")
    f_z_grid = np.linspace(lo, hi, n_fz)
    # u = sign(s) (1 - (1 - |s|)^cluster), s uniform; cluster = 1 is a uniform grid
    s_max = 1.0 - (1.0 - u_max) ** (1.0 / cluster)
    s = np.linspace(-s_max, s_max, n_u)
    u_grid = np.sign(s) * (1.0 - (1.0 - np.abs(s)) ** cluster)
    u_grid[0], u_grid[-1] = -u_max, u_max
    if n_u % 2:
        u_grid[n_u // 2] = 0.0
    alpha = np.empty((n_fz, n_u))
    for i, fz in enumerate(f_z_grid):
        for j, u in enumerate(u_grid):
            alpha[i, j] = _invert_pure_lateral(u * mu * fz, fz, mu, params)
        row = alpha[i]
        if not np.all(np.diff(row) < 0):
            raise ValueError(f"inverse lateral map not monotone at f_z={fz}")
    if n_u % 2:
        alpha[:, n_u // 2] = 0.0
    alpha.setflags(write=False)
    f_z_grid.setflags(write=False)
    u_grid.setflags(write=False)
    return InverseLateralTable(f_z_grid, u_grid, alpha, mu)


def query_inverse_lateral(table: InverseLateralTable, f_y: float, f_z: float) -> float:
    """Slip angle for lateral force f_y at load f_z (bilinear interpolation)."""
    fz0, fz1 = table.f_z_range
    if not (fz0 <= f_z <= fz1):
        raise TableRangeError(f"f_z={f_z} outside table range [{fz0}, {fz1}]")
    u = f_y / (table.mu * f_z)
    um = table.u_max
    u = min(max(u, -um), um)
    nf = len(table.f_z_grid) - 1
    nu = len(table.u_grid) - 1
    x = (f_z - fz0) / (fz1 - fz0) * nf
    i = min(int(x), nf - 1)
    j = min(max(bisect.bisect_right(table.u_grid, u) - 1, 0), nu - 1)
    tx = x - i
    ug = table.u_grid
    ty = (u - ug[j]) / (ug[j + 1] - ug[j])
    A = table.alpha
    return float((1 - tx) * ((1 - ty) * A[i, j] + ty * A[i, j + 1])
                 + tx * ((1 - ty) * A[i + 1, j] + ty * A[i + 1, j + 1]))
