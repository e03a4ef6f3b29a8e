"""Vehicle, tire, actuator and controller parameters plus YAML config loading.

Defaults mirror the 4WID-4WIS test vehicle (sprung/unsprung masses, CG
geometry, roll stiffnesses) and the actuator/tire time constants it was
identified with. Quantities the source tables leave out (wheel inertia, drag,
tire stiffnesses, pitch stiffness) carry documented engineering defaults.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Any

import yaml

WHEELS = ("fl", "fr", "rl", "rr")
IS_FRONT = (True, True, False, False)
# +1 for left wheels (at +B/2 in the body frame), -1 for right wheels
SIDE = (1.0, -1.0, 1.0, -1.0)

DEG = math.pi / 180.0


@dataclass(frozen=True)
class VehicleParams:
    m_s: float = 1110.0  # sprung mass, kg
    m_u: float = 60.0  # unsprung mass per axle (both sides), kg
    I_z: float = 1343.1
    I_w: float = 1.2  # wheel + drivetrain inertia, kg m^2
    a: float = 1.06
    b: float = 1.54
    B: float = 1.48
    h: float = 0.54
    h_r: float = 0.5
    K_1: float = 60.0  # front roll stiffness, N m / deg
    K_2: float = 150.0  # rear roll stiffness, N m / deg
    r: float = 0.298
    f_roll: float = 0.015
    C_D: float = 0.3
    A_f: float = 2.0
    rho: float = 1.206
    g: float = 9.81
    mu: float = 1.0
    roll_lag: float = 0.1  # s, first-order lag of roll angle toward steady state
    pitch_lag: float = 0.1
    K_pitch: float = 1.0e5  # N m / rad
    unsprung_per_axle: bool = True

    def __post_init__(self):
        for name in ("m_s", "I_z", "I_w", "a", "b", "B", "h", "h_r", "r", "g",
                     "K_1", "K_2", "roll_lag", "pitch_lag", "K_pitch"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be strictly positive")
        if self.m_u < 0:
            raise ValueError("m_u must be non-negative")
        if not 0 < self.mu <= 1.5:
            raise ValueError("mu must lie in (0, 1.5]")

    @property
    def m(self) -> float:
        """Total mass; m_u is read per axle by default (two axles)."""
        return self.m_s + (2.0 if self.unsprung_per_axle else 1.0) * self.m_u

    @property
    def m_u_axle(self) -> float:
        return self.m_u if self.unsprung_per_axle else 0.5 * self.m_u

    @property
    def L(self) -> float:
        return self.a + self.b

    @property
    def K_1_rad(self) -> float:
        return self.K_1 / DEG

    @property
    def K_2_rad(self) -> float:
        return self.K_2 / DEG


@dataclass(frozen=True)
class TireParams:
    K_s: float = 1.0e5  # longitudinal slip stiffness, N
    K_alpha: float = 8.0e4  # cornering stiffness, N/rad
    tau_fx_front: float = 0.014
    tau_fy_front: float = 0.018
    tau_fx_rear: float = 0.020
    tau_fy_rear: float = 0.024

    def __post_init__(self):
        for f in fields(self):
            if not getattr(self, f.name) > 0:
                raise ValueError(f"{f.name} must be strictly positive")

    def taus(self, front: bool) -> tuple[float, float]:
        if front:
            return self.tau_fx_front, self.tau_fy_front
        return self.tau_fx_rear, self.tau_fy_rear


@dataclass(frozen=True)
class ActuatorParams:
    tau_d: float = 0.015
    tau_b: float = 0.06
    tau_s: float = 0.1
    T_max: float = 1250.0
    T_min: float = -1250.0
    T_rate: float = 500.0  # N m per rate_period
    delta_max: float = 35.0 * DEG
    delta_min: float = -35.0 * DEG
    delta_rate: float = 0.5 * DEG  # rad per rate_period
    rate_period: float = 0.01

    def __post_init__(self):
        for name in ("tau_d", "tau_b", "tau_s", "rate_period"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be strictly positive")
        if self.T_rate < 0 or self.delta_rate < 0:
            raise ValueError("rate limits must be non-negative")
        if not (self.T_min < self.T_max and self.delta_min < self.delta_max):
            raise ValueError("actuator magnitude bounds are inverted")

    def rate_budget(self, kind: str, dt: float) -> float:
        rate = self.T_rate if kind == "torque" else self.delta_rate
        return rate * dt / self.rate_period

    def bounds(self, kind: str) -> tuple[float, float]:
        if kind == "torque":
            return self.T_min, self.T_max
        return self.delta_min, self.delta_max


@dataclass(frozen=True)
class SuspensionParams:
    toe_coeff: float = 0.2  # rad of toe per m of jounce
    plant_bump_steer: bool = True


@dataclass(frozen=True)
class ControlParams:
    dt_plant: float = 0.001
    dt_control: float = 0.01
    kp_vx: float = 2500.0
    ki_vx: float = 500.0
    int_vx_max: float = 5.0  # clamp on the integral of e_vx, m
    kp_wr: float = 12000.0
    ki_wr: float = 20000.0
    int_wr_max: float = 0.2  # rad
    lambda_smc: float = 2.0
    eta_smc: float = 3.0
    phi_boundary: float = 0.5
    smc_feedforward: bool = True
    k_gamma: float = 0.05
    k_d: float = 0.3
    load_floor: float = 50.0
    load_metric: str = "mean"
    ltrpz_unsprung_printed: bool = False
    combined_slip_steer: bool = True  # invert the steer angle for combined slip

    def __post_init__(self):
        if self.dt_plant <= 0 or self.dt_control < self.dt_plant:
            raise ValueError("need 0 < dt_plant <= dt_control")
        ratio = self.dt_control / self.dt_plant
        if abs(ratio - round(ratio)) > 1e-9:
            raise ValueError("dt_control must be an integer multiple of dt_plant")
        if self.k_gamma <= 0 or self.k_d < 0:
            raise ValueError("k_gamma must be positive and k_d non-negative")
        if self.load_metric not in ("mean", "rms"):
            raise ValueError("load_metric must be 'mean' or 'rms'")

    @property
    def substeps(self) -> int:
        return int(round(self.dt_control / self.dt_plant))


@dataclass(frozen=True)
class Config:
    vehicle: VehicleParams = field(default_factory=VehicleParams)
    tire: TireParams = field(default_factory=TireParams)
    actuators: ActuatorParams = field(default_factory=ActuatorParams)
    suspension: SuspensionParams = field(default_factory=SuspensionParams)
    control: ControlParams = field(default_factory=ControlParams)


_SECTIONS = {
    "vehicle": VehicleParams,
    "tire": TireParams,
    "actuators": ActuatorParams,
    "suspension": SuspensionParams,
    "control": ControlParams,
}


def _section_from_dict(cls, data: dict[str, Any]):
    names = {f.name for f in fields(cls)}
    kwargs = {}
    for key, value in data.items():
        if key.endswith("_deg") and key[:-4] in names:
            kwargs[key[:-4]] = float(value) * DEG
        elif key in names:
            kwargs[key] = value
        else:
            raise KeyError(f"unknown key {key!r} in section {cls.__name__}")
    return cls(**kwargs)


def config_from_dict(data: dict[str, Any] | None, base: Config | None = None) -> Config:
    base = base or Config()
    data = data or {}
    unknown = set(data) - set(_SECTIONS)
    if unknown:
        raise KeyError(f"unknown config sections: {sorted(unknown)}")
    updates = {}
    for name, cls in _SECTIONS.items():
        if name in data:
            current = dataclasses.asdict(getattr(base, name))
            section = _section_from_dict(cls, data[name] or {})
            merged = {**current, **{k: getattr(section, k) for k in _explicit_keys(data[name])}}
            updates[name] = cls(**merged)
    return replace(base, **updates)


def _explicit_keys(section: dict[str, Any]) -> list[str]:
    return [k[:-4] if k.endswith("_deg") else k for k in (section or {})]


def load_config(path: str | Path | None) -> Config:
    if path is None:
        return Config()
    with open(path) as fh:
        data = yaml.safe_load(fh)
    return config_from_dict(data.get("params", data) if isinstance(data, dict) else None)


def config_to_dict(cfg: Config) -> dict[str, Any]:
    return {name: dataclasses.asdict(getattr(cfg, name)) for name in _SECTIONS}
