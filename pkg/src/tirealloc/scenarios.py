"""Maneuver definitions and their reference paths."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

from .params import DEG
from .reference import ReferencePath, path_from_curvature, path_from_lateral_profile

SCENARIOS = ("step_yaw", "dlc", "slalom")

# Scenario constants. The course geometries are not taken from a standard
# verbatim: at 80 km/h the textbook double-lane-change transitions demand more
# than 1 g, so the transitions are stretched to keep the peak near the limit.
DEFAULTS = {
    "step_yaw": {"target_yaw_rate_deg": 22.0, "step_time": 1.0, "duration": 6.0},
    "dlc": {"lateral_offset": 3.5, "entry_length": 40.0, "transition_length": 32.0,
            "hold_length": 25.0, "exit_length": 80.0, "duration": 8.0},
    "slalom": {"cone_spacing": 30.0, "amplitude": 1.4, "n_cones": 6, "entry_length": 30.0,
               "ramp_length": 30.0, "exit_length": 60.0, "duration": 10.0},
}


@dataclass(frozen=True)
class ScenarioConfig:
    name: str
    speed: float = 80.0 / 3.6
    mu: float = 1.0
    duration: float | None = None
    params: dict = field(default_factory=dict)
    sensor_noise: float = 0.0  # std of acceleration noise, m/s^2

    def __post_init__(self):
        if self.name not in SCENARIOS:
            raise ValueError(f"unknown scenario {self.name!r}")
        if self.speed <= 0 or self.mu <= 0:
            raise ValueError("speed and mu must be positive")
        unknown = set(self.params) - set(DEFAULTS[self.name])
        if unknown:
            raise KeyError(f"unknown {self.name} parameters: {sorted(unknown)}")

    def get(self, key: str):
        return self.params.get(key, DEFAULTS[self.name][key])

    @property
    def total_time(self) -> float:
        return float(self.duration if self.duration is not None else self.get("duration"))

    def with_duration(self, duration: float) -> "ScenarioConfig":
        return replace(self, duration=duration)

    @property
    def active_window(self) -> tuple[float, float]:
        """Time span over which tracking and estimation metrics are taken."""
        if self.name == "step_yaw":
            return float(self.get("step_time")), self.total_time
        return 0.0, self.total_time

    @property
    def steady_window(self) -> tuple[float, float] | None:
        if self.name == "step_yaw":
            T = self.total_time
            return max(float(self.get("step_time")), T - 1.5), T
        return None

    @property
    def target_yaw_rate(self) -> float | None:
        if self.name == "step_yaw":
            return float(self.get("target_yaw_rate_deg")) * DEG
        return None


def _smoothstep(x: float) -> float:
    """Cosine ramp from 0 (x <= 0) to 1 (x >= 1) with zero end slopes."""
    if x <= 0.0:
        return 0.0
    if x >= 1.0:
        return 1.0
    return 0.5 * (1.0 - math.cos(math.pi * x))


def reference_path(scenario: ScenarioConfig) -> ReferencePath:
    v = scenario.speed
    margin = 1.5 * v * scenario.total_time + 50.0
    if scenario.name == "step_yaw":
        k = scenario.target_yaw_rate / v
        s_step = v * float(scenario.get("step_time"))
        return path_from_curvature(lambda s: k if s >= s_step else 0.0, margin, v, ds=0.1)
    if scenario.name == "dlc":
        off = float(scenario.get("lateral_offset"))
        x1 = float(scenario.get("entry_length"))
        L = float(scenario.get("transition_length"))
        x2 = x1 + L + float(scenario.get("hold_length"))

        def y(x):
            return off * (_smoothstep((x - x1) / L) - _smoothstep((x - x2) / L))

        return path_from_lateral_profile(y, max(margin, x2 + L + 20.0), v)
    # slalom: sinusoid through cones on the centreline, faded in and out
    spacing = float(scenario.get("cone_spacing"))
    A = float(scenario.get("amplitude"))
    xs = float(scenario.get("entry_length"))
    ramp = float(scenario.get("ramp_length"))
    xe = xs + spacing * int(scenario.get("n_cones"))

    def y(x):
        if x <= xs or x >= xe:
            return 0.0
        w = min(_smoothstep((x - xs) / ramp), _smoothstep((xe - x) / ramp))
        return A * w * math.sin(math.pi * (x - xs) / spacing)

    return path_from_lateral_profile(y, max(margin, xe + 20.0), v)


def default_scenario(name: str, **kw) -> ScenarioConfig:
    return ScenarioConfig(name=name, **kw)
