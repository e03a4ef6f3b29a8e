"""Per-wheel feasible tire-force regions.

Four variants: the extremum box, the friction circle, an inscribed octagon,
and the attainable-force polygon built from next-period slip bounds. The
polygon maps eight (slip angle, slip ratio) corner/edge points through the
brush model; corners whose combined slip would saturate the tire are pulled
back along the slip-ratio axis to the saturation onset.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .actuators import rate_window
from .params import ActuatorParams, TireParams, VehicleParams
from .plant import VehicleState, contact_kinematic_angle
from .tire import brush_force, slip_gamma

DUPLICATE_TOL = 1.0  # N


@dataclass(frozen=True)
class SlipBounds:
    kappa_lo: float
    kappa_hi: float
    alpha_lo: float
    alpha_hi: float

    def __post_init__(self):
        if self.kappa_lo > self.kappa_hi or self.alpha_lo > self.alpha_hi:
            raise ValueError("slip bounds must satisfy lo <= hi")


@dataclass(frozen=True)
class ForceEnvelope:
    kind: str  # extremum | circle | octagon | polygon
    vertices: tuple[tuple[float, float], ...] = ()
    halfspaces: tuple[tuple[float, float, float], ...] = ()  # n_x f_x + n_y f_y <= b
    equalities: tuple[tuple[float, float, float], ...] = ()  # n_x f_x + n_y f_y == b
    radius: float = 0.0
    sources: tuple[tuple[float, float], ...] = ()  # (alpha, kappa) per vertex
    rules: tuple[str, ...] = ()

    @property
    def degenerate(self) -> bool:
        return bool(self.equalities)

    @property
    def is_linear(self) -> bool:
        return self.kind != "circle"

    def centroid(self) -> tuple[float, float]:
        if not self.vertices:
            return 0.0, 0.0
        n = len(self.vertices)
        return (sum(v[0] for v in self.vertices) / n, sum(v[1] for v in self.vertices) / n)


# ---------------------------------------------------------------- bounds

def torque_bounds(T_current: float, params: ActuatorParams, dt: float,
                  rate_limits: bool = True) -> tuple[float, float]:
    return rate_window(T_current, "torque", params, dt, rate_limits)


def steer_bounds(delta_current: float, params: ActuatorParams, dt: float,
                 rate_limits: bool = True) -> tuple[float, float]:
    return rate_window(delta_current, "steer", params, dt, rate_limits)


def slip_ratio_bounds(state: VehicleState, wheel: int, f_x_current: float,
                      torque_range: tuple[float, float], params: VehicleParams,
                      dt: float) -> tuple[float, float]:
    """Slip-ratio range after one Euler step of the wheel equation at constant v_x."""
    if state.v_x <= 0.1:
        from .plant import KinematicSingularity
        raise KinematicSingularity(f"v_x={state.v_x:.3g} m/s below 0.1 m/s")
    w0 = state.omega[wheel]
    out = []
    for T in torque_range:
        w = w0 + dt * (T - f_x_current * params.r) / params.I_w
        out.append((w * params.r - state.v_x) / abs(state.v_x))
    lo, hi = min(out), max(out)
    return max(lo, -0.95), hi


def slip_angle_bounds(state: VehicleState, wheel: int, steer_range: tuple[float, float],
                      params: VehicleParams, toe: float = 0.0) -> tuple[float, float]:
    """Slip-angle range for wheel angles steer_range (+ toe offset)."""
    kin = contact_kinematic_angle(state, wheel, params)
    return kin - (steer_range[1] + toe), kin - (steer_range[0] + toe)


# ---------------------------------------------------------------- polygon

def _saturation_kappa(alpha: float, k_in: float, k_out: float, cap3: float,
                      tp: TireParams, max_iter: int = 60, rtol: float = 1e-6) -> float:
    """kappa between k_in (unsaturated) and k_out (saturated) where gamma_t = 3 mu f_z."""
    lo, hi = k_in, k_out
    scale = max(abs(k_in), abs(k_out))
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        if slip_gamma(mid, alpha, tp) <= cap3:
            lo = mid
        else:
            hi = mid
        if abs(hi - lo) <= rtol * scale * 1e-6:
            break
    return lo


def _edge_point(lo: float, hi: float) -> float | None:
    """Zero if the interval straddles it, else the endpoint nearest zero."""
    if lo <= 0.0 <= hi:
        return 0.0
    return lo if lo > 0.0 else hi


def table_ii_points(bounds: SlipBounds, f_z: float, mu: float,
                    tp: TireParams) -> list[tuple[float, float, str]]:
    """(alpha, kappa, rule) for vertices A1..A8 in order."""
    kl, kh, al, ah = bounds.kappa_lo, bounds.kappa_hi, bounds.alpha_lo, bounds.alpha_hi
    cap3 = 3.0 * mu * f_z
    k0 = _edge_point(kl, kh)
    a0 = _edge_point(al, ah)

    def corner(alpha, kappa, name):
        if slip_gamma(kappa, alpha, tp) <= cap3:
            return alpha, kappa, f"{name}:corner"
        k_in = k0
        if slip_gamma(k_in, alpha, tp) > cap3:
            # slip angle alone saturates: the raw corner already lies on the circle
            return alpha, kappa, f"{name}:corner-saturated"
        return alpha, _saturation_kappa(alpha, k_in, kappa, cap3, tp), f"{name}:saturation-replaced"

    def edge(alpha, kappa, name, straddles):
        return alpha, kappa, f"{name}:{'zero-crossing' if straddles else 'nearest-endpoint'}"

    return [
        edge(ah, k0, "A1", kl <= 0.0 <= kh),
        corner(ah, kh, "A2"),
        edge(a0, kh, "A3", al <= 0.0 <= ah),
        corner(al, kh, "A4"),
        edge(al, k0, "A5", kl <= 0.0 <= kh),
        corner(al, kl, "A6"),
        edge(a0, kl, "A7", al <= 0.0 <= ah),
        corner(ah, kl, "A8"),
    ]


def _cross(o, a, b):
    return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])


def convex_hull(points):
    """Counterclockwise hull (monotone chain), collinear points dropped."""
    pts = sorted(set(points))
    if len(pts) <= 2:
        return pts
    lower, upper = [], []
    for p in pts:
        while len(lower) >= 2 and _cross(lower[-2], lower[-1], p) <= 0:
            lower.pop()
        lower.append(p)
    for p in reversed(pts):
        while len(upper) >= 2 and _cross(upper[-2], upper[-1], p) <= 0:
            upper.pop()
        upper.append(p)
    return lower[:-1] + upper[:-1]


def _dedup(items, tol=DUPLICATE_TOL):
    kept = []
    for it in items:
        if all(math.hypot(it[0] - k[0], it[1] - k[1]) > tol for k in kept):
            kept.append(it)
    return kept


def _halfspaces(vertices):
    hs = []
    n = len(vertices)
    for i in range(n):
        x0, y0 = vertices[i]
        x1, y1 = vertices[(i + 1) % n]
        dx, dy = x1 - x0, y1 - y0
        ln = math.hypot(dx, dy)
        nx, ny = dy / ln, -dx / ln
        hs.append((nx, ny, nx * x0 + ny * y0))
    return tuple(hs)


def _degenerate(kind, pts, sources, rules):
    if len(pts) == 1:
        (px, py), = pts
        return ForceEnvelope(kind, ((px, py),), (), ((1.0, 0.0, px), (0.0, 1.0, py)),
                             sources=sources, rules=rules)
    (px, py), (qx, qy) = pts
    dx, dy = qx - px, qy - py
    ln = math.hypot(dx, dy)
    tx, ty = dx / ln, dy / ln
    nx, ny = -ty, tx
    return ForceEnvelope(kind, ((px, py), (qx, qy)),
                         ((tx, ty, tx * qx + ty * qy), (-tx, -ty, -(tx * px + ty * py))),
                         ((nx, ny, nx * px + ny * py),), sources=sources, rules=rules)


def polygon_vertices(bounds: SlipBounds, f_z_hat: float, mu: float,
                     tire_params: TireParams) -> ForceEnvelope:
    """Attainable-force polygon for the given slip bounds."""
    if f_z_hat <= 0:
        raise ValueError("f_z_hat must be positive")
    raw = []
    for alpha, kappa, rule in table_ii_points(bounds, f_z_hat, mu, tire_params):
        fx, fy = brush_force(kappa, alpha, f_z_hat, mu, tire_params)
        raw.append((fx, fy, alpha, kappa, rule))
    uniq = _dedup(raw)
    rules = tuple(r[4] for r in raw)
    if len(uniq) < 3:
        pts = [(u[0], u[1]) for u in uniq]
        return _degenerate("polygon", pts, tuple((u[2], u[3]) for u in uniq), rules)
    hull = convex_hull([(u[0], u[1]) for u in uniq])
    if len(hull) < 3:
        src = {(u[0], u[1]): (u[2], u[3]) for u in uniq}
        ends = [hull[0], hull[-1]] if len(hull) == 2 else hull
        return _degenerate("polygon", ends, tuple(src[p] for p in ends), rules)
    src = {(u[0], u[1]): (u[2], u[3]) for u in uniq}
    return ForceEnvelope("polygon", tuple(hull), _halfspaces(hull),
                         sources=tuple(src[p] for p in hull), rules=rules)


# ---------------------------------------------------------------- simple variants

def circle_envelope(f_z_hat: float, mu: float) -> ForceEnvelope:
    return ForceEnvelope("circle", radius=mu * f_z_hat)


def octagon_envelope(f_z_hat: float, mu: float) -> ForceEnvelope:
    R = mu * f_z_hat
    verts = tuple((R * math.cos(k * math.pi / 4), R * math.sin(k * math.pi / 4)) for k in range(8))
    return ForceEnvelope("octagon", verts, _halfspaces(verts), radius=R)


def extremum_envelope(f_z_hat: float, mu: float) -> ForceEnvelope:
    R = mu * f_z_hat
    verts = ((R, -R), (R, R), (-R, R), (-R, -R))
    return ForceEnvelope("extremum", verts, _halfspaces(verts), radius=R)


def contains(envelope: ForceEnvelope, f, tol: float = 0.0) -> bool:
    fx, fy = f
    if envelope.kind == "circle":
        return math.hypot(fx, fy) <= envelope.radius + tol
    for nx, ny, b in envelope.equalities:
        if abs(nx * fx + ny * fy - b) > tol:
            return False
    return all(nx * fx + ny * fy - b <= tol for nx, ny, b in envelope.halfspaces)


def violation(envelope: ForceEnvelope, f) -> float:
    """Largest constraint violation (N) of force f; 0 when inside."""
    fx, fy = f
    if envelope.kind == "circle":
        return max(0.0, math.hypot(fx, fy) - envelope.radius)
    v = 0.0
    for nx, ny, b in envelope.equalities:
        v = max(v, abs(nx * fx + ny * fy - b))
    for nx, ny, b in envelope.halfspaces:
        v = max(v, nx * fx + ny * fy - b)
    return v


@dataclass
class EnvelopeInputs:
    """Everything needed to build one wheel's envelope for the next period."""

    f_z_hat: float
    mu: float
    T_current: float = 0.0
    delta_current: float = 0.0
    f_x_current: float = 0.0
    toe: float = 0.0
    extra: dict = field(default_factory=dict)


def build_envelope(kind: str, state: VehicleState, wheel: int, inp: EnvelopeInputs,
                   vp: VehicleParams, tp: TireParams, ap: ActuatorParams, dt: float,
                   rate_limits: bool = True) -> ForceEnvelope | None:
    """Envelope of the configured variant; None means unconstrained."""
    if kind == "none":
        return None
    if kind == "circle":
        return circle_envelope(inp.f_z_hat, inp.mu)
    if kind == "octagon":
        return octagon_envelope(inp.f_z_hat, inp.mu)
    if kind == "extremum":
        return extremum_envelope(inp.f_z_hat, inp.mu)
    if kind == "polygon":
        T_rng = torque_bounds(inp.T_current, ap, dt, rate_limits)
        k_lo, k_hi = slip_ratio_bounds(state, wheel, inp.f_x_current, T_rng, vp, dt)
        d_rng = steer_bounds(inp.delta_current, ap, dt, rate_limits)
        a_lo, a_hi = slip_angle_bounds(state, wheel, d_rng, vp, inp.toe)
        lim = 0.5 * math.pi - 1e-3
        bounds = SlipBounds(k_lo, k_hi, max(a_lo, -lim), min(a_hi, lim))
        return polygon_vertices(bounds, inp.f_z_hat, inp.mu, tp)
    raise ValueError(f"unknown envelope kind {kind!r}")
