"""Weighted least-squares tire-force allocation.

The objective, with f the 8-vector [f_x1, f_y1, ..., f_x4, f_y4], is

    J = ||S (dF - M_f f)||^2 + k_gamma^2 ||W_f f||^2 [+ k_d^2 ||W_df (f - f_prev) / F_ref||^2]

where S divides force rows by F_ref = mu m g / 4 and the moment row by
F_ref * B/2, W_f = diag(1 / (mu f_z_hat)) and W_df = diag(1 / omega_channel).
All terms are dimensionless. Linear envelopes are solved by a dense primal
active-set method; the friction circle by SQP over tangent halfspaces.
"""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .envelope import ForceEnvelope

log = logging.getLogger(__name__)

KKT_TOL = 1e-8
MAX_ITER = 200
SQP_MAX_ITER = 30
SQP_STEP_TOL = 1e-6  # N


class AllocationError(RuntimeError):
    """Solver failure (non-convergence or infeasible constraints)."""


class AllocationInfeasible(AllocationError):
    pass


class AllocationNotConverged(AllocationError):
    def __init__(self, msg, last=None):
        super().__init__(msg)
        self.last = last


@dataclass(frozen=True)
class ForceDemand:
    F_x: float
    F_y: float
    M_z: float

    def as_array(self) -> np.ndarray:
        return np.array([self.F_x, self.F_y, self.M_z])


@dataclass(frozen=True)
class AllocationWeights:
    k_gamma: float = 0.05
    k_d: float = 0.3
    force_scale: float = 3016.6  # F_ref, N
    moment_arm: float = 0.74  # B/2, m

    def __post_init__(self):
        if not (self.k_gamma > 0 and self.k_d >= 0 and self.force_scale > 0 and self.moment_arm > 0):
            raise ValueError("allocation weights must be positive")


@dataclass
class AllocationProblem:
    demand: ForceDemand
    M_f: np.ndarray  # 3x8
    W_f: np.ndarray  # diagonal, 8
    W_df: np.ndarray  # diagonal, 8
    k_gamma: float
    k_d: float
    f_prev: np.ndarray
    envelopes: list  # ForceEnvelope or None per wheel
    mode: str = "static"
    force_scale: float = 3016.6
    moment_arm: float = 0.74

    @property
    def row_scale(self) -> np.ndarray:
        F = self.force_scale
        return np.array([1.0 / F, 1.0 / F, 1.0 / (F * self.moment_arm)])

    def quadratic(self):
        """Hessian and linear term of J in scaled variables x = f / F_ref."""
        F = self.force_scale
        Ms = self.row_scale[:, None] * self.M_f * F
        ds = self.row_scale * self.demand.as_array()
        u = self.k_gamma * self.W_f * F
        H = 2.0 * (Ms.T @ Ms + np.diag(u * u))
        c = -2.0 * Ms.T @ ds
        if self.mode == "dynamic":
            w = (self.k_d * self.W_df) ** 2
            H = H + 2.0 * np.diag(w)
            c = c - 2.0 * w * (self.f_prev / F)
        return H, c

    def objective(self, f) -> float:
        f = np.asarray(f, dtype=float)
        r = self.row_scale * (self.demand.as_array() - self.M_f @ f)
        J = float(r @ r) + float(np.sum((self.k_gamma * self.W_f * f) ** 2))
        if self.mode == "dynamic":
            J += float(np.sum((self.k_d * self.W_df * (f - self.f_prev) / self.force_scale) ** 2))
        return J

    def linear_constraints(self):
        """(A_in, b_in, A_eq, b_eq, owner_in, owner_eq) in scaled variables."""
        F = self.force_scale
        A_in, b_in, A_eq, b_eq, own_in, own_eq = [], [], [], [], [], []
        for w, env in enumerate(self.envelopes):
            if env is None or env.kind == "circle":
                continue
            for nx, ny, b in env.halfspaces:
                row = np.zeros(8)
                row[2 * w], row[2 * w + 1] = nx, ny
                A_in.append(row)
                b_in.append(b / F)
                own_in.append(w)
            for nx, ny, b in env.equalities:
                row = np.zeros(8)
                row[2 * w], row[2 * w + 1] = nx, ny
                A_eq.append(row)
                b_eq.append(b / F)
                own_eq.append(w)
        return (np.array(A_in).reshape(-1, 8), np.array(b_in), np.array(A_eq).reshape(-1, 8),
                np.array(b_eq), own_in, own_eq)


@dataclass
class AllocationResult:
    f: np.ndarray
    residual: float  # ||S (dF - M_f f)||, dimensionless
    residual_vector: np.ndarray  # dF - M_f f in N, N, N m
    active: tuple[int, ...]
    iterations: int
    kkt: dict = field(default_factory=dict)
    objective: float = 0.0
    converged: bool = True
    fallback: bool = False

    @property
    def kkt_max(self) -> float:
        return max(self.kkt.values()) if self.kkt else 0.0


def build_problem(demand: ForceDemand, M_f, f_z_hat, f_prev, envelopes,
                  weights: AllocationWeights, mode: str, mu: float = 1.0,
                  bandwidths=None) -> AllocationProblem:
    """Assemble the allocation QP; bandwidths (rad/s per channel) set W_df."""
    if mode not in ("static", "dynamic"):
        raise ValueError(f"unknown allocation mode {mode!r}")
    M_f = np.asarray(M_f, dtype=float)
    fz = np.asarray(f_z_hat, dtype=float)
    f_prev = np.asarray(f_prev, dtype=float)
    if M_f.shape != (3, 8) or fz.shape != (4,) or f_prev.shape != (8,):
        raise ValueError("allocation inputs have wrong shapes")
    dem = demand.as_array()
    if not (np.all(np.isfinite(M_f)) and np.all(np.isfinite(fz)) and np.all(np.isfinite(f_prev))
            and np.all(np.isfinite(dem))):
        raise ValueError("non-finite allocation input")
    if np.any(fz <= 0) or mu <= 0:
        raise ValueError("f_z_hat and mu must be positive")
    W_f = np.repeat(1.0 / (mu * fz), 2)
    if bandwidths is None:
        W_df = np.ones(8)
    else:
        bw = np.asarray(bandwidths, dtype=float)
        if bw.shape != (8,) or np.any(bw <= 0):
            raise ValueError("bandwidths must be 8 positive values")
        W_df = 1.0 / bw
    if len(envelopes) != 4:
        raise ValueError("need one envelope (or None) per wheel")
    return AllocationProblem(demand, M_f, W_f, W_df, weights.k_gamma, weights.k_d, f_prev,
                             list(envelopes), mode, weights.force_scale, weights.moment_arm)


# ---------------------------------------------------------------- dense QP core

@dataclass
class QPSolution:
    x: np.ndarray
    lam_in: np.ndarray
    lam_eq: np.ndarray
    active: list
    iterations: int


def _kkt_solve(H, g, A):
    """Solve [[H, A^T], [A, 0]] [p; lam] = [-g; 0]."""
    n, k = H.shape[0], A.shape[0]
    K = np.zeros((n + k, n + k))
    K[:n, :n] = H
    K[:n, n:] = A.T
    K[n:, :n] = A
    rhs = np.concatenate([-g, np.zeros(k)])
    sol = np.linalg.solve(K, rhs)
    return sol[:n], sol[n:]


def solve_qp(H, c, A_in, b_in, A_eq, b_eq, x0, working=(), max_iter: int = MAX_ITER,
             feas_tol: float = 1e-10) -> QPSolution:
    """Primal active-set method for min 1/2 x'Hx + c'x s.t. A_in x <= b_in, A_eq x = b_eq.

    x0 must be feasible. H must be positive definite.
    """
    H = np.asarray(H, dtype=float)
    c = np.asarray(c, dtype=float)
    n = H.shape[0]
    A_in = np.asarray(A_in, dtype=float).reshape(-1, n)
    A_eq = np.asarray(A_eq, dtype=float).reshape(-1, n)
    b_in = np.asarray(b_in, dtype=float)
    b_eq = np.asarray(b_eq, dtype=float)
    x = np.array(x0, dtype=float)
    m_in, m_eq = A_in.shape[0], A_eq.shape[0]
    scale = 1.0 + np.max(np.abs(x))
    if m_in and np.max(A_in @ x - b_in) > feas_tol * scale * 1e3:
        raise AllocationInfeasible("starting point violates inequality constraints")
    if m_eq and np.max(np.abs(A_eq @ x - b_eq)) > feas_tol * scale * 1e3:
        raise AllocationInfeasible("starting point violates equality constraints")
    W = [i for i in working if 0 <= i < m_in]
    W = _independent(A_eq, A_in, W)
    at_min = False  # a full unblocked step lands on the working-set minimizer
    for it in range(1, max_iter + 1):
        A_w = np.vstack([A_eq, A_in[W]]) if W else A_eq
        g = H @ x + c
        p, lam = _kkt_solve(H, g, A_w)
        if at_min or np.max(np.abs(p)) <= 1e-13 * scale:
            at_min = False
            lam_w = lam[m_eq:]
            if not W or np.min(lam_w) >= -1e-14:
                lam_in = np.zeros(m_in)
                lam_in[W] = np.maximum(lam_w, 0.0)
                return QPSolution(x, lam_in, lam[:m_eq], sorted(W), it)
            W.pop(int(np.argmin(lam_w)))
            continue
        step, block = 1.0, None
        if m_in:
            Ap = A_in @ p
            slack = b_in - A_in @ x
            for i in range(m_in):
                if i in W or Ap[i] <= 1e-15:
                    continue
                t = max(slack[i], 0.0) / Ap[i]
                if t < step:
                    step, block = t, i
        x = x + step * p
        if block is not None:
            W.append(block)
        else:
            at_min = True
    raise AllocationNotConverged(f"active set did not converge in {max_iter} iterations", x)


def _independent(A_eq, A_in, W):
    """Drop working-set rows that are linearly dependent on earlier ones."""
    keep = []
    base = A_eq
    rank = np.linalg.matrix_rank(base) if base.size else 0
    for i in W:
        trial = np.vstack([base, A_in[i]]) if base.size else A_in[i:i + 1]
        r = np.linalg.matrix_rank(trial)
        if r > rank:
            keep.append(i)
            base, rank = trial, r
    return keep


def kkt_residuals(H, c, A_in, b_in, A_eq, b_eq, x, lam_in, lam_eq) -> dict:
    n = len(x)
    A_in = np.asarray(A_in, dtype=float).reshape(-1, n)
    A_eq = np.asarray(A_eq, dtype=float).reshape(-1, n)
    grad = H @ x + c + A_in.T @ lam_in + A_eq.T @ lam_eq
    s_in = A_in @ x - b_in if len(b_in) else np.zeros(0)
    s_eq = A_eq @ x - b_eq if len(b_eq) else np.zeros(0)
    primal = max([0.0] + list(np.maximum(s_in, 0.0)) + list(np.abs(s_eq)))
    return {
        "stationarity": float(np.max(np.abs(grad))) if n else 0.0,
        "primal": float(primal),
        "dual": float(max(0.0, -np.min(lam_in))) if len(lam_in) else 0.0,
        "complementarity": float(np.max(np.abs(lam_in * s_in))) if len(lam_in) else 0.0,
    }


# ---------------------------------------------------------------- starting points

def _interior_point(env: ForceEnvelope | None) -> tuple[float, float]:
    if env is None or env.kind == "circle":
        return 0.0, 0.0
    return env.centroid()


def _feasible_start(problem: AllocationProblem, x_hint=None) -> np.ndarray:
    """Per-wheel point on the segment from the envelope centroid toward x_hint."""
    F = problem.force_scale
    x0 = np.zeros(8)
    for w, env in enumerate(problem.envelopes):
        cx, cy = _interior_point(env)
        if env is None or x_hint is None or env.degenerate:
            x0[2 * w], x0[2 * w + 1] = cx, cy
            continue
        hx, hy = x_hint[2 * w] * F, x_hint[2 * w + 1] * F
        t = 1.0
        for nx, ny, b in env.halfspaces:
            den = nx * (hx - cx) + ny * (hy - cy)
            room = b - (nx * cx + ny * cy)
            if den > 0:
                t = min(t, max(room, 0.0) / den)
        t = max(0.0, t * (1.0 - 1e-12))
        x0[2 * w], x0[2 * w + 1] = cx + t * (hx - cx), cy + t * (hy - cy)
    return x0 / F


def _tight(A_in, b_in, x, tol=1e-12):
    if not len(b_in):
        return []
    s = b_in - A_in @ x
    return [int(i) for i in np.flatnonzero(s <= tol * (1.0 + np.abs(b_in)))]


def _result(problem, f, sol, kkt, iterations, converged=True) -> AllocationResult:
    rv = problem.demand.as_array() - problem.M_f @ f
    return AllocationResult(
        f=f, residual=float(np.linalg.norm(problem.row_scale * rv)), residual_vector=rv,
        active=tuple(sol.active) if sol is not None else (), iterations=iterations, kkt=kkt,
        objective=problem.objective(f), converged=converged)


def solve_active_set(problem: AllocationProblem, warm: np.ndarray | None = None) -> AllocationResult:
    """Exact optimum over linear (or absent) envelopes, KKT-certified."""
    if any(e is not None and e.kind == "circle" for e in problem.envelopes):
        raise ValueError("circle envelopes need solve_sqp_circle")
    H, c = problem.quadratic()
    A_in, b_in, A_eq, b_eq, _, _ = problem.linear_constraints()
    x_hint = None if warm is None else np.asarray(warm, dtype=float) / problem.force_scale
    x0 = _feasible_start(problem, x_hint)
    sol = solve_qp(H, c, A_in, b_in, A_eq, b_eq, x0, _tight(A_in, b_in, x0))
    kkt = kkt_residuals(H, c, A_in, b_in, A_eq, b_eq, sol.x, sol.lam_in, sol.lam_eq)
    if max(kkt.values()) > KKT_TOL:
        raise AllocationNotConverged(f"KKT certification failed: {kkt}", sol.x * problem.force_scale)
    return _result(problem, sol.x * problem.force_scale, sol, kkt, sol.iterations)


def solve_sqp_circle(problem: AllocationProblem, max_iter: int = SQP_MAX_ITER,
                     step_tol: float = SQP_STEP_TOL) -> AllocationResult:
    """Friction-circle QCQP by SQP with tangent-halfspace constraint linearization."""
    F = problem.force_scale
    H, c = problem.quadratic()
    radius = np.array([(e.radius / F) if e is not None else math.inf for e in problem.envelopes])
    x = np.linalg.solve(H, -c)
    mult = np.zeros(4)
    total_iter = 0
    sol = None
    for k in range(1, max_iter + 1):
        rows, rhs, wheels = [], [], []
        for w in range(4):
            if not math.isfinite(radius[w]):
                continue
            xw = x[2 * w:2 * w + 2]
            nrm2 = float(xw @ xw)
            if nrm2 <= (1e-6 * radius[w]) ** 2:
                continue
            row = np.zeros(8)
            row[2 * w:2 * w + 2] = 2.0 * xw
            rows.append(row)
            rhs.append(radius[w] ** 2 + nrm2)
            wheels.append(w)
        if k == 1 and all(float(x[2 * w:2 * w + 2] @ x[2 * w:2 * w + 2]) <= radius[w] ** 2
                          for w in range(4) if math.isfinite(radius[w])):
            kkt = kkt_residuals(H, c, [], [], [], [], x, np.zeros(0), np.zeros(0))
            return _result(problem, x * F, QPSolution(x, np.zeros(0), np.zeros(0), [], 1), kkt, 1)
        D = np.zeros(8)
        for w in range(4):
            D[2 * w:2 * w + 2] = 2.0 * mult[w]
        HL = H + np.diag(D)
        cL = c - D * x
        A_in = np.array(rows).reshape(-1, 8)
        b_in = np.array(rhs)
        x0 = np.zeros(8)  # origin satisfies every tangent halfspace
        sol = solve_qp(HL, cL, A_in, b_in, np.zeros((0, 8)), np.zeros(0), x0, ())
        total_iter += sol.iterations
        step = float(np.max(np.abs(sol.x - x))) * F
        x = sol.x
        mult = np.zeros(4)
        for j, w in enumerate(wheels):
            mult[w] = sol.lam_in[j]
        if step < step_tol:
            break
    else:
        raise AllocationNotConverged(f"SQP did not converge in {max_iter} iterations", x * F)
    f = x * F
    # KKT of the original QCQP, with the circle multipliers from the last subproblem
    grad = H @ x + c
    comp, primal = 0.0, 0.0
    for w in range(4):
        if not math.isfinite(radius[w]):
            continue
        xw = x[2 * w:2 * w + 2]
        g = float(xw @ xw) - radius[w] ** 2
        grad[2 * w:2 * w + 2] += 2.0 * mult[w] * xw
        primal = max(primal, g)
        comp = max(comp, abs(mult[w] * g))
    kkt = {"stationarity": float(np.max(np.abs(grad))), "primal": max(0.0, primal),
           "dual": float(max(0.0, -mult.min())), "complementarity": comp,
           "subproblem": kkt_residuals(HL, cL, A_in, b_in, [], [], sol.x, sol.lam_in,
                                       sol.lam_eq)["stationarity"]}
    for w in range(4):
        if math.isfinite(radius[w]) and math.hypot(f[2 * w], f[2 * w + 1]) > radius[w] * F + 1e-4:
            raise AllocationNotConverged("SQP result outside the friction circle", f)
    res = _result(problem, f, sol, kkt, total_iter)
    res.active = tuple(w for w in range(4) if mult[w] > 0)
    return res


# ---------------------------------------------------------------- dispatcher

class Allocator:
    """Stateful wrapper: keeps f_prev, warm starts and falls back on failure."""

    def __init__(self, weights: AllocationWeights, mode: str = "static", mu: float = 1.0):
        self.weights = weights
        self.mode = mode
        self.mu = mu
        self.f_prev = np.zeros(8)
        self.failures = 0

    def allocate(self, demand: ForceDemand, M_f, f_z_hat, envelopes,
                 bandwidths=None) -> AllocationResult:
        prob = build_problem(demand, M_f, f_z_hat, self.f_prev, envelopes, self.weights,
                             self.mode, self.mu, bandwidths)
        try:
            if any(e is not None and e.kind == "circle" for e in envelopes):
                res = solve_sqp_circle(prob)
            else:
                res = solve_active_set(prob, warm=self.f_prev)
        except AllocationNotConverged as exc:
            self.failures += 1
            log.warning("allocation fell back to the previous solution: %s", exc)
            res = _result(prob, self.f_prev.copy(), None, {}, 0, converged=False)
            res.fallback = True
        self.f_prev = np.array(res.f)
        return res


def allocate(demand: ForceDemand, context: dict) -> AllocationResult:
    """One-shot allocation from a context dict (M_f, f_z_hat, envelopes, allocator[, bandwidths])."""
    allocator: Allocator = context["allocator"]
    return allocator.allocate(demand, context["M_f"], context["f_z_hat"], context["envelopes"],
                              context.get("bandwidths"))


DIAGNOSTIC_COLUMNS = (["t", "F_x", "F_y", "M_z"] + [f"f{i}" for i in range(8)]
                      + ["active", "residual", "kkt_max", "iterations", "fallback"])


def write_diagnostics(path, rows) -> None:
    """rows: iterable of (t, ForceDemand, AllocationResult)."""
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(DIAGNOSTIC_COLUMNS)
        for t, dem, res in rows:
            wr.writerow([f"{t:.17g}", f"{dem.F_x:.17g}", f"{dem.F_y:.17g}", f"{dem.M_z:.17g}"]
                        + [f"{v:.17g}" for v in res.f]
                        + [" ".join(map(str, res.active)), f"{res.residual:.17g}",
                           f"{res.kkt_max:.17g}", res.iterations, int(res.fallback)])
