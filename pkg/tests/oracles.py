"""Independent reference computations used by the tests.

None of these share code with the package beyond parameter containers.
"""

import math

import numpy as np


def brush_reference(kappa, alpha, f_z, mu, K_s, K_alpha):
    """Brush model written directly from the textbook polynomial form."""
    sx = K_s * kappa / (1 + kappa)
    sy = K_alpha * math.tan(alpha) / (1 + kappa)
    g = math.sqrt(sx * sx + sy * sy)
    if g == 0:
        return 0.0, 0.0
    F = mu * f_z
    f = g - g * g / (3 * F) + g ** 3 / (27 * F * F) if g <= 3 * F else F
    return sx / g * f, -sy / g * f


def project_halfspaces(z, A, b, iters=400):
    """Euclidean projection onto {A x <= b} by Dykstra's alternating projections."""
    x = z.copy()
    incr = np.zeros((len(A), len(z)))
    for _ in range(iters):
        x_old = x.copy()
        for i in range(len(A)):
            y = x + incr[i]
            viol = A[i] @ y - b[i]
            x = y - max(viol, 0.0) / (A[i] @ A[i]) * A[i]
            incr[i] = y - x
        if np.max(np.abs(x - x_old)) < 1e-15:
            break
    return x


def projected_gradient_qp(H, c, A, b, x0, iters=20000):
    """min 0.5 x'Hx + c'x s.t. Ax <= b by accelerated projected gradient."""
    L = np.linalg.eigvalsh(H).max()
    x = project_halfspaces(x0, A, b)
    y, t = x.copy(), 1.0
    for _ in range(iters):
        x_new = project_halfspaces(y - (H @ y + c) / L, A, b, iters=200)
        t_new = 0.5 * (1 + math.sqrt(1 + 4 * t * t))
        y = x_new + (t - 1) / t_new * (x_new - x)
        if np.max(np.abs(x_new - x)) < 1e-13:
            x = x_new
            break
        x, t = x_new, t_new
    return x


def sample_attainable(bounds, f_z, mu, K_s, K_alpha, n, rng):
    """Forces of uniformly sampled (kappa, alpha) inside slip bounds."""
    k = rng.uniform(bounds.kappa_lo, bounds.kappa_hi, n)
    a = rng.uniform(bounds.alpha_lo, bounds.alpha_hi, n)
    return np.array([brush_reference(ki, ai, f_z, mu, K_s, K_alpha) for ki, ai in zip(k, a)])


def project_polygon(p, vertices):
    """Exact Euclidean projection of a 2-D point onto a CCW convex polygon (or segment/point)."""
    v = np.asarray(vertices, dtype=float)
    n = len(v)
    if n == 1:
        return v[0].copy()
    if n >= 3:
        e = np.roll(v, -1, axis=0) - v
        cross = e[:, 0] * (p[1] - v[:, 1]) - e[:, 1] * (p[0] - v[:, 0])
        if np.all(cross >= 0):
            return p.copy()
    best, best_d = None, math.inf
    for i in range(n if n >= 3 else 1):
        a, b = v[i], v[(i + 1) % n]
        ab = b - a
        t = min(max(float((p - a) @ ab) / float(ab @ ab), 0.0), 1.0)
        q = a + t * ab
        d = float((p - q) @ (p - q))
        if d < best_d:
            best, best_d = q, d
    return best


def allocation_oracle(problem, iters=200000, tol=1e-12):
    """FISTA with adaptive restart on the allocation objective, per-wheel exact projection.

    Works in x = f / F_ref; the objective is rebuilt from the problem fields rather than
    taken from the solver's quadratic form.
    """
    F = problem.force_scale
    S = np.array([1 / F, 1 / F, 1 / (F * problem.moment_arm)])
    A = (S[:, None] * np.asarray(problem.M_f)) * F
    d = S * problem.demand.as_array()
    u2 = (problem.k_gamma * problem.W_f * F) ** 2
    v2 = (problem.k_d * problem.W_df) ** 2 if problem.mode == "dynamic" else np.zeros(8)
    xp = problem.f_prev / F
    Q = A.T @ A + np.diag(u2 + v2)
    q = -(A.T @ d) - v2 * xp
    L = float(np.linalg.eigvalsh(Q).max())
    polys = [np.asarray(e.vertices) / F if e is not None else None for e in problem.envelopes]

    def proj(z):
        out = z.copy()
        for w, poly in enumerate(polys):
            if poly is not None:
                out[2 * w:2 * w + 2] = project_polygon(z[2 * w:2 * w + 2], poly)
        return out

    def J(x):
        r = d - A @ x
        return float(r @ r + u2 @ (x * x) + v2 @ ((x - xp) ** 2))

    x = proj(np.zeros(8))
    y, t = x.copy(), 1.0
    for _ in range(iters):
        x_new = proj(y - (Q @ y + q) / L)
        if (y - x_new) @ (x_new - x) > 0:  # restart on non-monotone momentum
            t = 1.0
            y = x_new.copy()
        else:
            t_new = 0.5 * (1 + math.sqrt(1 + 4 * t * t))
            y = x_new + (t - 1) / t_new * (x_new - x)
            t = t_new
        if np.max(np.abs(x_new - x)) < tol:
            x = x_new
            break
        x = x_new
    return x * F, J(x)


def box_enumeration_qp(H, c, lo, hi):
    """min 1/2 x'Hx + c'x on a box by enumerating every lower/free/upper pattern."""
    import itertools
    n = len(c)
    best_x, best_J = None, math.inf
    for pattern in itertools.product((0, 1, 2), repeat=n):
        fixed = {i: (lo[i] if s == 0 else hi[i]) for i, s in enumerate(pattern) if s != 1}
        free = [i for i in range(n) if pattern[i] == 1]
        x = np.zeros(n)
        for i, val in fixed.items():
            x[i] = val
        if free:
            fi = np.array(free)
            rhs = -(c[fi] + H[np.ix_(fi, list(fixed))] @ x[list(fixed)]) if fixed else -c[fi]
            x[fi] = np.linalg.solve(H[np.ix_(fi, fi)], rhs)
        if np.any(x < lo - 1e-12) or np.any(x > hi + 1e-12):
            continue
        Jx = 0.5 * x @ H @ x + c @ x
        if Jx < best_J:
            best_x, best_J = x, Jx
    return best_x, best_J
