"""Arc-length parameterized reference paths and closest-point projection."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


class ReferenceExhausted(RuntimeError):
    """The vehicle has passed the end of the reference path."""


@dataclass(frozen=True)
class Projection:
    s: float
    offset: float  # signed lateral offset, positive left of the path
    heading: float
    curvature: float


class ReferencePath:
    """Polyline path with heading and curvature samples and a constant speed."""

    def __init__(self, x, y, heading, curvature, speed: float):
        self.x = np.asarray(x, dtype=float)
        self.y = np.asarray(y, dtype=float)
        self.heading = np.unwrap(np.asarray(heading, dtype=float))
        self.curvature = np.asarray(curvature, dtype=float)
        seg = np.hypot(np.diff(self.x), np.diff(self.y))
        self.s = np.concatenate([[0.0], np.cumsum(seg)])
        self.speed = float(speed)
        self._hint = 0
        self._xl = self.x.tolist()
        self._yl = self.y.tolist()

    def __len__(self):
        return len(self.x)

    @property
    def length(self) -> float:
        return float(self.s[-1])

    def curvature_at(self, s: float) -> float:
        return float(np.interp(s, self.s, self.curvature))

    def heading_at(self, s: float) -> float:
        return float(np.interp(s, self.s, self.heading))

    def point_at(self, s: float) -> tuple[float, float]:
        return float(np.interp(s, self.s, self.x)), float(np.interp(s, self.s, self.y))

    def _nearest(self, X: float, Y: float) -> int:
        """Nearest sample by local descent from the last hit, with a global fallback."""
        xs, ys, n = self._xl, self._yl, len(self._xl)
        i = self._hint

        def d2(j):
            return (xs[j] - X) ** 2 + (ys[j] - Y) ** 2

        best = d2(i)
        for direction in (1, -1):
            while 0 <= i + direction < n:
                d = d2(i + direction)
                if d >= best:
                    break
                i, best = i + direction, d
        # far from the path the local search may stall on the wrong branch
        if best > 25.0:
            i = int(np.argmin((self.x - X) ** 2 + (self.y - Y) ** 2))
        return i

    def project(self, X: float, Y: float) -> Projection:
        i = self._nearest(X, Y)
        self._hint = i
        n = len(self._xl)
        best = None
        for j in (i - 1, i):
            if j < 0 or j + 1 >= n:
                continue
            x0, y0 = self._xl[j], self._yl[j]
            dx, dy = self._xl[j + 1] - x0, self._yl[j + 1] - y0
            seg2 = dx * dx + dy * dy
            t = ((X - x0) * dx + (Y - y0) * dy) / seg2
            tc = min(max(t, 0.0), 1.0)
            px, py = x0 + tc * dx, y0 + tc * dy
            d2 = (X - px) ** 2 + (Y - py) ** 2
            if best is None or d2 < best[0]:
                best = (d2, j, t, tc, dx, dy, px, py)
        _, j, t, tc, dx, dy, px, py = best
        if j + 1 == n - 1 and t > 1.0:
            raise ReferenceExhausted("vehicle passed the end of the reference path")
        seg = math.sqrt(dx * dx + dy * dy)
        offset = (dx * (Y - py) - dy * (X - px)) / seg
        s = float(self.s[j]) + tc * seg
        hd = (1 - tc) * self.heading[j] + tc * self.heading[j + 1]
        k = (1 - tc) * self.curvature[j] + tc * self.curvature[j + 1]
        return Projection(s=s, offset=offset, heading=float(hd), curvature=float(k))

    def reset(self) -> None:
        self._hint = 0


def path_from_curvature(curvature_fn, length: float, speed: float, ds: float = 0.1) -> ReferencePath:
    """Integrate heading and position from a curvature profile k(s)."""
    n = int(round(length / ds)) + 1
    s = np.linspace(0.0, length, n)
    k = np.array([curvature_fn(si) for si in s])
    # trapezoidal heading, midpoint position
    heading = np.concatenate([[0.0], np.cumsum(0.5 * (k[1:] + k[:-1]) * np.diff(s))])
    mid = 0.5 * (heading[1:] + heading[:-1])
    x = np.concatenate([[0.0], np.cumsum(np.cos(mid) * np.diff(s))])
    y = np.concatenate([[0.0], np.cumsum(np.sin(mid) * np.diff(s))])
    return ReferencePath(x, y, heading, k, speed)


def path_from_lateral_profile(y_fn, x_end: float, speed: float, dx: float = 0.1,
                              refine: int = 10) -> ReferencePath:
    """Path y(x) sampled at dx; derivatives taken on a grid `refine` times finer."""
    n_fine = int(round(x_end / dx)) * refine + 1
    xf = np.linspace(0.0, x_end, n_fine)
    yf = np.array([y_fn(v) for v in xf])
    h = xf[1] - xf[0]
    d1 = np.gradient(yf, h, edge_order=2)
    d2 = np.gradient(d1, h, edge_order=2)
    heading = np.arctan(d1)
    curvature = d2 / (1.0 + d1 * d1) ** 1.5
    sl = slice(None, None, refine)
    return ReferencePath(xf[sl], yf[sl], heading[sl], curvature[sl], speed)
