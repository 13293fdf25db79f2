"""Canonical equations for the dominant alleles of a monomorphic population.

The dominant pair (xbar, ybar) moves by

    curv_x(t) * dxbar/dt = dm/dx(xbar, ybar),   curv_y(t) * dybar/dt = dm/dy(xbar, ybar)

where the curvatures are transported from their initial values,

    curv_x(t) = c0x - int_0^t d2m/dx2(xbar(t), ybar(s)) ds

(and symmetrically for y). The time integral runs over the stored trajectory
with the trapezoidal rule, with the x argument frozen at the current xbar.
When d2m/dx2 does not depend on x (true for all polynomial-of-degree-two-in-x
selections) a running sum makes each step O(1); otherwise the full history is
re-integrated, O(N) per stage.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DomainError, SingularityError
from .grid import fmt17
from .selector import SelectionFn

CURVATURE_TOL = 1e-10

__all__ = [
    "CanonicalState", "curvature_x", "curvature_y", "canonical_rhs",
    "integrate_canonical", "fixed_point_example3", "closed_form",
    "write_trajectory_csv",
]


@dataclass
class CanonicalState:
    t: float
    xbar: float
    ybar: float
    c0x: float = -2.0
    c0y: float = -2.0
    mode: str = "haploid"
    ts: list = field(default_factory=list)
    xs: list = field(default_factory=list)
    ys: list = field(default_factory=list)
    curv_xs: list = field(default_factory=list)
    curv_ys: list = field(default_factory=list)
    # flagged when the frozen-x curvature formula is only approximate
    moving_point_approx: bool = False

    @classmethod
    def start(cls, x0, y0, c0x=-2.0, c0y=-2.0, mode="haploid") -> "CanonicalState":
        if mode == "diploid":
            y0, c0y = x0, c0x
        return cls(t=0.0, xbar=x0, ybar=y0, c0x=c0x, c0y=c0y, mode=mode,
                   ts=[0.0], xs=[x0], ys=[y0], curv_xs=[c0x], curv_ys=[c0y])

    @property
    def history(self) -> list[tuple[float, float, float]]:
        return list(zip(self.ts, self.xs, self.ys))


class _Transport:
    """Trapezoid integrals of d2m/dx2(x, ybar(s)) and d2m/dy2(xbar(s), y)."""

    def __init__(self, m: SelectionFn, s: CanonicalState):
        self.m = m
        self.s = s
        self.frozen_x = not m.dxx_depends_on_x
        self.frozen_y = not m.dyy_depends_on_y
        self.sum_x = 0.0
        self.sum_y = 0.0
        # cached integrand values at the last accepted point (only used when frozen)
        self.last_gx = None
        self.last_gy = None
        self._rebuild()

    def _rebuild(self):
        s, m = self.s, self.m
        ts = np.asarray(s.ts)
        if self.frozen_x:
            gx = np.asarray(m.dxx(0.0, np.asarray(s.ys)), dtype=float) * np.ones(len(ts))
            self.sum_x = float(np.trapezoid(gx, ts)) if len(ts) > 1 else 0.0
            self.last_gx = float(gx[-1])
        if self.frozen_y:
            gy = np.asarray(m.dyy(np.asarray(s.xs), 0.0), dtype=float) * np.ones(len(ts))
            self.sum_y = float(np.trapezoid(gy, ts)) if len(ts) > 1 else 0.0
            self.last_gy = float(gy[-1])

    def integral_x(self, x: float) -> float:
        """int_0^{t_k} d2m/dx2(x, ybar(s)) ds over the accepted history."""
        if self.frozen_x:
            return self.sum_x
        s = self.s
        if len(s.ts) < 2:
            return 0.0
        g = np.asarray(self.m.dxx(x, np.asarray(s.ys)), dtype=float) * np.ones(len(s.ts))
        return float(np.trapezoid(g, s.ts))

    def integral_y(self, y: float) -> float:
        if self.frozen_y:
            return self.sum_y
        s = self.s
        if len(s.ts) < 2:
            return 0.0
        g = np.asarray(self.m.dyy(np.asarray(s.xs), y), dtype=float) * np.ones(len(s.ts))
        return float(np.trapezoid(g, s.ts))

    def curvatures(self, h: float, x: float, y: float) -> tuple[float, float]:
        """Curvatures at t_k + h for the stage point (x, y)."""
        s, m = self.s, self.m
        yk, xk = s.ys[-1], s.xs[-1]
        kx = s.c0x - (self.integral_x(x) + 0.5 * h * (m.dxx(x, yk) + m.dxx(x, y)))
        ky = s.c0y - (self.integral_y(y) + 0.5 * h * (m.dyy(xk, y) + m.dyy(x, y)))
        return float(kx), float(ky)

    def accept(self, h: float, x: float, y: float):
        s, m = self.s, self.m
        if self.frozen_x:
            gx = float(m.dxx(x, y))
            self.sum_x += 0.5 * h * (self.last_gx + gx)
            self.last_gx = gx
        if self.frozen_y:
            gy = float(m.dyy(x, y))
            self.sum_y += 0.5 * h * (self.last_gy + gy)
            self.last_gy = gy
        s.t = s.ts[-1] + h
        s.xbar, s.ybar = x, y
        s.ts.append(s.t)
        s.xs.append(x)
        s.ys.append(y)
        kx, ky = self.curvatures(0.0, x, y)
        s.curv_xs.append(kx)
        s.curv_ys.append(ky)


def _check(kx: float, ky: float, t: float):
    if kx >= -CURVATURE_TOL:
        raise SingularityError(f"x-curvature degenerate ({kx:g})", t)
    if ky >= -CURVATURE_TOL:
        raise SingularityError(f"y-curvature degenerate ({ky:g})", t)


def curvature_x(s: CanonicalState, m: SelectionFn) -> float:
    """Transported x-curvature at the current time and current xbar."""
    if not s.ts:
        raise ValueError("empty history")
    k = s.c0x - _Transport(m, s).integral_x(s.xbar)
    if k >= -CURVATURE_TOL:
        raise SingularityError(f"x-curvature degenerate ({k:g})", s.t)
    return k


def curvature_y(s: CanonicalState, m: SelectionFn) -> float:
    if not s.ts:
        raise ValueError("empty history")
    k = s.c0y - _Transport(m, s).integral_y(s.ybar)
    if k >= -CURVATURE_TOL:
        raise SingularityError(f"y-curvature degenerate ({k:g})", s.t)
    return k


def canonical_rhs(s: CanonicalState, m: SelectionFn) -> tuple[float, float]:
    kx, ky = curvature_x(s, m), curvature_y(s, m)
    gx, gy = m.grad(s.xbar, s.ybar)
    return gx / kx, gy / ky


def integrate_canonical(x0: float, y0: float, m: SelectionFn, T: float, dt: float,
                        mode: str = "haploid", c0x: float = -2.0,
                        c0y: float = -2.0) -> CanonicalState:
    """RK4 on the canonical equations over [0, T] with uniform steps <= dt.

    In diploid mode only xbar is integrated (dm/dx evaluated on the
    diagonal) and ybar is set equal to it.
    """
    if not dt > 0:
        raise ValueError("dt must be positive")
    if c0x >= 0 or c0y >= 0:
        raise SingularityError("initial curvature must be negative", 0.0)
    s = CanonicalState.start(x0, y0, c0x, c0y, mode)
    tr = _Transport(m, s)
    s.moving_point_approx = not (tr.frozen_x and tr.frozen_y)
    if T <= 0:
        return s
    nsteps = max(1, math.ceil(T / dt * (1 - 1e-12)))
    h = T / nsteps
    diploid = mode == "diploid"

    def f(c, x, y):
        kx, ky = tr.curvatures(c * h, x, y)
        _check(kx, ky, s.t + c * h)
        gx, gy = m.grad(x, y)
        if diploid:
            return gx / kx, gx / kx
        return gx / kx, gy / ky

    for _ in range(nsteps):
        x, y = s.xbar, s.ybar
        a1, b1 = f(0.0, x, y)
        a2, b2 = f(0.5, x + 0.5 * h * a1, y + 0.5 * h * b1)
        a3, b3 = f(0.5, x + 0.5 * h * a2, y + 0.5 * h * b2)
        a4, b4 = f(1.0, x + h * a3, y + h * b3)
        xn = x + h / 6 * (a1 + 2 * a2 + 2 * a3 + a4)
        yn = xn if diploid else y + h / 6 * (b1 + 2 * b2 + 2 * b3 + b4)
        if not (math.isfinite(xn) and math.isfinite(yn)):
            raise SingularityError("non-finite trajectory", s.t + h)
        tr.accept(h, xn, yn)
        _check(s.curv_xs[-1], s.curv_ys[-1], s.t)
    return s


def fixed_point_example3(x0: float, y0: float) -> tuple[float, float]:
    """Positive solution of xF*yF = 1, yF^2 - xF^2 = y0^2 - x0^2."""
    if x0 <= 0 or y0 <= 0:
        raise DomainError(f"need a positive starting point, got ({x0}, {y0})")
    if x0 > y0:
        yf, xf = fixed_point_example3(y0, x0)
        return xf, yf
    d = y0 * y0 - x0 * x0
    s = 2.0 / (d + math.sqrt(d * d + 4.0))  # s = xF^2, root of s^2 + d s - 1
    xf = math.sqrt(s)
    return xf, 1.0 / xf


def closed_form(example: str, x0: float, y0: float, t: float,
                mode: str = "haploid") -> tuple[float, float]:
    """Exact dominant alleles for ``sum_sq`` (x^2+y^2) and ``squared_sum`` ((x+y)^2)."""
    if t < 0:
        raise ValueError("t must be non-negative")
    if example == "sum_sq":
        if mode == "diploid":
            return x0 / (t + 1), x0 / (t + 1)
        return x0 / (t + 1), y0 / (t + 1)
    if example == "squared_sum":
        if mode == "diploid":
            v = x0 / (t + 1) ** 2
            return v, v
        decay = 1.0 / (2 * (t + 1) ** 2)
        return ((x0 - y0) / 2 + (x0 + y0) * decay,
                (y0 - x0) / 2 + (x0 + y0) * decay)
    raise ValueError(f"no closed form for {example!r}")


TRAJECTORY_FIELDS = ("t", "xbar", "ybar", "curv_x", "curv_y")


def trajectory_csv_text(s: CanonicalState, every: int = 1) -> str:
    """``t,xbar,ybar,curv_x,curv_y`` at every ``every``-th accepted step (and the last)."""
    lines = [",".join(TRAJECTORY_FIELDS)]
    n = len(s.ts)
    for k in range(n):
        if k % every and k != n - 1:
            continue
        lines.append(",".join(fmt17(v) for v in (s.ts[k], s.xs[k], s.ys[k],
                                                  s.curv_xs[k], s.curv_ys[k])))
    return "\n".join(lines) + "\n"


def write_trajectory_csv(path: str | Path, s: CanonicalState, every: int = 1) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write(trajectory_csv_text(s, every))
