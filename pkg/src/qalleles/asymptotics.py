"""Small-variance diagnostics of a density snapshot.

Everything here is a pure function of a field (or a state) so it can run on
snapshots handed off from the stepping loop.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .engine import FLOOR_REL, ModelParams, SimState
from .errors import StateError
from .grid import Field2D, argmax, argmax_index, marginals
from .selector import SelectionFn

NU_REL_THRESHOLD = 1e-12

__all__ = [
    "HopfColeView", "NuField", "BVDiagnostic", "hopf_cole", "nu_field",
    "additivity_defect", "additivity_defect_rows", "conditional_slice_x",
    "conditional_slice_y", "bv_diagnostic", "support_set", "mode_count",
    "default_support_tol", "Snapshot", "snapshot",
]


@dataclass(frozen=True)
class HopfColeView:
    """``u = eps*log(eps*n)`` clamped below at ``u_floor``.

    ``u_x_marg = eps*log(rho_x)`` (a function of y) and
    ``u_y_marg = eps*log(rho_y)`` (a function of x) stand in for the
    marginal potentials.
    """

    u: Field2D
    clamped: np.ndarray
    u_x_marg: np.ndarray
    u_y_marg: np.ndarray
    u_floor: float
    epsilon: float

    @property
    def u_max(self) -> float:
        return float(self.u.values.max())

    @classmethod
    def from_potential(cls, u: Field2D, epsilon: float, u_floor: float = -math.inf):
        """View built directly from a potential (no density behind it)."""
        vals = np.maximum(u.values, u_floor)
        n = np.exp(vals / epsilon) / epsilon
        mg = marginals(Field2D(u.grid, n))
        with np.errstate(divide="ignore"):
            return cls(Field2D(u.grid, vals), vals <= u_floor,
                       epsilon * np.log(mg.rho_x), epsilon * np.log(mg.rho_y),
                       u_floor, epsilon)


def hopf_cole(n: Field2D, epsilon: float, floor_value: float | None = None) -> HopfColeView:
    """Hopf-Cole potential of a nonnegative density.

    ``floor_value`` defaults to the engine's positivity floor,
    ``1e-250 * max n``; nodes at or below it are reported as clamped.
    """
    v = n.values
    if np.any(v < 0):
        raise StateError("density has negative values")
    if floor_value is None:
        floor_value = FLOOR_REL * float(v.max())
    if not floor_value > 0:
        raise StateError("density vanishes identically")
    u_floor = epsilon * math.log(epsilon * floor_value)
    clamped = v <= floor_value
    u = epsilon * np.log(epsilon * np.maximum(v, floor_value))
    mg = marginals(n)
    return HopfColeView(
        u=Field2D(n.grid, u),
        clamped=clamped,
        u_x_marg=epsilon * np.log(mg.rho_x),
        u_y_marg=epsilon * np.log(mg.rho_y),
        u_floor=u_floor,
        epsilon=epsilon,
    )


@dataclass(frozen=True)
class NuField:
    nu: Field2D
    mask: np.ndarray
    observed_min: float
    observed_max: float


def nu_field(n: Field2D, rel_threshold: float = NU_REL_THRESHOLD) -> NuField:
    """``rho_x(y) * rho_y(x) / (n(x,y) * rho)`` on nodes where n > rel_threshold * max n.

    Nodes outside the mask hold NaN-free placeholder ones.
    """
    mg = marginals(n)
    if not mg.rho > 0:
        raise StateError("total mass is not positive")
    v = n.values
    mask = v > rel_threshold * float(v.max())
    nu = np.ones_like(v)
    outer = np.multiply.outer(mg.rho_y, mg.rho_x)
    nu[mask] = outer[mask] / (v[mask] * mg.rho)
    return NuField(Field2D(n.grid, nu), mask, float(nu[mask].min()), float(nu[mask].max()))


def _defect_matrix(view: HopfColeView) -> np.ndarray:
    u = view.u.values
    d = np.abs(u - u.max(axis=1, keepdims=True) - u.max(axis=0, keepdims=True))
    return np.where(view.clamped, np.nan, d)


def additivity_defect(view: HopfColeView) -> float:
    """max over unclamped nodes of |u(x,y) - max_y' u(x,y') - max_x' u(x',y)|."""
    d = _defect_matrix(view)
    if np.all(np.isnan(d)):
        return 0.0
    return float(np.nanmax(d))


def additivity_defect_rows(view: HopfColeView) -> tuple[float, float]:
    """(worst, median) of the per-row (fixed x) defects, unclamped rows only."""
    d = _defect_matrix(view)
    rows = [np.nanmax(r) for r in d if not np.all(np.isnan(r))]
    if not rows:
        return 0.0, 0.0
    return float(np.max(rows)), float(np.median(rows))


def conditional_slice_x(n: Field2D, y_index: int) -> np.ndarray:
    """x-distribution n(., y_j) / rho_x(y_j); trapezoid-integrates to one."""
    g = n.grid
    col = n.values[:, y_index]
    rx = float(np.dot(g.wx, col))
    if not rx > 0:
        raise StateError(f"marginal vanishes at y index {y_index}")
    return col / rx


def conditional_slice_y(n: Field2D, x_index: int) -> np.ndarray:
    g = n.grid
    row = n.values[x_index, :]
    ry = float(np.dot(g.wy, row))
    if not ry > 0:
        raise StateError(f"marginal vanishes at x index {x_index}")
    return row / ry


@dataclass(frozen=True)
class BVDiagnostic:
    t: float
    I: float
    I_neg: float


def bv_diagnostic(state: SimState, m: SelectionFn, p: ModelParams) -> BVDiagnostic:
    """Mass growth rate from the exact balance, ((r - kappa rho) rho - int m n) / eps."""
    rho = state.rho
    selection = state.grid.quad(m.values * state.n.values)
    rate = ((p.r - p.kappa * rho) * rho - selection) / p.epsilon
    return BVDiagnostic(t=state.t, I=rate, I_neg=max(-rate, 0.0))


def default_support_tol(epsilon: float) -> float:
    return 4 * epsilon * math.log(1 / epsilon)


def support_set(view: HopfColeView, tol: float | None = None) -> list[tuple[int, int]]:
    """Grid indices (i, j) with u >= max u - tol."""
    if tol is None:
        tol = default_support_tol(view.epsilon)
    if not tol > 0:
        raise ValueError("tol must be positive")
    u = view.u.values
    idx = np.argwhere(u >= u.max() - tol)
    return [(int(i), int(j)) for i, j in idx]


def support_diameter(view: HopfColeView, tol: float | None = None) -> float:
    g = view.u.grid
    pts = support_set(view, tol)
    xs = np.array([g.xs[i] for i, _ in pts])
    ys = np.array([g.ys[j] for _, j in pts])
    return float(math.hypot(xs.max() - xs.min(), ys.max() - ys.min()))


def mode_count(marg: np.ndarray, rel_threshold: float = 0.1, tie_rel: float = 1e-9) -> int:
    """Number of local maxima above ``rel_threshold * max``.

    Neighbouring values within ``tie_rel * max`` of each other form one
    plateau, so a peak centred between two nodes counts once whichever way
    rounding breaks the tie. A plateau is a mode when it is strictly higher
    than the plateaus on both sides; the ends of the vector count as -inf.
    """
    if not 0 < rel_threshold < 1:
        raise ValueError("rel_threshold must lie in (0, 1)")
    v = np.asarray(marg, dtype=float)
    top = float(v.max())
    tie = tie_rel * abs(top)
    # plateau heights: split wherever consecutive values differ by more than tie
    breaks = np.flatnonzero(np.abs(np.diff(v)) > tie) + 1
    levels = np.array([seg.max() for seg in np.split(v, breaks)])
    padded = np.concatenate(([-np.inf], levels, [-np.inf]))
    peak = (levels > padded[:-2]) & (levels > padded[2:])
    return int(np.count_nonzero(peak & (levels > rel_threshold * top)))


@dataclass(frozen=True)
class Snapshot:
    """One diagnostics row."""

    t: float
    rho: float
    xbar: float
    ybar: float
    nu_min: float
    nu_max: float
    add_defect: float
    u_max: float
    I: float
    I_neg: float
    modes_x: int
    modes_y: int

    FIELDS = ("t", "rho", "xbar", "ybar", "nu_min", "nu_max", "add_defect",
              "u_max", "I", "I_neg", "modes_x", "modes_y")


def snapshot(state: SimState, m: SelectionFn, p: ModelParams,
             mode_threshold: float = 0.1) -> Snapshot:
    view = hopf_cole(state.n, p.epsilon)
    nu = nu_field(state.n)
    bv = bv_diagnostic(state, m, p)
    xbar, ybar = argmax(state.n)
    return Snapshot(
        t=state.t, rho=state.rho, xbar=xbar, ybar=ybar,
        nu_min=nu.observed_min, nu_max=nu.observed_max,
        add_defect=additivity_defect(view), u_max=view.u_max,
        I=bv.I, I_neg=bv.I_neg,
        modes_x=mode_count(state.marg.rho_x, mode_threshold),
        modes_y=mode_count(state.marg.rho_y, mode_threshold),
    )


def argmax_cell(state: SimState) -> tuple[int, int]:
    return argmax_index(state.n.values)
