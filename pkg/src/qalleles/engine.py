"""Time integration of the rescaled genotype-density equation.

With ``n`` the density on I x J, ``rho_x(y)``/``rho_y(x)`` its marginals and
``rho`` its mass, the right-hand side is

    eps * dn/dt = (r/2) * (rho_y(x) * rho_x(y) / rho + n) - (m(x,y) + kappa*rho) * n

The one-locus diploid reading uses reproduction rate r/2 and mortality
m - r/2, which is the same operator; ``mode`` is only recorded so that
symmetry checks know to run.
"""

from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import StabilityError, StateError
from .grid import Field2D, GridSpec, Marginals, marginals
from .selector import SelectionFn

log = logging.getLogger(__name__)

FLOOR_REL = 1e-250
CFL_FACTOR = 0.2

__all__ = [
    "ModelParams", "SimState", "InitialCondition", "Bump", "H1Warning",
    "rhs", "step", "dt_stable", "marginal_residual", "advance", "logistic_mass",
]


class H1Warning(UserWarning):
    """The selection bound 4*sup|m| < r does not hold."""


@dataclass(frozen=True)
class ModelParams:
    r: float
    kappa: float
    epsilon: float
    sup_m: float = 0.0
    mode: str = "haploid"

    def __post_init__(self):
        if not (self.r > 0 and self.kappa > 0 and self.epsilon > 0):
            raise ValueError(f"r, kappa, epsilon must be positive: {self}")
        if self.mode not in ("haploid", "diploid"):
            raise ValueError(f"unknown mode {self.mode!r}")
        if self.sup_m < 0:
            raise ValueError("sup_m must be non-negative")

    @classmethod
    def for_selection(cls, r, kappa, epsilon, m: SelectionFn, mode="haploid",
                      warn: bool = True) -> "ModelParams":
        p = cls(r=r, kappa=kappa, epsilon=epsilon, sup_m=m.sup_m_on_grid, mode=mode)
        if warn and not p.h1:
            warnings.warn(
                f"4*sup|m| = {4 * p.sup_m:g} >= r = {p.r:g}; H1-dependent checks are skipped",
                H1Warning, stacklevel=2,
            )
        return p

    @property
    def h1(self) -> bool:
        return 4 * self.sup_m < self.r

    @property
    def rho_minus(self) -> float:
        return (self.r - self.sup_m) / self.kappa

    @property
    def rho_plus(self) -> float:
        return self.r / self.kappa

    @property
    def nu_m(self) -> float:
        """Tightest admissible lower nu bound, 1 - 4 sup|m| / r (NaN without H1)."""
        return 1 - 4 * self.sup_m / self.r if self.h1 else math.nan

    @property
    def nu_M(self) -> float:
        return 1 + 4 * self.sup_m / self.r if self.h1 else math.nan

    @property
    def delta(self) -> float:
        return self.r - 2 * self.sup_m

    def default_mass(self) -> float:
        """Midpoint of the admissible initial-mass interval (clipped at 0)."""
        return 0.5 * (max(self.rho_minus, 0.0) + self.rho_plus)


@dataclass(frozen=True)
class Bump:
    x0: float
    y0: float
    weight: float = 1.0

    def __post_init__(self):
        if not self.weight > 0:
            raise ValueError(f"bump weight must be positive, got {self.weight}")


@dataclass(frozen=True)
class InitialCondition:
    """Sum of Gaussian bumps exp(-|z - z0|^2 / eps) / eps rescaled to ``target_mass``."""

    bumps: tuple
    target_mass: Optional[float] = None

    def __post_init__(self):
        object.__setattr__(self, "bumps", tuple(
            b if isinstance(b, Bump) else Bump(*b) for b in self.bumps))
        if not self.bumps:
            raise ValueError("initial condition needs at least one bump")

    def build(self, grid: GridSpec, p: ModelParams) -> Field2D:
        X, Y = grid.mesh()
        eps = p.epsilon
        n = np.zeros(grid.shape)
        for b in self.bumps:
            n += b.weight * np.exp(-((X - b.x0) ** 2 + (Y - b.y0) ** 2) / eps) / eps
        mass = grid.quad(n)
        if not mass > 0:
            raise StateError("initial density has zero mass on the grid")
        target = p.default_mass() if self.target_mass is None else self.target_mass
        n *= target / mass
        apply_floor(n)
        return Field2D(grid, n)

    def state(self, grid: GridSpec, p: ModelParams) -> "SimState":
        return SimState.from_field(0.0, self.build(grid, p))


def apply_floor(values: np.ndarray) -> int:
    """Clamp values below FLOOR_REL * max in place; returns the number clamped."""
    floor = FLOOR_REL * float(values.max())
    low = values < floor
    count = int(low.sum())
    if count:
        values[low] = floor
    return count


@dataclass(frozen=True)
class SimState:
    t: float
    n: Field2D
    marg: Marginals
    floor_hits: int = 0
    steps: int = 0

    @classmethod
    def from_field(cls, t: float, n: Field2D, floor_hits: int = 0, steps: int = 0):
        return cls(t=t, n=n, marg=marginals(n), floor_hits=floor_hits, steps=steps)

    @property
    def grid(self) -> GridSpec:
        return self.n.grid

    @property
    def rho(self) -> float:
        return self.marg.rho


def _rhs_values(values: np.ndarray, grid: GridSpec, m_values: np.ndarray,
                p: ModelParams) -> np.ndarray:
    rho_y = grid.integrate_y(values)
    rho_x = grid.integrate_x(values)
    rho = float(np.dot(grid.wx, rho_y))
    if not (rho > 0 and math.isfinite(rho)):
        raise StateError(f"total mass is {rho!r}")
    repro = 0.5 * p.r * (np.multiply.outer(rho_y, rho_x) / rho + values)
    return (repro - (m_values + p.kappa * rho) * values) / p.epsilon


def rhs(state: SimState, m: SelectionFn, p: ModelParams) -> Field2D:
    """Time derivative of the density at ``state``."""
    out = _rhs_values(state.n.values, state.grid, m.values, p)
    if not np.all(np.isfinite(out)):
        raise StateError("non-finite right-hand side")
    return Field2D(state.grid, out)


def dt_stable(p: ModelParams, m: SelectionFn, cfl_factor: float = CFL_FACTOR) -> float:
    """Largest step accepted by :func:`step`; scales linearly with epsilon."""
    nu_cap = max(p.nu_M, 2.0) if p.h1 else 2.0
    rate = p.r * (1 + nu_cap) / 2 + m.sup_m_on_grid + p.kappa * p.rho_plus
    return cfl_factor * p.epsilon / rate


def step(state: SimState, dt: float, m: SelectionFn, p: ModelParams,
         check_dt: bool = True) -> SimState:
    """One classical RK4 step followed by the positivity floor."""
    if not dt > 0:
        raise ValueError(f"dt must be positive, got {dt}")
    if check_dt and dt > dt_stable(p, m) * (1 + 1e-12):
        raise ValueError(f"dt={dt:g} exceeds dt_stable={dt_stable(p, m):g}")
    g, mv, n0 = state.grid, m.values, state.n.values
    k1 = _rhs_values(n0, g, mv, p)
    k2 = _rhs_values(n0 + 0.5 * dt * k1, g, mv, p)
    k3 = _rhs_values(n0 + 0.5 * dt * k2, g, mv, p)
    k4 = _rhs_values(n0 + dt * k3, g, mv, p)
    n1 = n0 + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    if not np.all(np.isfinite(n1)):
        raise StabilityError(f"non-finite density after step at t={state.t + dt:g}")
    hits = apply_floor(n1)
    if hits:
        log.debug("positivity floor clamped %d nodes at t=%g", hits, state.t + dt)
    return SimState.from_field(state.t + dt, _field(g, n1),
                               floor_hits=state.floor_hits + hits, steps=state.steps + 1)


def _field(grid: GridSpec, values: np.ndarray) -> Field2D:
    # values were already checked finite; skip the second validation pass
    f = object.__new__(Field2D)
    object.__setattr__(f, "grid", grid)
    object.__setattr__(f, "values", values)
    return f


def advance(state: SimState, t_end: float, m: SelectionFn, p: ModelParams,
            dt_max: Optional[float] = None,
            on_step: Optional[Callable[[SimState], None]] = None) -> SimState:
    """Step uniformly from ``state.t`` to exactly ``t_end``.

    The interval is split into the smallest number of equal steps not
    exceeding ``dt_max`` (default :func:`dt_stable`).
    """
    span = t_end - state.t
    if span < 0:
        raise ValueError(f"t_end={t_end} is before current time {state.t}")
    if span == 0:
        return state
    dt_max = dt_stable(p, m) if dt_max is None else dt_max
    nsteps = max(1, math.ceil(span / dt_max * (1 - 1e-12)))
    dt = span / nsteps
    t0 = state.t
    for k in range(nsteps):
        state = step(state, dt, m, p, check_dt=False)
        if k == nsteps - 1:
            state = SimState(t=t_end, n=state.n, marg=state.marg,
                             floor_hits=state.floor_hits, steps=state.steps)
        else:
            state = SimState(t=t0 + (k + 1) * dt, n=state.n, marg=state.marg,
                             floor_hits=state.floor_hits, steps=state.steps)
        if on_step is not None:
            on_step(state)
    return state


def marginal_residual(state: SimState, m: SelectionFn, p: ModelParams
                      ) -> tuple[np.ndarray, np.ndarray]:
    """Right-hand sides of the marginal balance equations.

    ``res_x[j] = ((r - kappa*rho) * rho_x[j] - int m n dx) / eps`` and the
    analogous ``res_y`` over y.
    """
    g, mg = state.grid, state.marg
    mn = m.values * state.n.values
    growth = p.r - p.kappa * mg.rho
    res_x = (growth * mg.rho_x - g.integrate_x(mn)) / p.epsilon
    res_y = (growth * mg.rho_y - g.integrate_y(mn)) / p.epsilon
    return res_x, res_y


def logistic_mass(t: float, rho0: float, p: ModelParams) -> float:
    """Total mass under zero selection (closed-form logistic solution)."""
    e = math.exp(-p.r * t / p.epsilon)
    return 1.0 / (e / rho0 + (p.kappa / p.r) * (1.0 - e))


def symmetry_defect(n: Field2D) -> float:
    """max |n(x,y) - n(y,x)| / max n on a square grid."""
    v = n.values
    return float(np.max(np.abs(v - v.T)) / np.max(v))
