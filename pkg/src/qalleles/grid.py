"""Uniform node-registered grids on I x J, trapezoidal quadrature and marginals.

Field arrays are stored with shape ``(nx, ny)``: the first index runs over the
x allele, the second over y. All reductions are plain numpy sums in a fixed
order (inner sum over y, then over x), so results are bitwise reproducible.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path

import numpy as np

__all__ = [
    "GridSpec", "Field2D", "Marginals", "quad2", "marginals", "argmax",
    "write_field_csv", "read_field_csv",
]


@dataclass(frozen=True)
class GridSpec:
    x_min: float = -2.0
    x_max: float = 2.0
    y_min: float = -2.0
    y_max: float = 2.0
    nx: int = 101
    ny: int = 101

    def __post_init__(self):
        if not (self.x_min < self.x_max and self.y_min < self.y_max):
            raise ValueError(f"degenerate domain {self}")
        if self.nx < 3 or self.ny < 3:
            raise ValueError(f"need at least 3 nodes per axis, got {self.nx}x{self.ny}")

    @property
    def hx(self) -> float:
        return (self.x_max - self.x_min) / (self.nx - 1)

    @property
    def hy(self) -> float:
        return (self.y_max - self.y_min) / (self.ny - 1)

    @property
    def shape(self) -> tuple[int, int]:
        return (self.nx, self.ny)

    @property
    def is_square(self) -> bool:
        return (self.nx == self.ny and self.x_min == self.y_min
                and self.x_max == self.y_max)

    @cached_property
    def xs(self) -> np.ndarray:
        return np.linspace(self.x_min, self.x_max, self.nx)

    @cached_property
    def ys(self) -> np.ndarray:
        return np.linspace(self.y_min, self.y_max, self.ny)

    @cached_property
    def wx(self) -> np.ndarray:
        """Trapezoid weights along x."""
        w = np.full(self.nx, self.hx)
        w[[0, -1]] = self.hx / 2
        return w

    @cached_property
    def wy(self) -> np.ndarray:
        w = np.full(self.ny, self.hy)
        w[[0, -1]] = self.hy / 2
        return w

    def mesh(self) -> tuple[np.ndarray, np.ndarray]:
        return np.meshgrid(self.xs, self.ys, indexing="ij")

    def refine(self) -> "GridSpec":
        """Grid with the spacing halved (same nodes plus midpoints)."""
        return GridSpec(self.x_min, self.x_max, self.y_min, self.y_max,
                        2 * self.nx - 1, 2 * self.ny - 1)

    # array-level kernels, shared by the Field2D functions below
    def integrate_y(self, values: np.ndarray) -> np.ndarray:
        """Trapezoid over y for every x row; returns an nx-vector."""
        return (values * self.wy[None, :]).sum(axis=1)

    def integrate_x(self, values: np.ndarray) -> np.ndarray:
        """Trapezoid over x for every y column; returns an ny-vector."""
        return (values * self.wx[:, None]).sum(axis=0)

    def quad(self, values: np.ndarray) -> float:
        return float(np.dot(self.wx, self.integrate_y(values)))


@dataclass(frozen=True)
class Field2D:
    grid: GridSpec
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.shape != self.grid.shape:
            raise ValueError(f"field shape {v.shape} does not match grid {self.grid.shape}")
        if not np.all(np.isfinite(v)):
            raise ValueError("field contains non-finite values")
        object.__setattr__(self, "values", v)

    @classmethod
    def from_function(cls, grid: GridSpec, fn) -> "Field2D":
        X, Y = grid.mesh()
        return cls(grid, np.broadcast_to(fn(X, Y), grid.shape).astype(float))

    def __mul__(self, c: float) -> "Field2D":
        return Field2D(self.grid, self.values * c)

    __rmul__ = __mul__


@dataclass(frozen=True)
class Marginals:
    """``rho_x[j]`` integrates over x at fixed y_j; ``rho_y[i]`` over y at x_i."""

    rho_x: np.ndarray
    rho_y: np.ndarray
    rho: float


def quad2(f: Field2D) -> float:
    """Tensor-product trapezoidal rule over the whole grid."""
    return f.grid.quad(f.values)


def marginals(n: Field2D) -> Marginals:
    g = n.grid
    rho_y = g.integrate_y(n.values)
    rho_x = g.integrate_x(n.values)
    return Marginals(rho_x=rho_x, rho_y=rho_y, rho=float(np.dot(g.wx, rho_y)))


def argmax(f: Field2D) -> tuple[float, float]:
    """Coordinates of the largest node value.

    Ties go to the smallest x index, then the smallest y index.
    """
    i, j = np.unravel_index(int(np.argmax(f.values)), f.grid.shape)
    return float(f.grid.xs[i]), float(f.grid.ys[j])


def argmax_index(values: np.ndarray) -> tuple[int, int]:
    i, j = np.unravel_index(int(np.argmax(values)), values.shape)
    return int(i), int(j)


def fmt17(v: float) -> str:
    return format(float(v), ".17g")


def field_csv_text(f: Field2D) -> str:
    """``x,y,value`` rows, x-major (x index outer, y index inner)."""
    g = f.grid
    lines = ["x,y,value"]
    for i, x in enumerate(g.xs):
        sx = fmt17(x)
        for j, y in enumerate(g.ys):
            lines.append(f"{sx},{fmt17(y)},{fmt17(f.values[i, j])}")
    return "\n".join(lines) + "\n"


def write_field_csv(path: str | Path, f: Field2D) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write(field_csv_text(f))


def read_field_csv(path: str | Path) -> Field2D:
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.DictReader(fh))
    xs = sorted({float(r["x"]) for r in rows})
    ys = sorted({float(r["y"]) for r in rows})
    g = GridSpec(xs[0], xs[-1], ys[0], ys[-1], len(xs), len(ys))
    vals = np.array([float(r["value"]) for r in rows]).reshape(g.shape)
    return Field2D(g, vals)
