"""Uniform grids, cell-averaged fields and solver trajectories."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np


class NumericalError(RuntimeError):
    """Raised when a solve produces non-finite values."""


@dataclass(frozen=True)
class Grid:
    x_left: float
    dx: float
    n_cells: int
    t_end: float = 1.0
    cfl: float = 0.9

    def __post_init__(self):
        if not self.dx > 0:
            raise ValueError("dx must be positive")
        if self.n_cells < 1:
            raise ValueError("need at least one cell")
        if not 0 < self.cfl <= 1:
            raise ValueError("cfl must lie in (0, 1]")
        if not self.t_end > 0:
            raise ValueError("t_end must be positive")

    @classmethod
    def uniform(cls, x_left: float, x_right: float, dx: float, **kw) -> "Grid":
        """Grid on ``[x_left, x_right]`` with spacing as close to ``dx`` as fits."""
        n = max(1, int(round((x_right - x_left) / dx)))
        return cls(float(x_left), (x_right - x_left) / n, n, **kw)

    @property
    def length(self) -> float:
        return self.n_cells * self.dx

    @property
    def x_right(self) -> float:
        return self.x_left + self.length

    @property
    def interfaces(self) -> np.ndarray:
        return self.x_left + self.dx * np.arange(self.n_cells + 1)

    @property
    def centers(self) -> np.ndarray:
        return self.x_left + self.dx * (np.arange(self.n_cells) + 0.5)

    def origin_index(self) -> int:
        """Index of the interface at ``x = 0``."""
        if not self.x_left <= 0.0 <= self.x_right:
            raise ValueError(f"x=0 lies outside the domain [{self.x_left}, {self.x_right}]")
        j = int(round(-self.x_left / self.dx))
        if not math.isclose(self.interfaces[j], 0.0, abs_tol=1e-9 * self.dx):
            raise ValueError("x=0 must coincide with a cell interface")
        return j

    def to_dict(self) -> dict:
        return {"x_left": self.x_left, "dx": self.dx, "n_cells": self.n_cells,
                "t_end": self.t_end, "cfl": self.cfl}


@dataclass
class Field:
    grid: Grid
    values: np.ndarray
    time: float = 0.0

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != (self.grid.n_cells,):
            raise ValueError(f"expected {self.grid.n_cells} values, got {self.values.shape}")

    @classmethod
    def from_function(cls, grid: Grid, func, n_sub: int = 8) -> "Field":
        """Cell averages of ``func`` by midpoint sub-sampling."""
        off = (np.arange(n_sub) + 0.5) / n_sub
        x = grid.x_left + grid.dx * (np.arange(grid.n_cells)[:, None] + off[None, :])
        return cls(grid, np.mean(func(x), axis=1))

    def mass(self) -> float:
        return float(np.sum(self.values) * self.grid.dx)


@dataclass
class Trajectory:
    """Snapshots of one solve.

    ``origin_flux`` holds ``alpha(t)``, the time integral of the numerical
    flux through ``x = 0`` (nan when 0 is not an interface), and
    ``outflow`` the cumulative net mass that left through the boundaries.
    """

    grid: Grid
    times: np.ndarray
    values: np.ndarray
    origin_flux: np.ndarray
    outflow: np.ndarray
    source: str = "nonlocal"
    meta: dict = field(default_factory=dict)

    def field(self, i: int) -> Field:
        return Field(self.grid, self.values[i], float(self.times[i]))

    def masses(self) -> np.ndarray:
        return self.values.sum(axis=1) * self.grid.dx

    def __len__(self):
        return len(self.times)
