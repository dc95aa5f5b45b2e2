"""Uniform mesh on Omega = (-1, 1) plus the volume-constraint collar.

The interval is split into 2N cells of size h = 1/N with nodes
x_i = -1 + i*h, i = 0..2N, so the coupling interface sits exactly at the
node x_N = 0.  Arrays are padded by ``pad = r1`` nodes on each side; the
padded nodes carry the volumetric Dirichlet data.  Constrained indices
are i <= 0 and i >= 2N (domain endpoints included); the evolved unknowns
are i = 1..2N-1.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .exceptions import ConfigurationError


@dataclass(frozen=True)
class Grid1D:
    """Mesh over Omega and its interaction collar.

    n_half   -- N, cells per unit half-domain (h = 1/N)
    r1, r2   -- horizons in mesh units: delta1 = r1*h, delta2 = r2*h
    """

    n_half: int
    r1: int
    r2: int

    @property
    def h(self) -> float:
        return 1.0 / self.n_half

    @property
    def interface_index(self) -> int:
        return self.n_half

    @property
    def M(self) -> int:
        return self.r1 // self.r2

    @property
    def pad(self) -> int:
        return self.r1

    @property
    def delta1(self) -> float:
        return self.r1 * self.h

    @property
    def delta2(self) -> float:
        return self.r2 * self.h

    @property
    def n_nodes(self) -> int:
        """Number of padded nodes, indices -pad..2N+pad."""
        return 2 * self.n_half + 1 + 2 * self.pad

    @property
    def n_interior(self) -> int:
        return 2 * self.n_half - 1

    def x(self, i) -> np.ndarray | float:
        """Coordinate of grid index i (scalar or array, padded range)."""
        return -1.0 + np.multiply(i, self.h)

    def coords(self) -> np.ndarray:
        """Coordinates of all padded nodes, index -pad..2N+pad."""
        return -1.0 + self.h * np.arange(-self.pad, 2 * self.n_half + self.pad + 1)

    def interior_coords(self) -> np.ndarray:
        return -1.0 + self.h * np.arange(1, 2 * self.n_half)

    def arr(self, i: int) -> int:
        """Padded-array position of grid index i."""
        return i + self.pad

    @property
    def interior(self) -> slice:
        """Slice of the padded array holding nodes 1..2N-1."""
        return slice(self.pad + 1, self.pad + 2 * self.n_half)

    def constrained_mask(self) -> np.ndarray:
        """True on padded-array entries with grid index <= 0 or >= 2N."""
        idx = np.arange(-self.pad, 2 * self.n_half + self.pad + 1)
        return (idx <= 0) | (idx >= 2 * self.n_half)


def build_grid(n_half: int, r1: int, r2: int) -> Grid1D:
    """Validated grid for horizons delta1 = r1*h >= delta2 = r2*h."""
    if r2 < 1 or r1 < r2:
        raise ConfigurationError(f"need r1 >= r2 >= 1, got r1={r1}, r2={r2}")
    if r1 % r2 != 0:
        raise ConfigurationError(
            f"horizon ratio must be an integer: r1={r1} is not a multiple of r2={r2}")
    if n_half < 2 * r1:
        raise ConfigurationError(
            f"n_half={n_half} too small for horizon r1={r1} (need n_half >= 2*r1)")
    return Grid1D(n_half=n_half, r1=r1, r2=r2)


@dataclass
class GridField:
    """Nodal values over the padded index range of a grid."""

    grid: Grid1D
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != (self.grid.n_nodes,):
            raise ValueError(
                f"field length {self.values.shape} does not match "
                f"grid ({self.grid.n_nodes} padded nodes)")

    @classmethod
    def zeros(cls, grid: Grid1D) -> "GridField":
        return cls(grid, np.zeros(grid.n_nodes))

    def copy(self) -> "GridField":
        return GridField(self.grid, self.values.copy())

    def constrained(self, datum: float = 0.0) -> "GridField":
        """Copy with the volume-constraint region set to ``datum``."""
        out = self.values.copy()
        out[self.grid.constrained_mask()] = datum
        return GridField(self.grid, out)

    def interior(self) -> np.ndarray:
        return self.values[self.grid.interior]

    def max_constraint_violation(self, datum: float = 0.0) -> float:
        return float(np.abs(self.values[self.grid.constrained_mask()] - datum).max())


def sample(f: Callable, grid: Grid1D) -> GridField:
    """Nodal samples of f over the padded range (vectorized over x)."""
    return GridField(grid, np.asarray(f(grid.coords()), dtype=float))
