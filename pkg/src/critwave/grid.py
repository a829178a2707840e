"""Radial grids, fields, wave states and the cadenced spacetime record.

Nodes sit at cell centres r_j = (j + 1/2) dr, so there is no node at the
origin and the inner flux of the conservative Laplacian vanishes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np


class GridError(ValueError):
    pass


@dataclass(frozen=True)
class RadialGrid:
    dr: float
    n_cells: int

    def __post_init__(self):
        if not (math.isfinite(self.dr) and self.dr > 0):
            raise GridError(f"dr must be positive and finite, got {self.dr!r}")
        if int(self.n_cells) != self.n_cells or self.n_cells < 8:
            raise GridError(f"need at least 8 cells, got {self.n_cells!r}")

    @property
    def R_max(self) -> float:
        return self.n_cells * self.dr

    @property
    def r(self) -> np.ndarray:
        return (np.arange(self.n_cells) + 0.5) * self.dr

    @property
    def r_faces(self) -> np.ndarray:
        """Outer cell faces r_{j+1/2} = (j+1) dr."""
        return (np.arange(self.n_cells) + 1.0) * self.dr

    def weights(self) -> np.ndarray:
        """Midpoint quadrature weights 2 pi r_j dr."""
        return 2.0 * np.pi * self.r * self.dr

    def zeros(self) -> "RadialField":
        return RadialField(self, np.zeros(self.n_cells))

    def sample(self, fn) -> "RadialField":
        return RadialField(self, fn(self.r))


def make_grid(R_max: float, dr: float) -> RadialGrid:
    for name, v in (("R_max", R_max), ("dr", dr)):
        if not (isinstance(v, (int, float, np.floating)) and math.isfinite(v) and v > 0):
            raise GridError(f"{name} must be positive and finite, got {v!r}")
    n = int(round(R_max / dr))
    if n < 8:
        raise GridError(f"R_max/dr = {R_max / dr:g} gives fewer than 8 cells")
    return RadialGrid(float(dr), n)


def _frozen(a) -> np.ndarray:
    arr = np.array(a, dtype=np.float64, copy=True)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class RadialField:
    grid: RadialGrid
    samples: np.ndarray

    def __post_init__(self):
        s = self.samples
        # read-only float64 arrays are shared, everything else is copied
        if not (isinstance(s, np.ndarray) and s.dtype == np.float64 and not s.flags.writeable):
            s = _frozen(s)
        if s.shape != (self.grid.n_cells,):
            raise GridError(f"expected {self.grid.n_cells} samples, got shape {s.shape}")
        if not np.all(np.isfinite(s)):
            raise GridError("field samples must be finite")
        object.__setattr__(self, "samples", s)

    def __len__(self):
        return self.grid.n_cells

    def __array__(self, dtype=None, copy=None):
        return self.samples if dtype is None else self.samples.astype(dtype)

    def __add__(self, other):
        return RadialField(self.grid, self.samples + _values(other, self.grid))

    def __sub__(self, other):
        return RadialField(self.grid, self.samples - _values(other, self.grid))

    def __mul__(self, c):
        return RadialField(self.grid, self.samples * c)

    __rmul__ = __mul__

    def __neg__(self):
        return RadialField(self.grid, -self.samples)


def _values(other, grid):
    if isinstance(other, RadialField):
        if other.grid != grid:
            raise GridError("grid mismatch")
        return other.samples
    return other


def integrate_radial(f) -> float:
    """2D integral of a radial function: 2 pi sum f_j r_j dr."""
    if isinstance(f, RadialField):
        grid, vals = f.grid, f.samples
    else:
        raise TypeError("integrate_radial expects a RadialField")
    return float(np.dot(vals, grid.weights()))


@dataclass(frozen=True, eq=False)
class WaveState:
    t: float
    u: RadialField
    w: RadialField

    def __post_init__(self):
        if self.u.grid != self.w.grid:
            raise GridError("u and w must share one grid")
        if not math.isfinite(self.t):
            raise GridError("time must be finite")

    @property
    def grid(self) -> RadialGrid:
        return self.u.grid

    @classmethod
    def from_arrays(cls, grid: RadialGrid, t: float, u, w) -> "WaveState":
        return cls(float(t), RadialField(grid, u), RadialField(grid, w))

    @classmethod
    def zero(cls, grid: RadialGrid, t: float = 0.0) -> "WaveState":
        return cls.from_arrays(grid, t, np.zeros(grid.n_cells), np.zeros(grid.n_cells))


@dataclass(frozen=True, eq=False)
class SpacetimeRecord:
    """Snapshots of (u, w) stored as two (n_snap, n_cells) arrays."""

    grid: RadialGrid
    dt_rec: float
    times: np.ndarray
    u: np.ndarray
    w: np.ndarray
    fingerprint: str = ""
    dt_step: float = 0.0
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        times = np.asarray(self.times, dtype=np.float64)
        if times.ndim != 1 or len(times) == 0:
            raise GridError("record needs at least one snapshot")
        if np.any(np.diff(times) <= 0):
            raise GridError("snapshot times must be strictly increasing")
        shape = (len(times), self.grid.n_cells)
        if self.u.shape != shape or self.w.shape != shape:
            raise GridError(f"snapshot arrays must have shape {shape}")
        for a in (times, self.u, self.w):
            a.setflags(write=False)
        object.__setattr__(self, "times", times)

    def __len__(self):
        return len(self.times)

    @property
    def t_start(self) -> float:
        return float(self.times[0])

    @property
    def t_final(self) -> float:
        return float(self.times[-1])

    def state(self, i: int) -> WaveState:
        return WaveState.from_arrays(self.grid, self.times[i], self.u[i], self.w[i])

    @property
    def snapshots(self):
        return tuple(self.state(i) for i in range(len(self)))

    def index_near(self, t: float, tol: float | None = None) -> int:
        i = int(np.argmin(np.abs(self.times - t)))
        if tol is not None and abs(self.times[i] - t) > tol:
            raise GridError(f"no snapshot within {tol:g} of t = {t:g}")
        return i
