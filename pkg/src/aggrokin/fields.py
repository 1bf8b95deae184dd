"""Periodic-box geometry: grids, density fields, time-indexed field paths.

All continuum objects live on a centered torus [-L/2, L/2)^d with d in
{1, 2}.  A grid splits each axis into a power-of-two number of cells; a
field stores one density value per cell (cell-center sample).  Paths are
dense time stacks of field values used by the fixed-point solver.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field

import numpy as np

from .errors import ConfigurationError

__all__ = ["Grid", "Field", "FieldPath", "Region"]


def _is_power_of_two(n: int) -> bool:
    return n >= 1 and (n & (n - 1)) == 0


@dataclass(frozen=True)
class Grid:
    """Uniform periodic grid on [-L/2, L/2)^d.

    dim : 1 or 2
    length : box edge length L (same for every axis)
    cells : number of cells per axis, a power of two
    """

    dim: int
    length: float
    cells: int

    def __post_init__(self):
        if self.dim not in (1, 2):
            raise ConfigurationError(f"grid dim must be 1 or 2, got {self.dim}")
        if not self.length > 0:
            raise ConfigurationError("grid length must be positive")
        if not _is_power_of_two(self.cells):
            raise ConfigurationError(
                f"cells per axis must be a power of two, got {self.cells}"
            )

    @property
    def pitch(self) -> float:
        return self.length / self.cells

    @property
    def shape(self) -> tuple:
        return (self.cells,) * self.dim

    @property
    def cell_volume(self) -> float:
        return self.pitch**self.dim

    def axis(self) -> np.ndarray:
        """Cell-center coordinates along one axis."""
        return -0.5 * self.length + (np.arange(self.cells) + 0.5) * self.pitch

    def coords(self) -> np.ndarray:
        """Cell-center coordinates, shape (*shape, dim)."""
        ax = self.axis()
        if self.dim == 1:
            return ax[:, None]
        gx, gy = np.meshgrid(ax, ax, indexing="ij")
        return np.stack([gx, gy], axis=-1)

    def offsets(self) -> np.ndarray:
        """Centered lattice displacements along one axis (wrapped).

        Entry j is the displacement j*pitch wrapped into [-L/2, L/2),
        which is the natural indexing of a periodic convolution kernel.
        """
        j = np.arange(self.cells)
        return (j * self.pitch + 0.5 * self.length) % self.length - 0.5 * self.length

    def index_of(self, x) -> tuple:
        """Index of the cell whose center is nearest to point x."""
        x = np.atleast_1d(np.asarray(x, dtype=float))
        idx = np.floor((x + 0.5 * self.length) / self.pitch).astype(int) % self.cells
        return tuple(int(i) for i in idx)

    def region_mask(self, region: "Region") -> np.ndarray:
        """Boolean mask of cells whose centers lie in the closed region."""
        c = self.coords()
        lo = np.asarray(region.lo, dtype=float)
        hi = np.asarray(region.hi, dtype=float)
        return np.all((c >= lo - 1e-12) & (c <= hi + 1e-12), axis=-1)


@dataclass(frozen=True)
class Region:
    """Closed axis-aligned box, in the same centered coordinates as Grid."""

    lo: tuple
    hi: tuple

    def __post_init__(self):
        lo = tuple(float(v) for v in np.atleast_1d(self.lo))
        hi = tuple(float(v) for v in np.atleast_1d(self.hi))
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)
        if len(lo) != len(hi) or len(lo) not in (1, 2):
            raise ConfigurationError("region must be a 1d interval or a 2d box")
        if any(h <= l for l, h in zip(lo, hi)):
            raise ConfigurationError("region must have positive extent")

    @classmethod
    def centered(cls, halfwidth: float, dim: int = 1) -> "Region":
        a = float(halfwidth)
        return cls((-a,) * dim, (a,) * dim)

    @property
    def dim(self) -> int:
        return len(self.lo)

    @property
    def volume(self) -> float:
        return float(np.prod([h - l for l, h in zip(self.lo, self.hi)]))

    def contains(self, x) -> bool:
        x = np.atleast_1d(np.asarray(x, dtype=float))
        return bool(
            np.all(x >= np.asarray(self.lo) - 1e-12)
            and np.all(x <= np.asarray(self.hi) + 1e-12)
        )


@dataclass
class Field:
    """Density sampled at cell centers, tagged with a model time."""

    grid: Grid
    values: np.ndarray
    time: float = 0.0

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.shape != self.grid.shape:
            raise ConfigurationError(
                f"field shape {v.shape} does not match grid shape {self.grid.shape}"
            )
        if not np.all(np.isfinite(v)):
            raise ConfigurationError("field contains non-finite values")
        self.values = v

    @classmethod
    def constant(cls, grid: Grid, value: float, time: float = 0.0) -> "Field":
        return cls(grid, np.full(grid.shape, float(value)), time)

    @classmethod
    def zeros(cls, grid: Grid, time: float = 0.0) -> "Field":
        return cls.constant(grid, 0.0, time)

    def copy(self) -> "Field":
        return Field(self.grid, self.values.copy(), self.time)

    def min(self) -> float:
        return float(self.values.min())

    def max(self) -> float:
        return float(self.values.max())


@dataclass
class FieldPath:
    """Field values on a dense increasing time mesh (axis 0 is time)."""

    grid: Grid
    times: np.ndarray
    values: np.ndarray  # shape (len(times), *grid.shape)

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != (self.times.size,) + self.grid.shape:
            raise ConfigurationError("path values shape does not match mesh/grid")
        if self.times.size >= 2 and not np.all(np.diff(self.times) > 0):
            raise ConfigurationError("path times must be strictly increasing")

    def at(self, i: int) -> Field:
        return Field(self.grid, self.values[i].copy(), float(self.times[i]))

    @property
    def final(self) -> Field:
        return self.at(len(self.times) - 1)
