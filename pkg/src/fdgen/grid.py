"""Uniform structured grid with halo padding and row-major work arrays."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import DimensionError, DuplicateNameError


@dataclass(frozen=True)
class IterationRange:
    """Per-direction ``[lower, upper)`` bounds in grid-index space (halos are negative/≥N)."""

    lower: tuple[int, ...]
    upper: tuple[int, ...]

    def __post_init__(self):
        if len(self.lower) != len(self.upper):
            raise DimensionError("range bounds have different lengths")
        for lo, hi in zip(self.lower, self.upper):
            if not lo < hi:
                raise ValueError(f"empty range [{lo}, {hi})")

    @property
    def ndim(self) -> int:
        return len(self.lower)

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(hi - lo for lo, hi in zip(self.lower, self.upper))

    def widened(self, by: Sequence[int]) -> "IterationRange":
        return IterationRange(tuple(lo - w for lo, w in zip(self.lower, by)),
                              tuple(hi + w for hi, w in zip(self.upper, by)))

    def contains(self, other: "IterationRange") -> bool:
        return all(a <= b for a, b in zip(self.lower, other.lower)) and \
            all(a >= b for a, b in zip(self.upper, other.upper))

    def __str__(self) -> str:
        return "x".join(f"[{lo},{hi})" for lo, hi in zip(self.lower, self.upper))


@dataclass
class Grid:
    ndim: int
    shape: tuple[int, ...]
    deltas: tuple[float, ...]
    halo: tuple[int, ...]
    arrays: dict = field(default_factory=dict, repr=False, compare=False)

    @property
    def padded_shape(self) -> tuple[int, ...]:
        return tuple(n + 2 * h for n, h in zip(self.shape, self.halo))

    @property
    def padded_size(self) -> int:
        return int(np.prod(self.padded_shape))

    @property
    def strides(self) -> tuple[int, ...]:
        """Element strides of the flattened padded layout (direction 0 slowest)."""
        out, s = [], 1
        for n in reversed(self.padded_shape):
            out.append(s)
            s *= n
        return tuple(reversed(out))

    @property
    def lengths(self) -> tuple[float, ...]:
        return tuple(n * d for n, d in zip(self.shape, self.deltas))

    @property
    def interior(self) -> tuple[slice, ...]:
        return tuple(slice(h, h + n) for n, h in zip(self.shape, self.halo))

    def coordinate(self, axis: int, index: int) -> float:
        return index * self.deltas[axis]

    def flatten(self, index: Sequence[int]) -> int:
        """Flat offset of a grid index (which may lie in the halo)."""
        if len(index) != self.ndim:
            raise DimensionError(f"expected {self.ndim} indices, got {len(index)}")
        flat = 0
        for i, h, n, s in zip(index, self.halo, self.padded_shape, self.strides):
            p = i + h
            if not 0 <= p < n:
                raise IndexError(f"grid index {tuple(index)} outside padded extent")
            flat += p * s
        return flat

    def unflatten(self, flat: int) -> tuple[int, ...]:
        if not 0 <= flat < self.padded_size:
            raise IndexError(f"flat offset {flat} outside padded extent")
        out = []
        for h, s in zip(self.halo, self.strides):
            p, flat = divmod(flat, s)
            out.append(p - h)
        return tuple(out)


@dataclass
class WorkArray:
    name: str
    data: np.ndarray
    grid: Grid = field(repr=False)

    @property
    def view(self) -> np.ndarray:
        """Padded d-dimensional view sharing memory with ``data``."""
        return self.data.reshape(self.grid.padded_shape)

    @property
    def interior(self) -> np.ndarray:
        return self.view[self.grid.interior]

    def __getitem__(self, index) -> float:
        return self.data[self.grid.flatten(index)]

    def __setitem__(self, index, value) -> None:
        self.data[self.grid.flatten(index)] = value


def create_grid(ndim: int, shape: Sequence[int], deltas: Sequence[float],
                required_halo: Sequence[int] | int) -> Grid:
    if isinstance(required_halo, int):
        required_halo = (required_halo,) * ndim
    if ndim not in (1, 2, 3):
        raise DimensionError(f"ndim must be 1, 2 or 3, got {ndim}")
    if not len(shape) == len(deltas) == len(required_halo) == ndim:
        raise DimensionError(
            f"ndim={ndim} but got {len(shape)} sizes, {len(deltas)} deltas, "
            f"{len(required_halo)} halos")
    if any(int(n) < 1 for n in shape):
        raise ValueError(f"grid sizes must be positive, got {tuple(shape)}")
    if any(not float(d) > 0 for d in deltas):
        raise ValueError(f"grid spacings must be positive, got {tuple(deltas)}")
    if any(int(h) < 0 for h in required_halo):
        raise ValueError("halo depth must be non-negative")
    return Grid(ndim, tuple(int(n) for n in shape), tuple(float(d) for d in deltas),
                tuple(int(h) for h in required_halo))


def allocate_work_array(grid: Grid, name: str, init: float = 0.0) -> WorkArray:
    if name in grid.arrays:
        raise DuplicateNameError(f"work array {name!r} already exists on this grid")
    arr = WorkArray(name, np.full(grid.padded_size, init, dtype=np.float64), grid)
    grid.arrays[name] = arr
    return arr


def interior_range(grid: Grid) -> IterationRange:
    return IterationRange((0,) * grid.ndim, tuple(grid.shape))
