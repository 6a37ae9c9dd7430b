"""Halo filling for periodic and symmetry boundaries."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Mapping

import numpy as np

from ..grid import Grid


@dataclass(frozen=True)
class BoundaryAction:
    kind: str  # "periodic" or "symmetry"
    direction: int
    side: str = "both"  # symmetry: "left" or "right"
    parities: tuple[tuple[str, int], ...] = ()

    def __post_init__(self):
        if self.kind not in ("periodic", "symmetry"):
            raise ValueError(f"unknown boundary kind {self.kind!r}")
        if self.kind == "periodic" and self.side != "both":
            raise ValueError("periodic boundaries apply to both sides of a direction")
        if self.kind == "symmetry" and self.side not in ("left", "right"):
            raise ValueError("symmetry boundaries need side 'left' or 'right'")

    def parity(self, name: str) -> int:
        return dict(self.parities).get(name, 1)


def _axis_index(ndim: int, axis: int, idx) -> tuple:
    return (slice(None),) * axis + (idx,)


def periodic_indices(n: int, h: int) -> tuple[np.ndarray, np.ndarray]:
    """Padded halo positions and the padded interior positions they copy from."""
    halo = np.concatenate([np.arange(0, h), np.arange(n + h, n + 2 * h)])
    return halo, (halo - h) % n + h


def apply_periodic(views: Iterable[np.ndarray], grid: Grid, direction: int) -> None:
    """Halo index ``-k`` takes interior ``N-k`` and ``N+k-1`` takes ``k-1`` (modulo N)."""
    h, n = grid.halo[direction], grid.shape[direction]
    if h == 0:
        return
    dst, src = periodic_indices(n, h)
    for v in views:
        v[_axis_index(grid.ndim, direction, dst)] = v[_axis_index(grid.ndim, direction, src)]


def symmetry_indices(n: int, h: int, side: str) -> tuple[np.ndarray, np.ndarray]:
    if h > n:
        raise ValueError(f"symmetry boundary needs at least {h} interior points, got {n}")
    k = np.arange(h)
    if side == "left":
        return h - 1 - k, h + k            # grid -1-k <- k
    return n + h + k, n + h - 1 - k        # grid N+k <- N-1-k


def apply_symmetry(views: Mapping[str, np.ndarray], grid: Grid, direction: int, side: str,
                   parities: Mapping[str, int] | None = None) -> None:
    """Mirror about the boundary face; fields with parity -1 change sign."""
    h, n = grid.halo[direction], grid.shape[direction]
    if h == 0:
        return
    dst, src = symmetry_indices(n, h, side)
    parities = parities or {}
    for name, v in views.items():
        vals = v[_axis_index(grid.ndim, direction, src)]
        if parities.get(name, 1) < 0:
            vals = -vals
        v[_axis_index(grid.ndim, direction, dst)] = vals


def apply_boundaries(actions: Iterable[BoundaryAction], views: Mapping[str, np.ndarray],
                     grid: Grid) -> None:
    for act in actions:
        if act.kind == "periodic":
            apply_periodic(views.values(), grid, act.direction)
        else:
            apply_symmetry(views, grid, act.direction, act.side, dict(act.parities))
