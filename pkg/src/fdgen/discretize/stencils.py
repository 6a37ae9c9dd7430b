"""Central finite-difference stencils with exact rational weights."""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from math import factorial


@dataclass(frozen=True)
class StencilSpec:
    degree: int
    accuracy: int
    offsets: tuple[int, ...]
    weights: tuple[Fraction, ...]
    direction: int = 0

    @property
    def width(self) -> int:
        return self.offsets[-1]

    def weight(self, offset: int) -> Fraction:
        return self.weights[offset + self.width]

    def on_axis(self, direction: int) -> "StencilSpec":
        return StencilSpec(self.degree, self.accuracy, self.offsets, self.weights, direction)


def solve_exact(matrix: list[list[Fraction]], rhs: list[Fraction]) -> list[Fraction]:
    """Gauss-Jordan elimination over the rationals for a nonsingular square system."""
    n = len(matrix)
    a = [list(map(Fraction, row)) + [Fraction(b)] for row, b in zip(matrix, rhs)]
    for col in range(n):
        pivot = next((r for r in range(col, n) if a[r][col] != 0), None)
        if pivot is None:
            raise ValueError("singular system")
        a[col], a[pivot] = a[pivot], a[col]
        p = a[col][col]
        a[col] = [v / p for v in a[col]]
        for r in range(n):
            if r != col and a[r][col] != 0:
                f = a[r][col]
                a[r] = [x - f * y for x, y in zip(a[r], a[col])]
    return [row[-1] for row in a]


@lru_cache(maxsize=None)
def _weights(degree: int, accuracy: int) -> tuple[Fraction, ...]:
    m = accuracy // 2
    offsets = range(-m, m + 1)
    matrix = [[Fraction(k) ** q for k in offsets] for q in range(2 * m + 1)]
    rhs = [Fraction(factorial(degree)) if q == degree else Fraction(0) for q in range(2 * m + 1)]
    return tuple(solve_exact(matrix, rhs))


def central_coefficients(degree: int, accuracy: int, direction: int = 0) -> StencilSpec:
    """Central stencil of half-width ``accuracy/2`` for the ``degree``-th derivative.

    Weights are for unit spacing; scaling by ``1/dx**degree`` happens at lowering.
    """
    if degree not in (1, 2):
        raise ValueError(f"derivative degree must be 1 or 2, got {degree}")
    if not isinstance(accuracy, int) or accuracy < 2 or accuracy % 2:
        raise ValueError(f"accuracy must be an even integer >= 2, got {accuracy!r}")
    m = accuracy // 2
    return StencilSpec(degree, accuracy, tuple(range(-m, m + 1)), _weights(degree, accuracy),
                       direction)
