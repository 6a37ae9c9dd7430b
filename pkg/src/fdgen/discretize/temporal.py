"""Explicit time integration: forward Euler and a 2N-storage third-order Runge-Kutta."""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

from ..grid import Grid, interior_range
from . import ir
from .kernels import Kernel


@dataclass(frozen=True)
class TemporalScheme:
    """Stage tables for the two-register update

        acc = A[s]*acc + dt*R
        phi = phi + B[s]*acc

    evaluated at stage time ``t + C[s]*dt``.
    """

    kind: str
    A: tuple[Fraction, ...]
    B: tuple[Fraction, ...]
    C: tuple[Fraction, ...]

    @property
    def stages(self) -> int:
        return len(self.B)

    def stage_constants(self, stage: int) -> dict[str, float]:
        return {"rkA": float(self.A[stage]), "rkB": float(self.B[stage])}

    def integrate(self, f, y0: float, dt: float, nsteps: int, t0: float = 0.0) -> float:
        """Scalar ODE integration with the same update sequence as the kernels."""
        y, acc = y0, 0.0
        for it in range(nsteps):
            t = t0 + it * dt
            for s in range(self.stages):
                r = f(t + float(self.C[s]) * dt, y)
                if self.kind == "ForwardEuler":
                    y = y + dt * r
                else:
                    acc = float(self.A[s]) * acc + dt * r
                    y = y + float(self.B[s]) * acc
        return y


FORWARD_EULER = TemporalScheme("ForwardEuler", (Fraction(0),), (Fraction(1),), (Fraction(0),))

RK3_LOW_STORAGE = TemporalScheme(
    "RK3LowStorage",
    A=(Fraction(0), Fraction(-5, 9), Fraction(-153, 128)),
    B=(Fraction(1, 3), Fraction(15, 16), Fraction(8, 15)),
    C=(Fraction(0), Fraction(1, 3), Fraction(3, 4)),
)

SCHEMES = {"euler": FORWARD_EULER, "forwardeuler": FORWARD_EULER,
           "rk3": RK3_LOW_STORAGE, "rk3lowstorage": RK3_LOW_STORAGE}


def get_scheme(name: str) -> TemporalScheme:
    try:
        return SCHEMES[name.lower().replace("_", "").replace("-", "")]
    except KeyError:
        raise ValueError(f"unknown temporal scheme {name!r}; expected Euler or RK3") from None


def build_temporal_kernels(scheme: TemporalScheme, prognostics: Sequence[str],
                           grid: Grid) -> list[Kernel]:
    """One update kernel per prognostic; the same kernels serve every stage, with the
    stage coefficients supplied as the constants ``rkA`` and ``rkB``."""
    dt = ir.Const("dt")
    out = []
    for name in prognostics:
        res = ir.Load(f"res_{name}", (0,) * grid.ndim)
        phi = ir.Load(name, (0,) * grid.ndim)
        if scheme.kind == "ForwardEuler":
            stmts = [ir.Assign(ir.Store(name), ir.Bin("+", phi, ir.Bin("*", dt, res)))]
        else:
            acc = ir.Load(f"acc_{name}", (0,) * grid.ndim)
            stmts = [
                ir.Assign(ir.Store(f"acc_{name}"),
                          ir.Bin("+", ir.Bin("*", ir.Const("rkA"), acc), ir.Bin("*", dt, res))),
                ir.Assign(ir.Store(name),
                          ir.Bin("+", phi, ir.Bin("*", ir.Const("rkB"), ir.Load(f"acc_{name}", (0,) * grid.ndim)))),
            ]
        out.append(Kernel.build(f"k_update_{name}", stmts, interior_range(grid)))
    return out
