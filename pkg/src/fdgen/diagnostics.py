"""Volume-integral diagnostics: kinetic energy and enstrophy.

Two routes exist.  The runtime route compiles the integrands (written in
Einstein notation, so the vorticity comes from the Levi-Civita expansion)
into diagnostic kernels.  The numpy route below evaluates the same
quantities directly from interior arrays with a hand-written curl and
periodic stencils; it serves as an oracle for the compiled route.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np

from .discretize import (ConstantPool, EvaluationSet, build_evaluations, central_coefficients,
                         fuse_kernels, pool_temporaries)
from .einstein import ExpandedEquation, ExpansionContext, expand_expression
from .expr import Field, parse_expression
from .grid import Grid
from .runtime import DiagnosticPlan, pairwise_sum


@dataclass
class DiagnosticRow:
    time: float
    kinetic_energy: float
    enstrophy: float

    def as_dict(self) -> dict[str, float]:
        return {"t": self.time, "kinetic_energy": self.kinetic_energy,
                "enstrophy": self.enstrophy}


def integrand_sources(ndim: int, density: str | None = "rho",
                      velocity: str = "u") -> dict[str, str]:
    """Einstein-notation integrands; the enstrophy is 1/2 rho w_i w_i with
    w_i = eps_ijk du_k/dx_j (a single component in 2-D)."""
    rho = density or "1"
    u = velocity
    out = {"kinetic_energy": f"{rho}*{u}_j*{u}_j/2"}
    if ndim == 3:
        curl2 = (f"LeviCivita(i,j,k)*Der({u}_k, x_j)*LeviCivita(i,l,m)*Der({u}_m, x_l)")
    elif ndim == 2:
        curl2 = f"LeviCivita(i,j)*Der({u}_j, x_i)*LeviCivita(k,l)*Der({u}_l, x_k)"
    else:
        curl2 = "0"
    out["enstrophy"] = f"{rho}*{curl2}/2"
    out["enstrophy_unweighted"] = f"{curl2}/2"
    return out


def build_diagnostic_evaluations(ndim: int, constant_names: Iterable[str],
                                 formulas: Sequence[ExpandedEquation], available: Iterable[str],
                                 grid: Grid | None, accuracy: int, density: str | None = "rho",
                                 velocity: str = "u") -> EvaluationSet:
    ctx = ExpansionContext(ndim)
    consts = set(constant_names)
    targets = []
    for label, text in integrand_sources(ndim, density, velocity).items():
        expr = expand_expression(parse_expression(text, consts), ctx)
        targets.append(ExpandedEquation(Field(f"dg_{label}"), expr, prognostic=False))
    return build_evaluations([], list(formulas) + targets, grid, accuracy, ndim=ndim,
                             roots=[t.target for t in targets], prune=True, temp_prefix="dk",
                             extra_fields=available)


def build_diagnostic_plan(evset: EvaluationSet, pool: ConstantPool, grid: Grid, accuracy: int,
                          rho_ref: float = 1.0) -> tuple[DiagnosticPlan, list[str]]:
    """Kernels for the diagnostic evaluations and the arrays they need."""
    kernels = fuse_kernels(evset.evaluations, pool, grid, accuracy, prefix="diag")
    kernels, _ = pool_temporaries(kernels, prefix="dk", out_prefix="dtmp")
    for k in kernels:
        k.name = "d_" + k.name
    integrands = {ev.target[3:]: ev.target for ev in evset.evaluations
                  if ev.target.startswith("dg_")}
    arrays = sorted({n for k in kernels for n in k.outputs})
    return DiagnosticPlan(kernels, integrands, rho_ref), arrays


# ---------------------------------------------------------------------------
# numpy route

def volume_integral(values: np.ndarray, grid: Grid, rho_ref: float = 1.0) -> float:
    """(1 / (rho_ref * volume)) * sum(values) * cell volume, summed pairwise."""
    cell = float(np.prod(grid.deltas))
    volume = float(np.prod(grid.lengths))
    return pairwise_sum(np.broadcast_to(values, grid.shape)) * cell / (rho_ref * volume)


def periodic_derivative(f: np.ndarray, axis: int, delta: float, accuracy: int) -> np.ndarray:
    st = central_coefficients(1, accuracy)
    out = np.zeros_like(f, dtype=np.float64)
    for k, w in zip(st.offsets, st.weights):
        if w:
            out += float(w) * np.roll(f, -k, axis=axis)
    return out / delta


def _velocity(state: Mapping[str, np.ndarray], grid: Grid, velocity: str):
    return [np.asarray(state[f"{velocity}{a}"], dtype=np.float64) for a in range(grid.ndim)]


def _density(state, grid, density):
    if density is None or density not in state:
        return np.ones(grid.shape)
    return np.asarray(state[density], dtype=np.float64)


def kinetic_energy(state: Mapping[str, np.ndarray], grid: Grid, density: str | None = "rho",
                   velocity: str = "u", rho_ref: float = 1.0) -> float:
    u = _velocity(state, grid, velocity)
    rho = _density(state, grid, density)
    return volume_integral(0.5 * rho * sum(c * c for c in u), grid, rho_ref)


def vorticity(state: Mapping[str, np.ndarray], grid: Grid, accuracy: int,
              velocity: str = "u") -> list[np.ndarray]:
    u = _velocity(state, grid, velocity)
    d = lambda comp, axis: periodic_derivative(u[comp], axis, grid.deltas[axis], accuracy)
    if grid.ndim == 3:
        return [d(2, 1) - d(1, 2), d(0, 2) - d(2, 0), d(1, 0) - d(0, 1)]
    if grid.ndim == 2:
        return [d(1, 0) - d(0, 1)]
    return []


def enstrophy(state: Mapping[str, np.ndarray], grid: Grid, accuracy: int,
              density: str | None = "rho", velocity: str = "u", rho_ref: float = 1.0) -> float:
    w = vorticity(state, grid, accuracy, velocity)
    if not w:
        return 0.0
    rho = _density(state, grid, density)
    return volume_integral(0.5 * rho * sum(c * c for c in w), grid, rho_ref)
