"""Program representation and parallel execution."""
from .boundary import BoundaryAction, apply_boundaries, apply_periodic, apply_symmetry
from .program import DiagnosticPlan, Program, validate
from .execute import Launcher, RunResult, Runtime, State, execute_kernel, pairwise_sum, run

__all__ = [
    "BoundaryAction", "DiagnosticPlan", "Launcher", "Program", "RunResult", "Runtime", "State",
    "apply_boundaries", "apply_periodic", "apply_symmetry", "execute_kernel", "pairwise_sum",
    "run", "validate",
]
