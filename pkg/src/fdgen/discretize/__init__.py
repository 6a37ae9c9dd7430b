"""Spatial and temporal discretisation: stencils, evaluations, kernels."""
from .stencils import StencilSpec, central_coefficients, solve_exact
from .evaluations import Evaluation, EvaluationSet, build_evaluations
from .kernels import (ConstantPool, Kernel, Lowerer, build_assignment_kernel,
                      build_residual_kernels, fuse_kernels, lower_derivative, lower_evaluation,
                      pool_temporaries)
from .temporal import (FORWARD_EULER, RK3_LOW_STORAGE, TemporalScheme, build_temporal_kernels,
                       get_scheme)

__all__ = [
    "ConstantPool", "Evaluation", "EvaluationSet", "FORWARD_EULER", "Kernel", "Lowerer",
    "RK3_LOW_STORAGE", "StencilSpec", "TemporalScheme", "build_assignment_kernel",
    "build_evaluations", "build_residual_kernels", "build_temporal_kernels",
    "central_coefficients", "fuse_kernels", "get_scheme", "lower_derivative",
    "lower_evaluation", "pool_temporaries", "solve_exact",
]
