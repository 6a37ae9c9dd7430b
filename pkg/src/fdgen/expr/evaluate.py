"""Numeric evaluation of expressions over scalars or numpy arrays."""
from __future__ import annotations

from typing import Callable, Mapping

import numpy as np

from .nodes import Add, Derivative, EinsteinTerm, Expr, Field, FloatConst, Fn, Mul, Pow, RationalConst

_FUNCS = {"sin": np.sin, "cos": np.cos, "exp": np.exp, "tanh": np.tanh, "sqrt": np.sqrt}


def evaluate(e: Expr, env: Mapping[str, object],
             derivative: Callable[[Derivative], object] | None = None):
    """Evaluate ``e``; symbols and fields are looked up by name in ``env``."""
    if isinstance(e, RationalConst):
        return float(e.value)
    if isinstance(e, FloatConst):
        return e.value
    if isinstance(e, (EinsteinTerm, Field)):
        try:
            return env[e.name]
        except KeyError:
            raise KeyError(f"no value for {e.name!r}") from None
    if isinstance(e, Add):
        out = evaluate(e.args[0], env, derivative)
        for a in e.args[1:]:
            out = out + evaluate(a, env, derivative)
        return out
    if isinstance(e, Mul):
        out = evaluate(e.args[0], env, derivative)
        for a in e.args[1:]:
            out = out * evaluate(a, env, derivative)
        return out
    if isinstance(e, Pow):
        base = evaluate(e.base, env, derivative)
        exp = evaluate(e.exp, env, derivative)
        if isinstance(base, float) and isinstance(exp, float):
            return base ** exp
        return np.power(base, exp)
    if isinstance(e, Fn) and e.head in _FUNCS:
        v = evaluate(e.args[0], env, derivative)
        out = _FUNCS[e.head](v)
        return float(out) if np.ndim(out) == 0 else out
    if isinstance(e, Derivative) and derivative is not None:
        return derivative(e)
    raise TypeError(f"cannot evaluate {e}")
