"""Symbolic expression core: nodes, exact rationals, parser, substitution, LaTeX."""
from .nodes import (ELEMENTARY, HALF, HEADS, NEG_ONE, ONE, ZERO, Add, Derivative, EinsteinTerm,
                    Expr, Field, FloatConst, Fn, Idx, Mul, Pow, Rational, RationalConst, add,
                    coeff_and_core, distribute, fields_in, fn, free_symbols, is_integer,
                    is_number, mul, num, power)
from .parser import Equation, make_term, parse_equation, parse_expression
from .substitute import index_letters, rename_indices, substitute, substitute_expression
from .latex import latex, latex_equation, render_latex
from .evaluate import evaluate

__all__ = [
    "ELEMENTARY", "HALF", "HEADS", "NEG_ONE", "ONE", "ZERO", "Add", "Derivative", "EinsteinTerm",
    "Equation", "Expr", "evaluate", "Field", "FloatConst", "Fn", "Idx", "Mul", "Pow", "Rational",
    "RationalConst", "add", "coeff_and_core", "distribute", "fields_in", "fn", "free_symbols",
    "index_letters", "is_integer", "is_number", "latex", "latex_equation", "make_term", "mul",
    "num", "parse_equation", "parse_expression", "power", "rename_indices", "render_latex",
    "substitute", "substitute_expression",
]
