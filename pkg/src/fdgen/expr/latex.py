"""LaTeX rendering of parsed and expanded equations, for eyeballing index expansion."""
from __future__ import annotations

from fractions import Fraction
from typing import Iterable

from .nodes import (Add, Derivative, EinsteinTerm, Expr, Field, FloatConst, Fn, Idx, Mul, Pow,
                    RationalConst, coeff_and_core, is_number, mul, power)

GREEK = {
    "alpha", "beta", "gamma", "delta", "epsilon", "zeta", "eta", "theta", "iota", "kappa",
    "lambda", "mu", "nu", "xi", "pi", "rho", "sigma", "tau", "upsilon", "phi", "chi", "psi",
    "omega", "Gamma", "Delta", "Theta", "Lambda", "Xi", "Pi", "Sigma", "Phi", "Psi", "Omega",
}

_PREAMBLE = "\\documentclass{article}\n\\usepackage{amsmath}\n\\begin{document}\n"
_CLOSING = "\\end{document}\n"


def _name(base: str) -> str:
    return "\\" + base if base in GREEK else base


def _var(direction) -> str:
    return "t" if direction == "t" else f"x_{{{direction}}}"


def _num(v) -> str:
    if isinstance(v, Fraction):
        if v.denominator == 1:
            return str(v.numerator)
        return f"\\frac{{{abs(v.numerator)}}}{{{v.denominator}}}" if v > 0 else \
            f"-\\frac{{{abs(v.numerator)}}}{{{v.denominator}}}"
    return repr(v)


def _is_atomic(e: Expr) -> bool:
    return isinstance(e, (EinsteinTerm, Field, Idx, Fn, Derivative)) or \
        (is_number(e) and e.value >= 0)


def latex(e: Expr) -> str:
    if isinstance(e, (RationalConst, FloatConst)):
        return _num(e.value)
    if isinstance(e, EinsteinTerm):
        if e.is_coordinate and not e.indices and e.name[1:].isdigit():
            return f"x_{{{e.name[1:]}}}"
        sub = "".join(e.indices)
        return _name(e.name) + (f"_{{{sub}}}" if sub else "")
    if isinstance(e, Field):
        comps = "".join(str(c) for c in e.components)
        return _name(e.base) + (f"_{{{comps}}}" if comps else "")
    if isinstance(e, Idx):
        return str(e.value)
    if isinstance(e, Add):
        out = latex(e.args[0])
        for t in e.args[1:]:
            c, _ = coeff_and_core(t)
            out += (" - " + latex(mul(-1, t))) if c < 0 else (" + " + latex(t))
        return out
    if isinstance(e, Mul):
        return _latex_mul(e)
    if isinstance(e, Pow):
        if is_number(e.exp) and e.exp.value < 0:
            return _latex_mul(Mul((e,)))
        base = latex(e.base) if _is_atomic(e.base) else f"\\left({latex(e.base)}\\right)"
        return f"{base}^{{{latex(e.exp)}}}"
    if isinstance(e, Fn):
        return _latex_fn(e)
    if isinstance(e, Derivative):
        return _latex_derivative(e.operand, e.direction, e.degree)
    raise TypeError(type(e))


def _latex_mul(e: Mul) -> str:
    c, core = coeff_and_core(e)
    factors = core.args if isinstance(core, Mul) else (core,)
    numer, denom = [], []
    for f in factors:
        if isinstance(f, Pow) and is_number(f.exp) and f.exp.value < 0:
            denom.append(power(f.base, -f.exp.value))
        else:
            numer.append(f)
    sign = "-" if c < 0 else ""
    c = abs(c)

    def join(fs):
        return " ".join(latex(f) if not isinstance(f, Add) else f"\\left({latex(f)}\\right)"
                        for f in fs)
    if denom:
        top = join(numer) or "1"
        if isinstance(c, Fraction):
            top = (str(c.numerator) + " " if c.numerator != 1 else "") + top if numer \
                else str(c.numerator)
            bottom = (str(c.denominator) + " " if c.denominator != 1 else "") + join(denom)
        else:
            top = (repr(c) + " " if c != 1 else "") + top
            bottom = join(denom)
        return f"{sign}\\frac{{{top.strip()}}}{{{bottom.strip()}}}"
    lead = "" if c == 1 else _num(c) + " "
    return sign + lead + join(numer)


def _latex_derivative(operand, direction, degree: int = 1) -> str:
    var = _var(direction)
    if degree == 1:
        if isinstance(operand, (Field, EinsteinTerm)):
            return f"\\frac{{\\partial {latex(operand)}}}{{\\partial {var}}}"
        return f"\\frac{{\\partial}}{{\\partial {var}}}\\left[{latex(operand)}\\right]"
    if isinstance(operand, (Field, EinsteinTerm)):
        return f"\\frac{{\\partial^{{{degree}}} {latex(operand)}}}{{\\partial {var}^{{{degree}}}}}"
    return (f"\\frac{{\\partial^{{{degree}}}}}{{\\partial {var}^{{{degree}}}}}"
            f"\\left[{latex(operand)}\\right]")


def _latex_fn(e: Fn) -> str:
    h, args = e.head, e.args
    if h in ("Der", "Conservative", "Skew"):
        out = args[0]
        text = None
        for v in args[1:]:
            var = latex(v) if not (isinstance(v, EinsteinTerm) and v.is_time) else "t"
            inner = latex(out) if text is None else text
            if text is None and isinstance(out, (Field, EinsteinTerm)):
                text = f"\\frac{{\\partial {inner}}}{{\\partial {var}}}"
            else:
                text = f"\\frac{{\\partial}}{{\\partial {var}}}\\left[{inner}\\right]"
        if h == "Skew":
            text = f"\\left.{text}\\right|_{{\\mathrm{{skew}}}}"
        return text
    if h == "KroneckerDelta":
        return f"\\delta_{{{''.join(latex(a) for a in args)}}}"
    if h == "LeviCivita":
        return f"\\varepsilon_{{{''.join(latex(a) for a in args)}}}"
    if h == "sqrt":
        return f"\\sqrt{{{latex(args[0])}}}"
    return f"\\{h}\\left({latex(args[0])}\\right)"


def latex_equation(eq) -> str:
    """One equation, either a parsed ``Equation`` or an ``ExpandedEquation``."""
    lhs = getattr(eq, "lhs")
    return f"{latex(lhs)} = {latex(eq.rhs)}"


def render_latex(eqs: Iterable) -> str:
    """A LaTeX document with one display equation per input equation."""
    body = "".join(f"\\begin{{equation}}\n{latex_equation(eq)}\n\\end{{equation}}\n"
                   for eq in eqs)
    return _PREAMBLE + body + _CLOSING
