from fractions import Fraction
from math import factorial

import pytest
import sympy
from hypothesis import given, strategies as st

from fdgen.discretize import central_coefficients, solve_exact

ACCURACIES = [2, 4, 6, 8, 10, 12]
CASES = [(d, a) for d in (1, 2) for a in ACCURACIES]


def F(*xs):
    return tuple(Fraction(x) for x in xs)


def test_frozen_weights():
    s = central_coefficients(1, 2)
    assert s.offsets == (-1, 0, 1) and s.weights == F("-1/2", 0, "1/2")
    assert central_coefficients(2, 2).weights == F(1, -2, 1)
    assert central_coefficients(1, 4).weights == F("1/12", "-2/3", 0, "2/3", "-1/12")


@pytest.mark.parametrize("degree,accuracy", CASES)
def test_matches_sympy_finite_diff_weights(degree, accuracy):
    m = accuracy // 2
    offsets = list(range(-m, m + 1))
    ref = sympy.finite_diff_weights(degree, offsets, 0)[degree][-1]
    got = central_coefficients(degree, accuracy).weights
    assert [sympy.Rational(w.numerator, w.denominator) for w in got] == list(ref)


@pytest.mark.parametrize("degree,accuracy", CASES)
def test_moment_conditions(degree, accuracy):
    s = central_coefficients(degree, accuracy)
    for q in range(len(s.offsets)):
        moment = sum(w * Fraction(k) ** q for k, w in zip(s.offsets, s.weights))
        assert moment == (factorial(degree) if q == degree else 0)


@pytest.mark.parametrize("degree,accuracy", CASES)
def test_polynomial_exactness(degree, accuracy):
    s = central_coefficients(degree, accuracy)
    h = Fraction(1, 7)
    x0 = Fraction(3, 5)
    for q in range(accuracy + degree):
        approx = sum(w * (x0 + k * h) ** q for k, w in zip(s.offsets, s.weights)) / h ** degree
        exact = Fraction(0) if q < degree else \
            Fraction(factorial(q), factorial(q - degree)) * x0 ** (q - degree)
        assert approx == exact


@pytest.mark.parametrize("degree,accuracy", CASES)
def test_weight_symmetry(degree, accuracy):
    s = central_coefficients(degree, accuracy)
    for k in range(1, s.width + 1):
        if degree == 1:
            assert s.weight(-k) == -s.weight(k)
        else:
            assert s.weight(-k) == s.weight(k)
    if degree == 1:
        assert s.weight(0) == 0


def test_invalid_accuracy():
    with pytest.raises(ValueError):
        central_coefficients(1, 3)
    with pytest.raises(ValueError):
        central_coefficients(3, 2)


@given(st.lists(st.lists(st.fractions(max_denominator=9), min_size=3, max_size=3),
                min_size=3, max_size=3),
       st.lists(st.fractions(max_denominator=9), min_size=3, max_size=3))
def test_exact_solver(matrix, rhs):
    det = sympy.Matrix(matrix).det()
    if det == 0:
        with pytest.raises(ValueError):
            solve_exact(matrix, rhs)
        return
    x = solve_exact(matrix, rhs)
    for row, b in zip(matrix, rhs):
        assert sum(a * v for a, v in zip(row, x)) == b
