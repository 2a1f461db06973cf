import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from caloric.expr import Expression, ExpressionError

PTS = np.array([[0.3, 0.7], [-1.2, 0.1], [0.0, 2.0]])


@pytest.mark.parametrize(
    "text, oracle",
    [
        ("x^2+2*t", lambda x, t: x**2 + 2 * t),
        ("x**3 + 6*x*t", lambda x, t: x**3 + 6 * x * t),
        ("exp(t)*cosh(x)", lambda x, t: np.exp(t) * np.cosh(x)),
        ("-sinh(x)/2 + abs(x - t)", lambda x, t: -np.sinh(x) / 2 + np.abs(x - t)),
        ("sqrt(t) + log(1 + t) + sin(pi*x) - cos(e)", lambda x, t: np.sqrt(t) + np.log1p(t) + np.sin(np.pi * x) - np.cos(np.e)),
        ("2^-1", lambda x, t: 0.5 + 0 * x),
    ],
)
def test_values(text, oracle):
    np.testing.assert_allclose(Expression(text, 1)(PTS), oracle(PTS[:, 0], PTS[:, 1]), rtol=1e-15)


def test_indexed_names_in_higher_dimension():
    f = Expression("x1^2 + x2^2 + 4*t", 2)
    assert f(np.array([1.0, 2.0, 0.5])) == 7.0
    with pytest.raises(ExpressionError, match="unknown name 'x'"):
        Expression("x + t", 2)


def test_constant_broadcasts():
    assert Expression("1.5", 1)(np.zeros((4, 3, 2))).shape == (4, 3)


def test_predicates():
    f = Expression("abs(x) < 0.5 and not t >= 0.5 or x > 1", 1)
    pts = np.array([[0.2, 0.3], [0.2, 0.6], [2.0, 0.9], [0.7, 0.1]])
    assert f(pts).tolist() == [True, False, True, False]
    assert Expression("0 < x < 1", 1)(pts).tolist() == [True, True, False, True]


@pytest.mark.parametrize(
    "text, pos",
    [
        ("x^2 + foo(t)", 6),
        ("x^2 + 3*y", 8),
        ("x^^2", 2),
        ("  3 + y", 6),
        ("x.real", 0),
        ("__import__('os')", 0),
        ("cosh(x, t)", 0),
        ("'a'", 0),
    ],
)
def test_errors_point_at_the_culprit(text, pos):
    with pytest.raises(ExpressionError) as info:
        Expression(text, 1)
    assert info.value.position == pos
    assert info.value.caret().splitlines()[1] == " " * pos + "^"


def test_wrong_point_dimension():
    with pytest.raises(ValueError):
        Expression("x", 1)(np.zeros((2, 3)))


@settings(max_examples=50, deadline=None)
@given(st.integers(-5, 5), st.integers(0, 4), st.floats(-2, 2), st.floats(-2, 2))
def test_caret_power_matches_python(c, k, x, t):
    f = Expression(f"{c}*x^{k} + t", 1)
    assert f(np.array([x, t])) == pytest.approx(c * x**k + t, rel=1e-14, abs=1e-14)
