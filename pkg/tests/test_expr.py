import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from aggdiff.expr import ExpressionError, central_derivative, parse_expression


@pytest.mark.parametrize(
    "src, x, value",
    [
        ("x^2/2", 3.0, 4.5),
        ("-exp(-x^2/2)", 0.0, -1.0),
        ("x^2^3", 2.0, 256.0),
        ("2*x - 3/x", 2.0, 2.5),
        ("-x^2", 3.0, -9.0),
        ("pow(x, 3) + min(x, 1) + max(x, 1)", 2.0, 11.0),
        ("sqrt(abs(x)) + log(exp(1)) + cos(0) + sin(0)", -4.0, 4.0),
        ("1e-3 * 2.5E2", 0.0, 0.25),
        ("pi", 0.0, math.pi),
    ],
)
def test_evaluation(src, x, value):
    assert parse_expression(src)(x) == pytest.approx(value, rel=1e-15)


def test_vectorised():
    f = parse_expression("x^2 + 1")
    np.testing.assert_allclose(f(np.array([0.0, 1.0, 2.0])), [1.0, 2.0, 5.0])
    assert isinstance(f(1.0), float)


@pytest.mark.parametrize(
    "src, column",
    [
        ("x +", 4),
        ("2 * y", 5),
        ("foo(x)", 1),
        ("pow(x)", 1),
        ("exp(x, 2)", 1),
        ("(x + 1", 7),
        ("x $ 2", 3),
        ("x 2", 3),
    ],
)
def test_errors_carry_columns(src, column):
    with pytest.raises(ExpressionError) as info:
        parse_expression(src)
    assert info.value.column == column
    assert "column" in str(info.value)


def test_other_variable():
    assert parse_expression("s*log(s)", "s")(1.0) == 0.0
    with pytest.raises(ExpressionError):
        parse_expression("x", "s")


@st.composite
def trees(draw, depth=0):
    if depth > 3 or draw(st.booleans()):
        return draw(st.sampled_from(["x", "2", "0.5", "3.25", "pi"]))
    kind = draw(st.sampled_from(["bin", "neg", "call1", "call2"]))
    if kind == "bin":
        op = draw(st.sampled_from(["+", "-", "*", "/"]))
        return f"{draw(trees(depth=depth + 1))} {op} {draw(trees(depth=depth + 1))}"
    if kind == "neg":
        return f"-({draw(trees(depth=depth + 1))})"
    if kind == "call1":
        fn = draw(st.sampled_from(["sin", "cos", "abs", "exp"]))
        return f"{fn}({draw(trees(depth=depth + 1))} / 10)"
    fn = draw(st.sampled_from(["min", "max"]))
    return f"{fn}({draw(trees(depth=depth + 1))}, {draw(trees(depth=depth + 1))})"


@given(trees())
def test_pretty_round_trip(src):
    e = parse_expression(src)
    again = parse_expression(e.pretty())
    xs = np.random.default_rng(0).uniform(-3, 3, 100)
    a, b = e(xs), again(xs)
    same = np.isclose(a, b, rtol=1e-12, atol=1e-12) | (np.isnan(a) & np.isnan(b)) | (a == b)
    assert same.all()


def test_power_round_trip_keeps_associativity():
    e = parse_expression("x^2^3 - (x^2)^3")
    assert parse_expression(e.pretty())(2.0) == e(2.0) == 256.0 - 64.0


def test_central_derivative_accuracy():
    f = parse_expression("sin(x)")
    xs = np.linspace(-3, 3, 13)
    np.testing.assert_allclose(central_derivative(f, xs), np.cos(xs), atol=1e-9)
    np.testing.assert_allclose(central_derivative(f, xs, order=2), -np.sin(xs), atol=1e-5)
