import math

import numpy as np
import pytest

from geoxrt.expressions import X1, X2, ExpressionError, compile_expr, parse


def test_parse_and_evaluate():
    fn = compile_expr(parse("exp(-(x1**2 + x2**2)/0.5) + sin(beta)*cos(alpha) + pi"))
    v = fn(0.3, 0.4, 0.2, 0.1)
    assert v == pytest.approx(math.exp(-0.5) + math.sin(0.2) * math.cos(0.1) + math.pi)


def test_constants_broadcast():
    fn = compile_expr(parse("2"))
    out = fn(np.zeros(5), np.zeros(5), 0.0, 0.0)
    assert out.shape == (5,) and np.all(out == 2)


def test_restricted_variables():
    with pytest.raises(ExpressionError):
        parse("beta + x1", variables=("x1", "x2"))
    fn = compile_expr(parse("x1*x2", ("x1", "x2")), (X1, X2))
    assert fn(2.0, 3.0) == 6.0


@pytest.mark.parametrize("text", ["", "   ", "__import__('os')", "lambda: 1", "x1; x2", "[x1]",
                                  "x1 = 2", "log(x1)", "sqrt(x2)", "y + 1", "x1 <"])
def test_rejected(text):
    with pytest.raises(ExpressionError):
        parse(text)


def test_non_string_rejected():
    with pytest.raises(ExpressionError):
        parse(3.0)
