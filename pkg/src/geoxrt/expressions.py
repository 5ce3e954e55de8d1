"""Small arithmetic expression grammar used by the JSON configs.

Expressions are strings over the variables ``x1``, ``x2``, ``beta`` and
``alpha`` combined with ``+ - * / **``, numeric literals, ``pi`` and the
functions ``exp``, ``sin``, ``cos``.  They are parsed with sympy (so the
metric module can differentiate them symbolically) and compiled to
vectorised numpy callables.
"""

from __future__ import annotations

import numpy as np
import sympy as sp
from sympy.parsing.sympy_parser import parse_expr, standard_transformations

X1, X2, BETA, ALPHA = sp.symbols("x1 x2 beta alpha", real=True)

VARIABLES = {"x1": X1, "x2": X2, "beta": BETA, "alpha": ALPHA}
FUNCTIONS = {"exp": sp.exp, "sin": sp.sin, "cos": sp.cos}
_ALLOWED_FUNCS = (sp.exp, sp.sin, sp.cos)


class ExpressionError(ValueError):
    """Raised for expressions outside the supported grammar."""


def parse(text: str, variables=("x1", "x2", "beta", "alpha")) -> sp.Expr:
    if not isinstance(text, str) or not text.strip():
        raise ExpressionError(f"expression must be a non-empty string, got {text!r}")
    if any(tok in text for tok in ("__", "lambda", ";", "[", "{", "=")):
        raise ExpressionError(f"unsupported syntax in {text!r}")
    local = {name: VARIABLES[name] for name in variables}
    local.update(FUNCTIONS)
    local["pi"] = sp.pi
    try:
        expr = parse_expr(text, local_dict=local, global_dict={"Integer": sp.Integer,
                                                               "Float": sp.Float,
                                                               "Rational": sp.Rational,
                                                               "Symbol": sp.Symbol},
                          transformations=standard_transformations, evaluate=True)
    except Exception as exc:  # sympy raises a zoo of exception types
        raise ExpressionError(f"cannot parse {text!r}: {exc}") from exc
    if not isinstance(expr, sp.Expr):
        raise ExpressionError(f"{text!r} is not an arithmetic expression")
    unknown = expr.free_symbols - {local[v] for v in variables}
    if unknown:
        raise ExpressionError(f"unknown names {sorted(map(str, unknown))} in {text!r}")
    for fn in expr.atoms(sp.Function):
        if not isinstance(fn, _ALLOWED_FUNCS):
            raise ExpressionError(f"function {fn.func} not allowed in {text!r}")
    return expr


def compile_expr(expr: sp.Expr, args=(X1, X2, BETA, ALPHA)):
    """Vectorised numpy callable ``f(*args)`` that broadcasts constants."""
    fn = sp.lambdify(args, expr, modules="numpy")

    def call(*values):
        out = fn(*values)
        shape = np.broadcast_shapes(*(np.shape(v) for v in values))
        return np.broadcast_to(out, shape) if np.shape(out) != shape else out

    return call
