"""Numeric evaluation on the positive reals.

Undefined values (domain errors, division by zero, overflow) are carried as
NaN in the vectorized evaluator and as ``None`` by :func:`eval_numeric`.
Undefined is absorbing: once a subterm is undefined at a point, every
ancestor is undefined there too.
"""

from __future__ import annotations

import math

import numpy as np

from .nodes import Expr, Int, NamedConst, Op, Var

_CONSTANTS = {"pi": math.pi, "euler": math.e}

_UNARY = {
    "neg": np.negative,
    "abs": np.abs,
    "sqrt": np.sqrt,
    "sin": np.sin,
    "cos": np.cos,
    "tan": np.tan,
    "cot": lambda v: np.cos(v) / np.sin(v),
    "sec": lambda v: 1.0 / np.cos(v),
    "csc": lambda v: 1.0 / np.sin(v),
    "asin": np.arcsin,
    "acos": np.arccos,
    "atan": np.arctan,
    "sinh": np.sinh,
    "cosh": np.cosh,
    "tanh": np.tanh,
    "coth": lambda v: np.cosh(v) / np.sinh(v),
    "asinh": np.arcsinh,
    "acosh": np.arccosh,
    "atanh": np.arctanh,
    "ln": np.log,
    "exp": np.exp,
}

_BINARY = {
    "add": np.add,
    "mul": np.multiply,
    "div": np.divide,
    "pow": np.power,
}


def _int_value(n: int) -> float:
    try:
        return float(n)
    except OverflowError:
        return math.nan


def evaluate(expr: Expr, xs) -> np.ndarray:
    """Evaluate ``expr`` at every point of ``xs``; undefined points are NaN."""
    xs = np.asarray(xs, dtype=np.float64)
    with np.errstate(all="ignore"):
        return _eval(expr, xs)


def _eval(expr: Expr, xs: np.ndarray) -> np.ndarray:
    if isinstance(expr, Var):
        out = xs.copy()
    elif isinstance(expr, Int):
        out = np.full_like(xs, _int_value(expr.value))
    elif isinstance(expr, NamedConst):
        out = np.full_like(xs, _CONSTANTS[expr.name])
    elif isinstance(expr, Op):
        vals = [_eval(a, xs) for a in expr.args]
        if len(vals) == 1:
            out = _UNARY[expr.name](vals[0])
        else:
            out = _BINARY[expr.name](vals[0], vals[1])
        out = np.asarray(out, dtype=np.float64)
        for v in vals:
            out[np.isnan(v)] = np.nan
    else:
        raise TypeError(f"cannot evaluate {expr!r}")
    out[~np.isfinite(out)] = np.nan
    return out


def eval_numeric(expr: Expr, x: float) -> float | None:
    """Value of ``expr`` at a single point, or ``None`` when undefined."""
    value = float(evaluate(expr, np.array([x]))[0])
    return None if math.isnan(value) else value
