"""Fixed-point local simplifier.

Every rule here strictly shrinks the tree, which is what makes the fixed
point reachable and the result idempotent.
"""

from __future__ import annotations

import math

from ..expr.nodes import E, Expr, Int, Op

_ZERO = Int(0)
_ONE = Int(1)
_MAX_POW_BITS = 256


class _Budget:
    __slots__ = ("left",)

    def __init__(self, steps):
        self.left = steps

    def spend(self) -> bool:
        if self.left is None:
            return True
        if self.left <= 0:
            return False
        self.left -= 1
        return True


def _is_int(e, value=None) -> bool:
    return isinstance(e, Int) and (value is None or e.value == value)


def _is_op(e, name) -> bool:
    return isinstance(e, Op) and e.name == name


def _pythagorean(a: Expr, b: Expr) -> bool:
    """``sin(u)^2 + cos(u)^2`` in either order."""
    if not (_is_op(a, "pow") and _is_op(b, "pow")):
        return False
    if not (_is_int(a.args[1], 2) and _is_int(b.args[1], 2)):
        return False
    fa, fb = a.args[0], b.args[0]
    if not (isinstance(fa, Op) and isinstance(fb, Op)) or fa.args != fb.args:
        return False
    return {fa.name, fb.name} == {"sin", "cos"}


def _fold(name, a, b):
    if name == "add":
        return Int(a + b)
    return Int(a * b)


def _local(node: Op) -> Expr | None:
    """One rewrite at ``node``; None when no rule applies."""
    name, args = node.name, node.args
    if name in ("add", "mul"):
        a, b = args
        if _is_int(a) and _is_int(b):
            return _fold(name, a.value, b.value)
        if name == "add":
            if _is_int(a, 0):
                return b
            if _is_int(b, 0):
                return a
            if (_is_op(b, "neg") and b.args[0] == a) or (_is_op(a, "neg") and a.args[0] == b):
                return _ZERO
            if _pythagorean(a, b):
                return _ONE
        else:
            if _is_int(a, 0) or _is_int(b, 0):
                return _ZERO
            if _is_int(a, 1):
                return b
            if _is_int(b, 1):
                return a
            if _is_int(a, -1):
                return Op("neg", (b,))
            if _is_int(b, -1):
                return Op("neg", (a,))
        # nested constants: (e + c1) + c2, c1 + (c2 + e), ...
        if _is_int(b) and _is_op(a, name):
            inner = a.args
            if _is_int(inner[1]):
                return Op(name, (inner[0], _fold(name, inner[1].value, b.value)))
            if _is_int(inner[0]):
                return Op(name, (_fold(name, inner[0].value, b.value), inner[1]))
        if _is_int(a) and _is_op(b, name):
            inner = b.args
            if _is_int(inner[0]):
                return Op(name, (_fold(name, a.value, inner[0].value), inner[1]))
            if _is_int(inner[1]):
                return Op(name, (inner[0], _fold(name, a.value, inner[1].value)))
        return None
    if name == "div":
        a, b = args
        if _is_int(b, 1):
            return a
        if _is_int(a) and _is_int(b) and b.value != 0 and a.value % b.value == 0:
            return Int(a.value // b.value)
        return None
    if name == "pow":
        a, b = args
        if _is_int(b, 1):
            return a
        if _is_int(b, 0):
            return _ONE
        if _is_int(a) and _is_int(b) and b.value > 0:
            if abs(a.value) <= 1 or a.value.bit_length() * b.value <= _MAX_POW_BITS:
                return Int(a.value ** b.value)
        return None
    if name == "neg":
        (a,) = args
        if _is_int(a):
            return Int(-a.value)
        if _is_op(a, "neg"):
            return a.args[0]
        return None
    if name == "ln":
        if _is_int(args[0], 1):
            return _ZERO
        if args[0] == E:
            return _ONE
        return None
    if name == "exp":
        if _is_int(args[0], 0):
            return _ONE
        return None
    if name == "abs":
        if _is_int(args[0]):
            return Int(abs(args[0].value))
        return None
    if name == "sqrt":
        a = args[0]
        if _is_int(a) and a.value >= 0:
            r = math.isqrt(a.value)
            if r * r == a.value:
                return Int(r)
        return None
    return None


def _has_redex(expr: Expr) -> bool:
    if not isinstance(expr, Op):
        return False
    return _local(expr) is not None or any(_has_redex(a) for a in expr.args)


def _pass(expr: Expr, budget: _Budget) -> Expr:
    if not isinstance(expr, Op):
        return expr
    args = tuple(_pass(a, budget) for a in expr.args)
    node = expr if args == expr.args else Op(expr.name, args)
    while isinstance(node, Op):
        out = _local(node)
        if out is None or not budget.spend():
            break
        node = out
    return node


def simplify_with_budget(expr: Expr, max_steps: int | None = None) -> tuple[Expr, bool]:
    """Simplify to a fixed point; returns ``(result, completed)``.

    ``completed`` is False when the step budget ran out first.
    """
    budget = _Budget(max_steps)
    while True:
        out = _pass(expr, budget)
        if budget.left is not None and budget.left <= 0:
            return out, not _has_redex(out)
        if out == expr:
            return out, True
        expr = out


def simplify_basic(expr: Expr, max_steps: int | None = None) -> Expr:
    return simplify_with_budget(expr, max_steps)[0]
