from __future__ import annotations

from .nodes import ARITY, NAMED_CONSTANTS, Expr, Int, NamedConst, Op, Var, walk
from .prefix import to_prefix

MAX_TOKENS = 256


def validate(expr, max_tokens: int | None = None) -> list[str]:
    """Return a list of violations; an empty list means the expression is valid."""
    problems: list[str] = []
    try:
        nodes = list(walk(expr))
    except AttributeError:
        return [f"not an expression: {expr!r}"]
    for node in nodes:
        if isinstance(node, Op):
            if node.name not in ARITY:
                problems.append(f"operator: {node.name!r} is not whitelisted")
            elif len(node.args) != ARITY[node.name]:
                problems.append(
                    f"arity: {node.name} takes {ARITY[node.name]} operand(s), got {len(node.args)}"
                )
            for a in node.args:
                if not isinstance(a, Expr):
                    problems.append(f"child: {a!r} is not an expression")
        elif isinstance(node, Int):
            if not isinstance(node.value, int) or isinstance(node.value, bool):
                problems.append(f"integer: {node.value!r} is not an integer")
        elif isinstance(node, NamedConst):
            if node.name not in NAMED_CONSTANTS:
                problems.append(f"constant: unknown named constant {node.name!r}")
        elif not isinstance(node, Var):
            problems.append(f"node: unsupported node {node!r}")
    if max_tokens is not None and not problems:
        n = len(to_prefix(expr))
        if n > max_tokens:
            problems.append(f"length: {n} tokens exceeds cap of {max_tokens}")
    return problems


def is_valid(expr, max_tokens: int | None = None) -> bool:
    return not validate(expr, max_tokens)


_PREC = {"add": 1, "mul": 2, "div": 2, "neg": 3, "pow": 4}
_FUNC_NAMES = {"ln": "log"}


def to_infix(expr: Expr) -> str:
    """Human-readable infix rendering used in reports."""
    return _infix(expr)[0]


def _infix(expr: Expr) -> tuple[str, int]:
    if isinstance(expr, Var):
        return "x", 9
    if isinstance(expr, Int):
        return (str(expr.value), 9) if expr.value >= 0 else (str(expr.value), 3)
    if isinstance(expr, NamedConst):
        return ("pi" if expr.name == "pi" else "e"), 9
    if not isinstance(expr, Op):
        return str(getattr(expr, "token", expr)), 9

    def wrap(sub, need):
        text, prec = _infix(sub)
        return f"({text})" if prec < need else text

    name = expr.name
    if name == "add":
        left = wrap(expr.args[0], 1)
        right = expr.args[1]
        if isinstance(right, Op) and right.name == "neg":
            return f"{left} - {wrap(right.args[0], 2)}", 1
        if isinstance(right, Int) and right.value < 0:
            return f"{left} - {-right.value}", 1
        return f"{left} + {wrap(right, 1)}", 1
    if name == "mul":
        return f"{wrap(expr.args[0], 2)}*{wrap(expr.args[1], 3)}", 2
    if name == "div":
        return f"{wrap(expr.args[0], 2)}/{wrap(expr.args[1], 3)}", 2
    if name == "pow":
        return f"{wrap(expr.args[0], 5)}^{wrap(expr.args[1], 5)}", 4
    if name == "neg":
        return f"-{wrap(expr.args[0], 3)}", 3
    inner = _infix(expr.args[0])[0]
    return f"{_FUNC_NAMES.get(name, name)}({inner})", 9
