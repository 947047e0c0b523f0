"""Immutable operator trees over a single positive real variable ``x``."""

from __future__ import annotations

from dataclasses import dataclass

UNARY_OPERATORS = (
    "neg", "abs", "sqrt",
    "sin", "cos", "tan", "cot", "sec", "csc", "asin", "acos", "atan",
    "sinh", "cosh", "tanh", "coth", "asinh", "acosh", "atanh",
    "ln", "exp",
)
BINARY_OPERATORS = ("add", "mul", "div", "pow")

ARITY = {name: 1 for name in UNARY_OPERATORS}
ARITY.update({name: 2 for name in BINARY_OPERATORS})

TRIG = frozenset({"sin", "cos", "tan", "cot", "sec", "csc", "asin", "acos", "atan"})
HYPERBOLIC = frozenset({"sinh", "cosh", "tanh", "coth", "asinh", "acosh", "atanh"})
LOGEXP = frozenset({"ln", "exp"})
ARITHMETIC = frozenset({"add", "mul", "div", "pow", "neg", "abs", "sqrt"})

NAMED_CONSTANTS = ("pi", "euler")


class Expr:
    """Base class of every expression node."""

    __slots__ = ()

    @property
    def children(self) -> tuple[Expr, ...]:
        return ()


@dataclass(frozen=True, slots=True)
class Var(Expr):
    def __repr__(self) -> str:
        return "x"


@dataclass(frozen=True, slots=True)
class Int(Expr):
    value: int

    def __repr__(self) -> str:
        return str(self.value)


@dataclass(frozen=True, slots=True)
class NamedConst(Expr):
    name: str

    def __repr__(self) -> str:
        return self.name


@dataclass(frozen=True, slots=True)
class Op(Expr):
    name: str
    args: tuple[Expr, ...]

    @property
    def children(self) -> tuple[Expr, ...]:
        return self.args

    def __repr__(self) -> str:
        return f"{self.name}({', '.join(map(repr, self.args))})"


X = Var()
PI = NamedConst("pi")
E = NamedConst("euler")


def op(name: str, *args: Expr) -> Op:
    return Op(name, tuple(args))


def add(a, b):
    return Op("add", (a, b))


def mul(a, b):
    return Op("mul", (a, b))


def div(a, b):
    return Op("div", (a, b))


def pow_(a, b):
    return Op("pow", (a, b))


def neg(a):
    return Op("neg", (a,))


def sub(a, b):
    """``a - b``, stored as ``add(a, neg(b))``."""
    return Op("add", (a, Op("neg", (b,))))


def const(n: int) -> Int:
    return Int(int(n))


def walk(expr: Expr):
    """Pre-order traversal."""
    stack = [expr]
    while stack:
        node = stack.pop()
        yield node
        stack.extend(reversed(node.children))


def node_count(expr: Expr) -> int:
    return sum(1 for _ in walk(expr))


def depth(expr: Expr) -> int:
    if not expr.children:
        return 1
    return 1 + max(depth(c) for c in expr.children)


def is_constant(expr: Expr) -> bool:
    """True when ``x`` does not occur anywhere in the tree."""
    return not any(isinstance(node, Var) for node in walk(expr))


def count_operators(expr: Expr) -> int:
    """Number of operator nodes; a ``neg`` directly on a literal is a sign, not an operator."""
    total = 0
    for node in walk(expr):
        if isinstance(node, Op):
            if node.name == "neg" and isinstance(node.args[0], (Int, NamedConst)):
                continue
            total += 1
    return total


def operator_names(expr: Expr) -> set[str]:
    return {node.name for node in walk(expr) if isinstance(node, Op)}


def map_bottom_up(expr: Expr, fn) -> Expr:
    """Rebuild ``expr`` applying ``fn`` to every node after its children."""
    if isinstance(expr, Op):
        args = tuple(map_bottom_up(a, fn) for a in expr.args)
        if args != expr.args:
            expr = Op(expr.name, args)
    return fn(expr)
