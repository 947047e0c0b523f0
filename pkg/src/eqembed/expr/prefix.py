"""Polish-notation serialization.

Integers are written as a sign token followed by base-10 digit tokens, so
``25`` becomes ``INT+ 2 5`` and ``-7`` becomes ``INT- 7``.  ``pi`` and
``euler`` are single tokens.  On disk an expression is its tokens joined by
single spaces.
"""

from __future__ import annotations

from .nodes import ARITY, Expr, Int, NamedConst, Op, Var, NAMED_CONSTANTS, X

INT_POS = "INT+"
INT_NEG = "INT-"
DIGITS = tuple("0123456789")
SPECIAL_TOKENS = ("PAD", "SOE", "EOE")


class PrefixParseError(ValueError):
    """Raised when a token sequence is not a well-formed prefix expression."""


class TruncatedExpression(PrefixParseError):
    pass


class TrailingTokens(PrefixParseError):
    pass


class UnknownToken(PrefixParseError):
    pass


class MalformedInteger(PrefixParseError):
    pass


def to_prefix(expr: Expr) -> list[str]:
    out: list[str] = []
    stack = [expr]
    while stack:
        node = stack.pop()
        if isinstance(node, Op):
            out.append(node.name)
            stack.extend(reversed(node.args))
        elif isinstance(node, Var):
            out.append("x")
        elif isinstance(node, Int):
            out.append(INT_NEG if node.value < 0 else INT_POS)
            out.extend(str(abs(node.value)))
        elif isinstance(node, NamedConst):
            out.append(node.name)
        else:
            label = getattr(node, "token", None)
            if label is None:
                raise TypeError(f"cannot serialize {node!r}")
            out.append(label)
    return out


def to_text(expr: Expr) -> str:
    return " ".join(to_prefix(expr))


def parse_prefix(tokens) -> Expr:
    """Parse a token list back into an expression tree."""
    tokens = list(tokens)
    pending: list[tuple[str, int, list[Expr]]] = []
    result = None
    pos = 0
    while pos < len(tokens):
        if result is not None:
            raise TrailingTokens(f"{len(tokens) - pos} tokens left after a complete expression")
        tok = tokens[pos]
        pos += 1
        if tok == "x":
            node = X
        elif tok in NAMED_CONSTANTS:
            node = NamedConst(tok)
        elif tok in (INT_POS, INT_NEG):
            start = pos
            while pos < len(tokens) and tokens[pos] in DIGITS:
                pos += 1
            if pos == start:
                raise MalformedInteger(f"sign token at position {start - 1} has no digits")
            value = int("".join(tokens[start:pos]))
            node = Int(-value if tok == INT_NEG else value)
        elif tok in ARITY:
            pending.append((tok, ARITY[tok], []))
            continue
        else:
            raise UnknownToken(f"unknown token {tok!r} at position {pos - 1}")
        while pending:
            name, arity, args = pending[-1]
            args.append(node)
            if len(args) < arity:
                break
            pending.pop()
            node = Op(name, tuple(args))
        else:
            result = node
    if result is None:
        raise TruncatedExpression(f"expression ends after {len(tokens)} tokens")
    return result


def parse_text(text: str) -> Expr:
    return parse_prefix(text.split())


def arity_balanced(tokens) -> bool:
    """Check the prefix arity-balance invariant without building a tree."""
    counter = 1
    i = 0
    tokens = list(tokens)
    while i < len(tokens):
        if counter <= 0:
            return False
        tok = tokens[i]
        if tok in (INT_POS, INT_NEG):
            i += 1
            if i >= len(tokens) or tokens[i] not in DIGITS:
                return False
            while i < len(tokens) and tokens[i] in DIGITS:
                i += 1
            counter -= 1
            continue
        if tok in ARITY:
            counter += ARITY[tok] - 1
        elif tok == "x" or tok in NAMED_CONSTANTS:
            counter -= 1
        else:
            return False
        i += 1
    return counter == 0
