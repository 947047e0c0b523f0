"""Expression trees, prefix serialization and numeric evaluation."""

from .checks import MAX_TOKENS, is_valid, to_infix, validate
from .evaluate import eval_numeric, evaluate
from .nodes import (
    ARITY,
    E,
    PI,
    X,
    Expr,
    Int,
    NamedConst,
    Op,
    Var,
    add,
    const,
    count_operators,
    depth,
    div,
    is_constant,
    map_bottom_up,
    mul,
    neg,
    node_count,
    op,
    operator_names,
    pow_,
    sub,
    walk,
)
from .prefix import (
    MalformedInteger,
    PrefixParseError,
    TrailingTokens,
    TruncatedExpression,
    UnknownToken,
    arity_balanced,
    parse_prefix,
    parse_text,
    to_prefix,
    to_text,
)
from .sampling import ExpressionSampler, random_expressions

__all__ = [
    "ARITY", "E", "PI", "X", "Expr", "Int", "NamedConst", "Op", "Var",
    "add", "const", "count_operators", "depth", "div", "is_constant", "map_bottom_up",
    "mul", "neg", "node_count", "op", "operator_names", "pow_", "sub", "walk",
    "MAX_TOKENS", "is_valid", "to_infix", "validate", "eval_numeric", "evaluate",
    "MalformedInteger", "PrefixParseError", "TrailingTokens", "TruncatedExpression",
    "UnknownToken", "arity_balanced", "parse_prefix", "parse_text", "to_prefix", "to_text",
    "ExpressionSampler", "random_expressions",
]
