from __future__ import annotations

import numpy as np

from ..expr.checks import MAX_TOKENS, validate
from ..expr.evaluate import evaluate
from ..expr.nodes import Expr, count_operators
from ..expr.prefix import to_text
from .oracle import DEFAULT_ORACLE, OracleConfig, check_equivalence
from .rules import ALL_RULES, RewriteRule, apply_rule
from .simplify import simplify_basic


def undefined_everywhere(expr: Expr, cfg: OracleConfig = DEFAULT_ORACLE) -> bool:
    """The NaN filter: an expression with no defined value at any oracle point."""
    return bool(np.all(np.isnan(evaluate(expr, cfg.points()))))


def generate_equivalents(
    expr: Expr,
    rules=ALL_RULES,
    max_ops: int = 5,
    depth: int = 1,
    cfg: OracleConfig = DEFAULT_ORACLE,
) -> list[Expr]:
    """Distinct equivalents of ``expr`` reachable with up to ``depth`` rule applications.

    Every returned expression differs from ``expr``, has at most ``max_ops``
    operators, fits the token cap and is confirmed Equivalent by the oracle.
    The result is sorted by prefix text, so it is a pure function of the
    arguments.
    """
    if undefined_everywhere(expr, cfg):
        return []
    seen = {expr}
    accepted: dict[str, Expr] = {}
    frontier = [expr]
    for _ in range(depth):
        next_frontier = []
        for current in frontier:
            for rule in rules:
                out = apply_rule(current, rule)
                if out is None:
                    continue
                out = simplify_basic(out)
                if out in seen:
                    continue
                seen.add(out)
                if validate(out, MAX_TOKENS):
                    continue
                if count_operators(out) > max_ops:
                    continue
                if not check_equivalence(expr, out, cfg).equivalent:
                    continue
                accepted[to_text(out)] = out
                next_frontier.append(out)
        frontier = next_frontier
    return [accepted[k] for k in sorted(accepted)]


def rule_outputs(expr: Expr, rules: tuple[RewriteRule, ...] = ALL_RULES) -> list[tuple[RewriteRule, Expr]]:
    """Raw output of every applicable rule, without filtering."""
    out = []
    for rule in rules:
        result = apply_rule(expr, rule)
        if result is not None:
            out.append((rule, result))
    return out
