"""Rewrite rules, simplification and the equivalence oracle."""

from .generate import generate_equivalents, rule_outputs, undefined_everywhere
from .oracle import (
    DEFAULT_ORACLE,
    EquivalenceVerdict,
    OracleConfig,
    Verdict,
    check_equivalence,
    equivalent,
    mp_eval,
)
from .rules import (
    ALL_RULES,
    RewriteRule,
    apply_rule,
    parse_rule,
    parse_rules,
)
from .simplify import simplify_basic, simplify_with_budget

__all__ = [
    "generate_equivalents", "rule_outputs", "undefined_everywhere",
    "DEFAULT_ORACLE", "EquivalenceVerdict", "OracleConfig", "Verdict",
    "check_equivalence", "equivalent", "mp_eval",
    "ALL_RULES", "RewriteRule", "apply_rule", "parse_rule", "parse_rules",
    "simplify_basic", "simplify_with_budget",
]
