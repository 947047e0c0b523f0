"""Equivalence-preserving rewrite rules.

Each rule transforms the whole tree (every applicable site, innermost
first) and reports ``None`` when nothing changed.  Algebraic rules work on
maximal arithmetic regions: connected subtrees built from add, mul, div,
pow and neg, whose leaves are treated as opaque atoms.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

from ..expr.nodes import PI, Expr, Int, Op, Var
from . import poly as P
from .simplify import simplify_basic

HALF_PI = Op("div", (PI, Int(2)))
TRIG_FUNCS = ("sin", "cos", "tan", "cot", "sec", "csc")
# (sin exponent, cos exponent) of each trig function
_SIN_COS = {"sin": (1, 0), "cos": (0, 1), "tan": (1, -1), "cot": (-1, 1), "sec": (0, -1), "csc": (-1, 0)}

RULE_IDS = (
    "expand", "factor", "cancel", "trigsimp", "expand_log", "logcombine",
    "rewrite_trig", "rewrite_hyp", "simplify",
)
TRIG_TARGETS = ("cos", "sin", "sincos")
HYP_TARGETS = ("exp", "tanh", "sinhcosh")


@dataclass(frozen=True)
class RewriteRule:
    id: str
    target: str | None = None

    def __post_init__(self):
        if self.id not in RULE_IDS:
            raise ValueError(f"unknown rule {self.id!r}")
        if self.id == "rewrite_trig" and self.target not in TRIG_TARGETS:
            raise ValueError(f"rewrite_trig target must be one of {TRIG_TARGETS}")
        if self.id == "rewrite_hyp" and self.target not in HYP_TARGETS:
            raise ValueError(f"rewrite_hyp target must be one of {HYP_TARGETS}")

    @property
    def name(self) -> str:
        return self.id if self.target is None else f"{self.id}:{self.target}"

    def __str__(self) -> str:
        return self.name

    def apply(self, expr: Expr) -> Expr | None:
        return apply_rule(expr, self)


def parse_rule(name: str) -> RewriteRule:
    rule_id, _, target = name.strip().partition(":")
    return RewriteRule(rule_id, target or None)


ALL_RULES = (
    RewriteRule("simplify"),
    RewriteRule("expand"),
    RewriteRule("factor"),
    RewriteRule("cancel"),
    RewriteRule("trigsimp"),
    RewriteRule("expand_log"),
    RewriteRule("logcombine"),
    *(RewriteRule("rewrite_trig", t) for t in TRIG_TARGETS),
    *(RewriteRule("rewrite_hyp", t) for t in HYP_TARGETS),
)


def parse_rules(spec: str) -> tuple[RewriteRule, ...]:
    if spec.strip() in ("", "all"):
        return ALL_RULES
    return tuple(parse_rule(part) for part in spec.split(",") if part.strip())


def apply_rule(expr: Expr, rule: RewriteRule) -> Expr | None:
    """Apply ``rule`` everywhere it fits; ``None`` if the tree is unchanged."""
    fn = _DISPATCH[rule.id]
    out = fn(expr, rule.target) if rule.id in ("rewrite_trig", "rewrite_hyp") else fn(expr)
    if out is None or out == expr:
        return None
    return out


# --- traversal helpers -------------------------------------------------------

def _is(e, name) -> bool:
    return isinstance(e, Op) and e.name == name


def map_regions(expr: Expr, fn) -> Expr:
    """Apply ``fn`` to the root of each maximal arithmetic region, innermost first."""

    def visit(node, inside):
        if not isinstance(node, Op):
            return node
        arith = node.name in P.ARITHMETIC_OPS
        if node.name == "pow":
            flags = (True, False)
        else:
            flags = (arith,) * len(node.args)
        args = tuple(visit(a, f) for a, f in zip(node.args, flags))
        new = node if args == node.args else Op(node.name, args)
        if arith and not inside:
            out = fn(new)
            if out is not None:
                return out
        return new

    return visit(expr, False)


def map_nodes(expr: Expr, fn) -> Expr:
    """Bottom-up rewrite of individual nodes; ``fn`` returns None to keep a node."""
    if not isinstance(expr, Op):
        out = fn(expr)
        return expr if out is None else out
    args = tuple(map_nodes(a, fn) for a in expr.args)
    node = expr if args == expr.args else Op(expr.name, args)
    out = fn(node)
    return node if out is None else out


def _region_contains(expr: Expr, pred) -> bool:
    if not isinstance(expr, Op) or expr.name not in P.ARITHMETIC_OPS:
        return False
    if pred(expr):
        return True
    kids = expr.args[:1] if expr.name == "pow" else expr.args
    return any(_region_contains(a, pred) for a in kids)


# --- simplify / expand -------------------------------------------------------

def _simplify(expr):
    return simplify_basic(expr)


def _distributable(node: Op) -> bool:
    name, args = node.name, node.args
    if name == "mul":
        return any(len(P.to_poly(a, expand=False)) > 1 for a in args)
    if name == "neg":
        return _is(args[0], "add")
    if name == "pow":
        return (
            isinstance(args[1], Int) and 2 <= args[1].value <= 4
            and len(P.to_poly(args[0], expand=False)) > 1
        )
    if name == "div":
        return len(P.to_poly(args[0], expand=False)) > 1
    return False


def _expand(expr):
    def region(node):
        if not _region_contains(node, _distributable):
            return None
        return P.from_poly(P.to_poly(node, expand=True))

    return map_regions(expr, region)


# --- factor ------------------------------------------------------------------

def _linear_factor(root: Fraction) -> Expr:
    s, r = root.denominator, root.numerator
    lead = Var() if s == 1 else Op("mul", (Int(s), Var()))
    return Op("add", (lead, Int(-r)))


def _factor_univariate(u: dict[int, Fraction]) -> Expr | None:
    low = min(u)
    if low < 0:
        return None
    top = max(u)
    coeffs = [u.get(i, Fraction(0)) for i in range(low, top + 1)]
    content, ints = P.integer_content(coeffs)
    factors: list[Expr] = []
    count = 0
    roots: list[tuple[Fraction, int]] = []
    rest = ints
    if len(rest) > 2:
        for root in P.rational_roots(rest):
            mult = 0
            while len(rest) > 1:
                s, r = root.denominator, root.numerator
                q, rem = P.poly_divmod(rest, [-r, s])
                if rem:
                    break
                rest = [int(c) for c in q]
                mult += 1
            if mult:
                roots.append((root, mult))
    if low:
        factors.append(Var() if low == 1 else Op("pow", (Var(), Int(low))))
        count += 1
    for root, mult in sorted(roots, key=lambda rm: (rm[0].denominator, -rm[0].numerator)):
        f = _linear_factor(root)
        factors.append(f if mult == 1 else Op("pow", (f, Int(mult))))
        count += mult
    if len(rest) > 1:
        factors.append(P.from_poly(P.coeffs_to_poly([Fraction(c) for c in rest])))
        count += 1
    elif rest and rest[0] != 1:
        content *= rest[0]
    if abs(content) != 1:
        factors.insert(0, P.from_poly(P.p_const(abs(content))))
        count += 1
    if count < 2:
        return None
    out = P.product(factors)
    return P.negate(out) if content < 0 else out


def _common_factor(node: Expr) -> Expr | None:
    terms = P.to_poly(node, expand=False)
    if len(terms) < 2:
        return None
    items = list(terms.items())
    common: dict[Expr, int] | None = None
    for m, _ in items:
        exps = {a: k for a, k in m if k > 0}
        if common is None:
            common = exps
        else:
            common = {a: min(k, exps[a]) for a, k in common.items() if a in exps}
    content, _ = P.integer_content([c for _, c in items])
    content = abs(content)
    if not common and content == 1:
        return None
    shared = {P.monomial(common.items()): content}
    rest: dict = {}
    inverse = P.p_mul(P.p_monomial_pow(shared, -1), {(): Fraction(1)})
    for m, c in items:
        rest = P.p_add(rest, P.p_mul({m: c}, inverse))
    return Op("mul", (P.from_poly(shared), P.from_poly(rest)))


def _factor(expr):
    def region(node):
        p = P.to_poly(node, expand=True)
        u = P.univariate(p)
        if u is not None and len(u) >= 1 and max(u) >= 1:
            out = _factor_univariate(u)
            if out is not None:
                return out
        return _common_factor(node)

    return map_regions(expr, region)


# --- cancel ------------------------------------------------------------------

def _rational(expr: Expr):
    """``(numerator, denominator)`` coefficient lists, or None if not rational in x."""
    if isinstance(expr, Int):
        return [Fraction(expr.value)], [Fraction(1)]
    if isinstance(expr, Var):
        return [Fraction(0), Fraction(1)], [Fraction(1)]
    if not isinstance(expr, Op) or expr.name not in P.ARITHMETIC_OPS:
        return None
    parts = [_rational(a) for a in (expr.args if expr.name != "pow" else expr.args[:1])]
    if any(p is None for p in parts):
        return None
    name = expr.name
    if name == "neg":
        (n, d), = parts
        return [-c for c in n], d
    if name == "add":
        (n1, d1), (n2, d2) = parts
        return _padd(_pmul(n1, d2), _pmul(n2, d1)), _pmul(d1, d2)
    if name == "mul":
        (n1, d1), (n2, d2) = parts
        return _pmul(n1, n2), _pmul(d1, d2)
    if name == "div":
        (n1, d1), (n2, d2) = parts
        if not P.trim(n2):
            return None
        return _pmul(n1, d2), _pmul(d1, n2)
    exponent = expr.args[1]
    if not isinstance(exponent, Int) or abs(exponent.value) > 8:
        return None
    (n, d), = parts
    k = exponent.value
    if k < 0:
        if not P.trim(n):
            return None
        n, d, k = d, n, -k
    rn, rd = [Fraction(1)], [Fraction(1)]
    for _ in range(k):
        rn, rd = _pmul(rn, n), _pmul(rd, d)
    return rn, rd


def _pmul(a, b):
    out = [Fraction(0)] * (len(a) + len(b) - 1) if a and b else []
    for i, x in enumerate(a):
        if x:
            for j, y in enumerate(b):
                out[i + j] += x * y
    return P.trim(out)


def _padd(a, b):
    n = max(len(a), len(b))
    return P.trim([(a[i] if i < len(a) else 0) + (b[i] if i < len(b) else 0) for i in range(n)])


def _has_division(node: Expr) -> bool:
    return _is(node, "div") or (
        _is(node, "pow") and isinstance(node.args[1], Int) and node.args[1].value < 0
    )


def _cancel(expr):
    def region(node):
        if not _region_contains(node, _has_division):
            return None
        form = _rational(node)
        if form is None:
            return None
        num, den = form
        if not P.trim(den):
            return None
        g = P.poly_gcd(num, den) if P.trim(num) else list(P.trim(den))
        if g:
            num, _ = P.poly_divmod(num, g)
            den, _ = P.poly_divmod(den, g)
        lead = den[-1]
        num = [c / lead for c in num]
        den = [c / lead for c in den]
        top = P.from_poly(P.coeffs_to_poly(num))
        if len(den) == 1:
            return top
        return Op("div", (top, P.from_poly(P.coeffs_to_poly(den))))

    return map_regions(expr, region)


# --- trigsimp ----------------------------------------------------------------

def _trig_atom(a: Expr) -> bool:
    return isinstance(a, Op) and a.name in _SIN_COS


def _simplify_trig_monomial(m) -> tuple | None:
    groups: dict[Expr, list[tuple[str, int]]] = {}
    others = []
    for a, k in m:
        if _trig_atom(a):
            groups.setdefault(a.args[0], []).append((a.name, k))
        else:
            others.append((a, k))
    changed = False
    out = list(others)
    for arg, funcs in groups.items():
        if len(funcs) < 2:
            out.extend((Op(f, (arg,)), k) for f, k in funcs)
            continue
        s = sum(_SIN_COS[f][0] * k for f, k in funcs)
        c = sum(_SIN_COS[f][1] * k for f, k in funcs)
        if s and s == -c:
            new = [(Op("tan", (arg,)), s)] if s > 0 else [(Op("cot", (arg,)), -s)]
        else:
            new = [(Op(f, (arg,)), k) for f, k in (("sin", s), ("cos", c)) if k]
        if len(new) < len(funcs):
            out.extend(new)
            changed = True
        else:
            out.extend((Op(f, (arg,)), k) for f, k in funcs)
    return P.monomial(out) if changed else None


def _pythagorean_terms(terms: dict) -> dict | None:
    """Merge ``c*R*sin(u)^2 + c*R*cos(u)^2`` into ``c*R`` and ``c - c*sin(u)^2`` into ``c*cos(u)^2``."""
    items = list(terms.items())
    for i, (m1, c1) in enumerate(items):
        for m2, c2 in items[i + 1:]:
            merged = _pyth_pair(m1, c1, m2, c2) or _pyth_pair(m2, c2, m1, c1)
            if merged is not None:
                out = {m: c for m, c in terms.items() if m not in (m1, m2)}
                return P.p_add(out, merged)
    return None


def _pyth_pair(m1, c1, m2, c2):
    d1, d2 = dict(m1), dict(m2)
    for a, k in m1:
        if k == 2 and _is(a, "sin"):
            partner = Op("cos", a.args)
            rest1 = {b: j for b, j in d1.items() if b != a}
            if c1 == c2 and d2.get(partner) == 2:
                rest2 = {b: j for b, j in d2.items() if b != partner}
                if rest1 == rest2:
                    return {P.monomial(rest1.items()): c1}
            if m2 == () and c2 == -c1 and not rest1:
                return {P.monomial([(partner, 2)]): c2}
        if k == 2 and _is(a, "cos") and m2 == () and c2 == -c1 and len(m1) == 1:
            return {P.monomial([(Op("sin", a.args), 2)]): c2}
    return None


def _trigsimp(expr):
    def region(node):
        terms = P.to_poly(node, expand=False)
        changed = False
        out: dict = {}
        for m, c in terms.items():
            new = _simplify_trig_monomial(m)
            if new is not None:
                changed = True
                m = new
            out = P.p_add(out, {m: c})
        merged = _pythagorean_terms(out)
        if merged is not None:
            out, changed = merged, True
        if not changed:
            return None
        return P.from_poly(out)

    return map_regions(expr, region)


# --- logarithms --------------------------------------------------------------

def _ln(e):
    return Op("ln", (e,))


def _expand_ln_arg(arg: Expr) -> Expr | None:
    if _is(arg, "exp"):
        return arg.args[0]
    if _is(arg, "pow") and P.is_positive(arg.args[0]):
        base, r = arg.args
        return Op("mul", (r, _expand_ln_arg(base) or _ln(base)))
    if _is(arg, "sqrt") and P.is_positive(arg.args[0]):
        base = arg.args[0]
        return Op("div", (_expand_ln_arg(base) or _ln(base), Int(2)))
    if _is(arg, "mul") and all(P.is_positive(a) for a in arg.args):
        a, b = arg.args
        return Op("add", (_expand_ln_arg(a) or _ln(a), _expand_ln_arg(b) or _ln(b)))
    if _is(arg, "div") and all(P.is_positive(a) for a in arg.args):
        a, b = arg.args
        return Op("add", (_expand_ln_arg(a) or _ln(a), Op("neg", (_expand_ln_arg(b) or _ln(b),))))
    return None


def _expand_log(expr):
    return map_nodes(expr, lambda n: _expand_ln_arg(n.args[0]) if _is(n, "ln") else None)


def _logcombine(expr):
    def region(node):
        terms = P.to_poly(node, expand=False)
        logs, rest = [], {}
        for m, c in terms.items():
            if (
                len(m) == 1 and m[0][1] == 1 and _is(m[0][0], "ln")
                and c.denominator == 1 and P.is_positive(m[0][0].args[0])
            ):
                logs.append((m[0][0].args[0], int(c)))
            else:
                rest[m] = c
        if not logs or (len(logs) == 1 and logs[0][1] == 1):
            return None
        arg = P.p_const(1)
        for a, k in logs:
            pa = P.to_poly(a, expand=False)
            if len(pa) != 1:
                pa = P.p_atom(a)
            arg = P.p_mul(arg, P.p_monomial_pow(pa, k))
        combined = P.p_atom(_ln(P.from_poly(arg)))
        return P.from_poly(P.p_add(rest, combined))

    return map_regions(expr, region)


# --- rewrite in terms of other functions -------------------------------------

def _rewrite_trig(expr, target):
    def node(n):
        if not isinstance(n, Op):
            return None
        u = n.args[0] if n.args else None
        if target == "cos":
            shifted = Op("cos", (Op("add", (u, Op("neg", (HALF_PI,)))),)) if u is not None else None
            table = {
                "sin": lambda: shifted,
                "csc": lambda: Op("div", (Int(1), shifted)),
                "sec": lambda: Op("div", (Int(1), Op("cos", (u,)))),
                "tan": lambda: Op("div", (shifted, Op("cos", (u,)))),
                "cot": lambda: Op("div", (Op("cos", (u,)), shifted)),
            }
        elif target == "sin":
            shifted = Op("sin", (Op("add", (u, HALF_PI)),)) if u is not None else None
            table = {
                "cos": lambda: shifted,
                "sec": lambda: Op("div", (Int(1), shifted)),
                "csc": lambda: Op("div", (Int(1), Op("sin", (u,)))),
                "tan": lambda: Op("div", (Op("sin", (u,)), shifted)),
                "cot": lambda: Op("div", (shifted, Op("sin", (u,)))),
            }
        else:
            table = {
                "tan": lambda: Op("div", (Op("sin", (u,)), Op("cos", (u,)))),
                "cot": lambda: Op("div", (Op("cos", (u,)), Op("sin", (u,)))),
                "sec": lambda: Op("div", (Int(1), Op("cos", (u,)))),
                "csc": lambda: Op("div", (Int(1), Op("sin", (u,)))),
            }
        build = table.get(n.name)
        return build() if build else None

    return map_nodes(expr, node)


def _exp_pair(u):
    return Op("exp", (u,)), Op("exp", (Op("neg", (u,)),))


def _half_tanh_sq(u):
    t = Op("tanh", (Op("div", (u, Int(2))),))
    return t, Op("pow", (t, Int(2)))


def _rewrite_hyp(expr, target):
    def node(n):
        if not isinstance(n, Op) or len(n.args) != 1:
            return None
        u = n.args[0]
        name = n.name
        if target == "exp":
            if name not in ("sinh", "cosh", "tanh", "coth"):
                return None
            ep, em = _exp_pair(u)
            diff = Op("add", (ep, Op("neg", (em,))))
            total = Op("add", (ep, em))
            return {
                "sinh": lambda: Op("div", (diff, Int(2))),
                "cosh": lambda: Op("div", (total, Int(2))),
                "tanh": lambda: Op("div", (diff, total)),
                "coth": lambda: Op("div", (total, diff)),
            }[name]()
        if target == "tanh":
            if name == "coth":
                return Op("div", (Int(1), Op("tanh", (u,))))
            if name not in ("sinh", "cosh"):
                return None
            t, t2 = _half_tanh_sq(u)
            inv = Op("pow", (Op("add", (Int(1), Op("neg", (t2,)))), Int(-1)))
            if name == "sinh":
                return Op("mul", (Op("mul", (Int(2), t)), inv))
            return Op("mul", (Op("add", (Int(1), t2)), inv))
        # sinhcosh
        if name == "tanh":
            return Op("div", (Op("sinh", (u,)), Op("cosh", (u,))))
        if name == "coth":
            return Op("div", (Op("cosh", (u,)), Op("sinh", (u,))))
        if name == "exp":
            return Op("add", (Op("cosh", (u,)), Op("sinh", (u,))))
        return None

    return map_nodes(expr, node)


_DISPATCH = {
    "simplify": _simplify,
    "expand": _expand,
    "factor": _factor,
    "cancel": _cancel,
    "trigsimp": _trigsimp,
    "expand_log": _expand_log,
    "logcombine": _logcombine,
    "rewrite_trig": _rewrite_trig,
    "rewrite_hyp": _rewrite_hyp,
}
