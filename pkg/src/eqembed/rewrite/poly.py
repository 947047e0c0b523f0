"""Sums of monomials over opaque atoms, with rational coefficients.

A polynomial is a ``dict`` mapping a monomial to a nonzero ``Fraction``.
A monomial is a sorted tuple of ``(atom, exponent)`` pairs where an atom is
any expression treated as opaque (``x``, ``pi``, ``sin(x)``, a whole sum
that was not distributed, ...).  Exponents are nonzero integers.
"""

from __future__ import annotations

import math
from fractions import Fraction
from functools import lru_cache

from ..expr.evaluate import eval_numeric
from ..expr.nodes import X, Expr, Int, NamedConst, Op, Var, is_constant
from ..expr.prefix import to_text

ARITHMETIC_OPS = frozenset({"add", "mul", "div", "pow", "neg"})


@lru_cache(maxsize=65536)
def atom_key(atom: Expr) -> tuple[int, str]:
    return (0 if isinstance(atom, Var) else 1, to_text(atom))


def monomial(items) -> tuple:
    merged: dict[Expr, int] = {}
    for atom, k in items:
        merged[atom] = merged.get(atom, 0) + k
    return tuple(sorted(((a, k) for a, k in merged.items() if k), key=lambda it: atom_key(it[0])))


def p_const(c) -> dict:
    c = Fraction(c)
    return {(): c} if c else {}


def p_atom(atom: Expr, k: int = 1) -> dict:
    return {((atom, k),): Fraction(1)}


def p_add(p: dict, q: dict) -> dict:
    out = dict(p)
    for m, c in q.items():
        v = out.get(m, 0) + c
        if v:
            out[m] = v
        else:
            out.pop(m, None)
    return out


def p_scale(p: dict, s) -> dict:
    s = Fraction(s)
    if not s:
        return {}
    return {m: c * s for m, c in p.items()}


def p_mul(p: dict, q: dict) -> dict:
    out: dict = {}
    for m1, c1 in p.items():
        for m2, c2 in q.items():
            m = monomial(m1 + m2)
            v = out.get(m, 0) + c1 * c2
            if v:
                out[m] = v
            else:
                out.pop(m, None)
    return out


def p_monomial_pow(p: dict, n: int) -> dict:
    """Integer power of a single-term polynomial."""
    ((m, c),) = p.items()
    return {monomial((a, k * n) for a, k in m): c ** n}


def to_poly(expr: Expr, expand: bool = True, max_power: int = 4) -> dict:
    """Convert an arithmetic expression into a sum of monomials.

    With ``expand=False`` a sum that appears as a factor stays an opaque
    atom, so only the top-level sum is flattened.
    """
    if isinstance(expr, Int):
        return p_const(expr.value)
    if not isinstance(expr, Op) or expr.name not in ARITHMETIC_OPS:
        return p_atom(expr)
    name, args = expr.name, expr.args
    if name == "add":
        return p_add(to_poly(args[0], expand, max_power), to_poly(args[1], expand, max_power))
    if name == "neg":
        return p_scale(to_poly(args[0], expand, max_power), -1)
    if name == "mul":
        pa = _factor_poly(args[0], expand, max_power)
        pb = _factor_poly(args[1], expand, max_power)
        return p_mul(pa, pb)
    if name == "div":
        pa = _factor_poly(args[0], expand, max_power)
        pb = to_poly(args[1], expand, max_power)
        if len(pb) == 1:
            return p_mul(pa, p_monomial_pow(pb, -1))
        if not pb:
            return p_atom(expr)
        return p_mul(pa, p_atom(args[1], -1))
    # pow
    base, exponent = args
    if not isinstance(exponent, Int):
        return p_atom(expr)
    n = exponent.value
    if abs(n) > 64:
        return p_atom(expr)
    pb = to_poly(base, expand, max_power)
    if not pb:
        return p_const(0) if n > 0 else p_atom(expr)
    if len(pb) == 1:
        return p_monomial_pow(pb, n)
    if expand and 0 < n <= max_power:
        out = p_const(1)
        for _ in range(n):
            out = p_mul(out, pb)
        return out
    return p_atom(base, n)


def _factor_poly(expr, expand, max_power):
    p = to_poly(expr, expand, max_power)
    if not expand and len(p) > 1:
        return p_atom(expr)
    return p


def x_degree(m) -> int:
    for a, k in m:
        if isinstance(a, Var):
            return k
    return 0


def _term_order(item):
    m, _ = item
    return (m == (), -x_degree(m), tuple(to_text(a) + "^" + str(k) for a, k in m))


def _power(atom: Expr, k: int) -> Expr:
    return atom if k == 1 else Op("pow", (atom, Int(k)))


def product(factors: list[Expr]) -> Expr:
    if not factors:
        return Int(1)
    out = factors[0]
    for f in factors[1:]:
        out = Op("mul", (out, f))
    return out


def monomial_expr(m, c: Fraction) -> Expr:
    """Build ``c * m`` for a positive coefficient ``c``."""
    num = [_power(a, k) for a, k in m if k > 0]
    den = [_power(a, -k) for a, k in m if k < 0]
    p, q = c.numerator, c.denominator
    top = ([Int(p)] if p != 1 or not num else []) + num
    bottom = ([Int(q)] if q != 1 else []) + den
    numerator = product(top)
    if not bottom:
        return numerator
    return Op("div", (numerator, product(bottom)))


def negate(e: Expr) -> Expr:
    if isinstance(e, Int):
        return Int(-e.value)
    if isinstance(e, Op) and e.name == "div" and isinstance(e.args[0], Int) and isinstance(e.args[1], Int):
        return Op("div", (Int(-e.args[0].value), e.args[1]))
    return Op("neg", (e,))


def from_poly(p: dict) -> Expr:
    """Canonical expression for a polynomial: descending powers of x, constant last."""
    if not p:
        return Int(0)
    acc = None
    for m, c in sorted(p.items(), key=_term_order):
        body = monomial_expr(m, abs(c))
        if acc is None:
            acc = negate(body) if c < 0 else body
        else:
            acc = Op("add", (acc, negate(body) if c < 0 else body))
    return acc


# --- univariate helpers (coefficient lists, lowest degree first) -----------

def univariate(p: dict) -> dict[int, Fraction] | None:
    """Map degree -> coefficient when every atom is ``x``; None otherwise."""
    out: dict[int, Fraction] = {}
    for m, c in p.items():
        if m == ():
            out[0] = out.get(0, 0) + c
        elif len(m) == 1 and isinstance(m[0][0], Var):
            out[m[0][1]] = out.get(m[0][1], 0) + c
        else:
            return None
    return out


def coeffs_to_poly(coeffs: list[Fraction], shift: int = 0) -> dict:
    out: dict = {}
    for i, c in enumerate(coeffs):
        if c:
            d = i + shift
            out[((X, d),) if d else ()] = Fraction(c)
    return out


def trim(a: list) -> list:
    a = list(a)
    while a and a[-1] == 0:
        a.pop()
    return a


def poly_divmod(a: list, b: list) -> tuple[list, list]:
    a, b = trim(a), trim(b)
    if not b:
        raise ZeroDivisionError("polynomial division by zero")
    q = [Fraction(0)] * max(len(a) - len(b) + 1, 1)
    r = [Fraction(v) for v in a]
    while len(trim(r)) >= len(b):
        r = trim(r)
        shift = len(r) - len(b)
        factor = Fraction(r[-1]) / b[-1]
        q[shift] = factor
        for i, bv in enumerate(b):
            r[i + shift] -= factor * bv
    return trim(q), trim(r)


def poly_gcd(a: list, b: list) -> list:
    a, b = trim(a), trim(b)
    while b:
        _, r = poly_divmod(a, b)
        a, b = b, r
    if not a:
        return []
    lead = a[-1]
    return [Fraction(v) / lead for v in a]


def integer_content(coeffs) -> tuple[Fraction, list[int]]:
    """Split rational coefficients into (content, primitive integer list)."""
    nonzero = [Fraction(c) for c in coeffs if c]
    den = 1
    for c in nonzero:
        den = math.lcm(den, c.denominator)
    ints = [int(Fraction(c) * den) for c in coeffs]
    g = 0
    for v in ints:
        g = math.gcd(g, v)
    g = g or 1
    lead = next((v for v in reversed(ints) if v), 1)
    if lead < 0:
        g = -g
    return Fraction(g, den), [v // g for v in ints]


def _divisors(n: int) -> list[int]:
    n = abs(n)
    small = [d for d in range(1, math.isqrt(n) + 1) if n % d == 0]
    return sorted(set(small + [n // d for d in small]))


def rational_roots(ints: list[int], limit: int = 10 ** 6) -> list[Fraction]:
    """Rational roots of an integer polynomial with nonzero constant term."""
    if len(ints) < 2 or abs(ints[0]) > limit or abs(ints[-1]) > limit:
        return []
    roots = []
    for r in _divisors(ints[0]):
        for s in _divisors(ints[-1]):
            for cand in (Fraction(r, s), Fraction(-r, s)):
                if cand in roots:
                    continue
                if sum(c * cand ** i for i, c in enumerate(ints)) == 0:
                    roots.append(cand)
    return sorted(roots)


# --- positivity --------------------------------------------------------------

def is_positive(expr: Expr) -> bool:
    """Conservative check that ``expr > 0`` for every ``x > 0`` where it is defined."""
    if isinstance(expr, (Var, NamedConst)):
        return True
    if isinstance(expr, Int):
        return expr.value > 0
    if is_constant(expr):
        value = eval_numeric(expr, 1.0)
        return value is not None and value > 0
    if not isinstance(expr, Op):
        return False
    name, args = expr.name, expr.args
    if name in ("add", "mul", "div"):
        return all(is_positive(a) for a in args)
    if name == "pow":
        return is_positive(args[0])
    if name in ("sqrt", "abs"):
        return is_positive(args[0])
    if name in ("exp", "cosh"):
        return True
    return False
