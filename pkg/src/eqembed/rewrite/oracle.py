"""Falsification-based equivalence checking.

The difference of the two expressions is first simplified under a step
budget; if it does not reduce to zero, both sides are sampled at seeded
points on the positive reals.  Float disagreements are re-evaluated with
mpmath before a pair is declared different, so ill-conditioned but equal
expressions are not rejected.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import mpmath
import numpy as np

from ..expr.evaluate import evaluate
from ..expr.nodes import Expr, Int, NamedConst, Op, Var
from .simplify import simplify_with_budget


class Verdict(enum.Enum):
    EQUIVALENT = "Equivalent"
    NOT_EQUIVALENT = "NotEquivalent"
    INCONCLUSIVE = "Inconclusive"

    def __str__(self) -> str:
        return self.value


@dataclass(frozen=True)
class OracleConfig:
    sample_count: int = 32
    domain: tuple[float, float] = (0.1, 10.0)
    rel_tol: float = 1e-8
    abs_tol: float = 1e-10
    max_simplify_steps: int = 200
    rng_seed: int = 42

    def __post_init__(self):
        if self.sample_count < 8:
            raise ValueError("sample_count must be at least 8")
        lo, hi = self.domain
        if not (0 < lo < hi):
            raise ValueError("domain must be an interval of positive reals")

    def points(self) -> np.ndarray:
        # log-uniform, so the (0, 1) part of the domain is sampled as densely as (1, 10)
        rng = np.random.default_rng(self.rng_seed)
        lo, hi = self.domain
        return np.sort(np.exp(rng.uniform(math.log(lo), math.log(hi), self.sample_count)))


@dataclass(frozen=True)
class EquivalenceVerdict:
    value: Verdict
    agreeing: int = 0
    both_undefined: int = 0
    symbolic: bool = False

    @property
    def equivalent(self) -> bool:
        return self.value is Verdict.EQUIVALENT

    def __str__(self) -> str:
        return str(self.value)


DEFAULT_ORACLE = OracleConfig()


def check_equivalence(a: Expr, b: Expr, cfg: OracleConfig = DEFAULT_ORACLE) -> EquivalenceVerdict:
    diff = Op("add", (a, Op("neg", (b,))))
    reduced, _ = simplify_with_budget(diff, cfg.max_simplify_steps)
    if reduced == Int(0):
        return EquivalenceVerdict(Verdict.EQUIVALENT, symbolic=True)

    xs = cfg.points()
    va, vb = evaluate(a, xs), evaluate(b, xs)
    da, db = ~np.isnan(va), ~np.isnan(vb)
    both = da & db
    close = np.abs(va - vb) <= cfg.abs_tol + cfg.rel_tol * np.maximum(np.abs(va), np.abs(vb))
    agreeing = int(np.sum(both & close))
    both_undefined = int(np.sum(~da & ~db))
    for i in np.flatnonzero(both & ~close):
        outcome = _recheck(a, b, float(xs[i]), cfg)
        if outcome is False:
            return EquivalenceVerdict(Verdict.NOT_EQUIVALENT, agreeing, both_undefined)
        if outcome is True:
            agreeing += 1
    if agreeing >= cfg.sample_count / 2:
        return EquivalenceVerdict(Verdict.EQUIVALENT, agreeing, both_undefined)
    return EquivalenceVerdict(Verdict.INCONCLUSIVE, agreeing, both_undefined)


def equivalent(a: Expr, b: Expr, cfg: OracleConfig = DEFAULT_ORACLE) -> bool:
    return check_equivalence(a, b, cfg).equivalent


# --- high-precision recheck --------------------------------------------------

# trig of arguments near the float maximum needs ~330 digits to reduce correctly
_DPS_LEVELS = (60, 400)
_FLOAT_MAX = mpmath.mpf(np.finfo(np.float64).max)


def _recheck(a: Expr, b: Expr, x: float, cfg: OracleConfig):
    """True if equal at ``x`` in high precision, False if different, None if undefined."""
    outcome = None
    for dps in _DPS_LEVELS:
        with mpmath.workdps(dps):
            xa = mp_eval(a, mpmath.mpf(x))
            xb = mp_eval(b, mpmath.mpf(x))
            if xa is None or xb is None:
                return None
            scale = max(abs(xa), abs(xb))
            outcome = bool(abs(xa - xb) <= cfg.abs_tol + cfg.rel_tol * scale)
        if outcome:
            return True
    return outcome


def mp_eval(expr: Expr, x):
    """Evaluate with mpmath on the reals; ``None`` marks an undefined value."""
    if isinstance(expr, Var):
        return x
    if isinstance(expr, Int):
        return mpmath.mpf(expr.value)
    if isinstance(expr, NamedConst):
        return +mpmath.pi if expr.name == "pi" else +mpmath.e
    vals = []
    for arg in expr.args:
        v = mp_eval(arg, x)
        if v is None:
            return None
        vals.append(v)
    try:
        out = _MP_OPS[expr.name](*vals)
    except (ZeroDivisionError, ValueError, OverflowError):
        return None
    if out is None or not mpmath.isfinite(out) or abs(out) > _FLOAT_MAX:
        return None
    return out


def _mp_div(a, b):
    return None if b == 0 else a / b


def _mp_pow(a, b):
    if a < 0 and b != mpmath.floor(b):
        return None
    if a == 0 and b < 0:
        return None
    return mpmath.power(a, b)


def _guard(pred, fn):
    return lambda v: fn(v) if pred(v) else None


def _recip(fn):
    def inner(v):
        d = fn(v)
        return None if d == 0 else 1 / d
    return inner


_MP_OPS = {
    "add": lambda a, b: a + b,
    "mul": lambda a, b: a * b,
    "div": _mp_div,
    "pow": _mp_pow,
    "neg": lambda a: -a,
    "abs": abs,
    "sqrt": _guard(lambda v: v >= 0, mpmath.sqrt),
    "sin": mpmath.sin,
    "cos": mpmath.cos,
    "tan": lambda v: _mp_div(mpmath.sin(v), mpmath.cos(v)),
    "cot": lambda v: _mp_div(mpmath.cos(v), mpmath.sin(v)),
    "sec": _recip(mpmath.cos),
    "csc": _recip(mpmath.sin),
    "asin": _guard(lambda v: -1 <= v <= 1, mpmath.asin),
    "acos": _guard(lambda v: -1 <= v <= 1, mpmath.acos),
    "atan": mpmath.atan,
    "sinh": mpmath.sinh,
    "cosh": mpmath.cosh,
    "tanh": mpmath.tanh,
    "coth": lambda v: _mp_div(mpmath.cosh(v), mpmath.sinh(v)),
    "asinh": mpmath.asinh,
    "acosh": _guard(lambda v: v >= 1, mpmath.acosh),
    "atanh": _guard(lambda v: -1 < v < 1, mpmath.atanh),
    "ln": _guard(lambda v: v > 0, mpmath.log),
    "exp": mpmath.exp,
}
