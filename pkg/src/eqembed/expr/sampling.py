"""Seeded random expression sampler used for corpora and property tests."""

from __future__ import annotations

import random

from .nodes import ARITY, PI, X, Expr, Int, Op, is_constant

DEFAULT_WEIGHTS = {
    "add": 3.0, "mul": 3.0, "pow": 1.5, "div": 1.0, "neg": 0.5,
    "sqrt": 0.4, "abs": 0.1,
    "sin": 1.0, "cos": 1.0, "tan": 0.6, "cot": 0.3, "sec": 0.3, "csc": 0.3,
    "asin": 0.15, "acos": 0.15, "atan": 0.3,
    "sinh": 0.5, "cosh": 0.5, "tanh": 0.5, "coth": 0.2,
    "asinh": 0.15, "acosh": 0.15, "atanh": 0.1,
    "ln": 1.0, "exp": 1.0,
}


class ExpressionSampler:
    """Draws random univariate expressions with a bounded operator count.

    ``ints`` is the range of integer leaves; ``x_prob`` is the chance that a
    leaf is the variable.  Constant-only draws are rejected.
    """

    def __init__(self, seed=0, weights=None, ints=(1, 9), x_prob=0.6, pi_prob=0.05):
        self.rng = random.Random(seed)
        weights = dict(DEFAULT_WEIGHTS if weights is None else weights)
        self.ops = sorted(weights)
        self.weights = [weights[o] for o in self.ops]
        self.ints = ints
        self.x_prob = x_prob
        self.pi_prob = pi_prob

    def leaf(self) -> Expr:
        r = self.rng.random()
        if r < self.x_prob:
            return X
        if r < self.x_prob + self.pi_prob:
            return PI
        return Int(self.rng.randint(*self.ints))

    def _build(self, n_ops: int) -> Expr:
        if n_ops == 0:
            return self.leaf()
        name = self.rng.choices(self.ops, self.weights)[0]
        if ARITY[name] == 1:
            return Op(name, (self._build(n_ops - 1),))
        if name == "pow" and self.rng.random() < 0.75:
            exponent = Int(self.rng.choice((2, 2, 3, 4, -1)))
            return Op(name, (self._build(n_ops - 1), exponent))
        left = self.rng.randint(0, n_ops - 1)
        return Op(name, (self._build(left), self._build(n_ops - 1 - left)))

    def sample(self, max_ops: int = 5, min_ops: int = 1) -> Expr:
        while True:
            expr = self._build(self.rng.randint(min_ops, max_ops))
            if not is_constant(expr):
                return expr

    def samples(self, n: int, max_ops: int = 5, min_ops: int = 1) -> list[Expr]:
        return [self.sample(max_ops, min_ops) for _ in range(n)]


def random_expressions(n: int, seed=0, max_ops: int = 5, min_ops: int = 1) -> list[Expr]:
    return ExpressionSampler(seed).samples(n, max_ops, min_ops)
