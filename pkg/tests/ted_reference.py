"""Independent tree edit distance: memoized forest recursion on rightmost roots.

Shares no code with the library's keyroot implementation.  Trees are
``(label, children)`` tuples; a forest is a tuple of trees.
"""

from functools import lru_cache

from eqembed.expr import Int, NamedConst, Op, Var


def as_tree(expr):
    if isinstance(expr, Op):
        return (expr.name, tuple(as_tree(a) for a in expr.args))
    if isinstance(expr, Var):
        return ("x", ())
    if isinstance(expr, Int):
        return (f"int:{expr.value}", ())
    if isinstance(expr, NamedConst):
        return (expr.name, ())
    return ("CONST", ())


def _size(forest):
    return sum(1 + _size(kids) for _, kids in forest)


@lru_cache(maxsize=None)
def forest_distance(f, g, ins=1.0, dele=1.0, upd=1.0):
    if not f and not g:
        return 0.0
    if not f:
        return ins * _size(g)
    if not g:
        return dele * _size(f)
    (lv, kv), (lw, kw) = f[-1], g[-1]
    return min(
        forest_distance(f[:-1] + kv, g, ins, dele, upd) + dele,
        forest_distance(f, g[:-1] + kw, ins, dele, upd) + ins,
        forest_distance(kv, kw, ins, dele, upd)
        + forest_distance(f[:-1], g[:-1], ins, dele, upd)
        + (0.0 if lv == lw else upd),
    )


def reference_distance(a, b, ins=1.0, dele=1.0, upd=1.0):
    return forest_distance((as_tree(a),), (as_tree(b),), ins, dele, upd)


def small_trees(limit, seed, max_nodes=6):
    """Seeded random operator trees with at most ``max_nodes`` nodes."""
    import random

    rng = random.Random(seed)
    unary = ["sin", "cos", "neg", "ln", "exp"]
    binary = ["add", "mul", "div", "pow"]
    leaves = [lambda: Var(), lambda: Int(rng.randint(1, 3)), lambda: NamedConst("pi")]

    def build(n):
        if n == 1:
            return rng.choice(leaves)()
        if n == 2 or rng.random() < 0.35:
            return Op(rng.choice(unary), (build(n - 1),))
        left = rng.randint(1, n - 2)
        return Op(rng.choice(binary), (build(left), build(n - 1 - left)))

    return [build(rng.randint(1, max_nodes)) for _ in range(limit)]
