"""Ordered tree edit distance between operator trees.

Zhang and Shasha's keyroot dynamic program, plus a normalization that
removes constant multipliers and addends so that ``a*f + b`` and ``f``
compare at distance zero.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from typing import ClassVar

from .expr.nodes import Expr, Int, NamedConst, Op, Var, is_constant
from .expr.prefix import to_text


@dataclass(frozen=True)
class EditCosts:
    insert: float = 1.0
    delete: float = 1.0
    update: float = 1.0

    def __post_init__(self):
        if min(self.insert, self.delete, self.update) < 0:
            raise ValueError("edit costs must be nonnegative")


UNIT_COSTS = EditCosts()


@dataclass(frozen=True, slots=True)
class ConstLeaf(Expr):
    """The single leaf every constant subtree collapses to under normalization."""

    token: ClassVar[str] = "CONST"

    def __repr__(self) -> str:
        return "CONST"


CONST = ConstLeaf()


def node_label(node: Expr) -> str:
    if isinstance(node, Op):
        return node.name
    if isinstance(node, Var):
        return "x"
    if isinstance(node, Int):
        return f"int:{node.value}"
    if isinstance(node, NamedConst):
        return node.name
    if isinstance(node, ConstLeaf):
        return ConstLeaf.token
    raise TypeError(f"no label for {node!r}")


def _postorder(expr: Expr):
    """Labels in postorder and the leftmost-leaf index of every node."""
    labels: list[str] = []
    leftmost: list[int] = []
    # frames: [node, next child, leftmost leaf of the first child once finished]
    stack = [[expr, 0, -1]]
    while stack:
        frame = stack[-1]
        node, i, _ = frame
        kids = node.children
        if i < len(kids):
            frame[1] += 1
            stack.append([kids[i], 0, -1])
            continue
        stack.pop()
        index = len(labels)
        labels.append(node_label(node))
        lm = index if not kids else frame[2]
        leftmost.append(lm)
        if stack and stack[-1][1] == 1:
            stack[-1][2] = lm
    return labels, leftmost


def _keyroots(leftmost: list[int]) -> list[int]:
    seen: dict[int, int] = {}
    for i, lm in enumerate(leftmost):
        seen[lm] = i
    return sorted(seen.values())


def tree_edit_distance(a: Expr, b: Expr, costs: EditCosts = UNIT_COSTS) -> float:
    """Minimum cost to turn ``a`` into ``b`` by node insertion, deletion and relabeling."""
    la, lma = _postorder(a)
    lb, lmb = _postorder(b)
    n, m = len(la), len(lb)
    treedist = [[0.0] * m for _ in range(n)]
    ins, dele, upd = costs.insert, costs.delete, costs.update

    for i in _keyroots(lma):
        for j in _keyroots(lmb):
            li, lj = lma[i], lmb[j]
            rows, cols = i - li + 2, j - lj + 2
            fd = [[0.0] * cols for _ in range(rows)]
            for x in range(1, rows):
                fd[x][0] = fd[x - 1][0] + dele
            for y in range(1, cols):
                fd[0][y] = fd[0][y - 1] + ins
            for x in range(1, rows):
                ai = li + x - 1
                for y in range(1, cols):
                    bj = lj + y - 1
                    if lma[ai] == li and lmb[bj] == lj:
                        change = 0.0 if la[ai] == lb[bj] else upd
                        fd[x][y] = min(
                            fd[x - 1][y] + dele,
                            fd[x][y - 1] + ins,
                            fd[x - 1][y - 1] + change,
                        )
                        treedist[ai][bj] = fd[x][y]
                    else:
                        px = lma[ai] - li
                        py = lmb[bj] - lj
                        fd[x][y] = min(
                            fd[x - 1][y] + dele,
                            fd[x][y - 1] + ins,
                            fd[px][py] + treedist[ai][bj],
                        )
    return treedist[n - 1][m - 1]


# --- constant-invariant normalization ----------------------------------------

def normalize_constants(expr: Expr, recursive: bool = True) -> Expr:
    """Drop constant multipliers, addends and divisors.

    Constant operands of ``add`` and ``mul`` are removed and a constant
    denominator is dropped; ``neg`` counts as a ``-1`` multiplier.  Any
    remaining constant subtree becomes the ``CONST`` leaf.  With
    ``recursive=False`` only the top-level chain of such wrappers is
    stripped and inner subtrees are left as they are.
    """
    if is_constant(expr):
        return CONST
    if not isinstance(expr, Op):
        return expr
    name, args = expr.name, expr.args
    if name in ("add", "mul"):
        left, right = args
        if is_constant(left):
            return normalize_constants(right, recursive)
        if is_constant(right):
            return normalize_constants(left, recursive)
    elif name == "neg":
        return normalize_constants(args[0], recursive)
    elif name == "div" and is_constant(args[1]):
        return normalize_constants(args[0], recursive)
    if not recursive:
        return expr
    return Op(name, tuple(normalize_constants(a, True) for a in args))


# --- scenario report ---------------------------------------------------------

@dataclass(frozen=True)
class CandidateDistance:
    label: str
    expr: Expr
    raw: float
    normalized: float
    closest_raw: bool = False
    closest_normalized: bool = False


@dataclass(frozen=True)
class DistanceReport:
    query: Expr
    candidates: tuple[CandidateDistance, ...]
    raw_tie: bool = False
    normalized_tie: bool = False

    def winner(self, normalized: bool = False) -> str | None:
        """Label of the strictly closest candidate, or None on a tie."""
        for c in self.candidates:
            if (c.closest_normalized if normalized else c.closest_raw):
                return c.label
        return None

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["query", "candidate_label", "raw_distance", "normalized_distance"])
        query = to_text(self.query)
        for c in self.candidates:
            writer.writerow([query, c.label, _fmt(c.raw), _fmt(c.normalized)])
        return buf.getvalue()


def _fmt(value: float) -> str:
    return str(int(value)) if float(value).is_integer() else repr(float(value))


def _strict_min(values: list[float]) -> tuple[int | None, bool]:
    best = min(values)
    hits = [i for i, v in enumerate(values) if v == best]
    if len(hits) == 1:
        return hits[0], False
    return None, True


def distance_scenarios(
    query: Expr,
    candidates: list[tuple[str, Expr]],
    costs: EditCosts = UNIT_COSTS,
    recursive: bool = True,
) -> DistanceReport:
    """Raw and constant-normalized distances from ``query`` to each candidate."""
    if not candidates:
        raise ValueError("at least one candidate is required")
    nq = normalize_constants(query, recursive)
    raw = [tree_edit_distance(query, e, costs) for _, e in candidates]
    norm = [tree_edit_distance(nq, normalize_constants(e, recursive), costs) for _, e in candidates]
    win_raw, tie_raw = _strict_min(raw)
    win_norm, tie_norm = _strict_min(norm)
    rows = tuple(
        CandidateDistance(label, e, raw[i], norm[i], i == win_raw, i == win_norm)
        for i, (label, e) in enumerate(candidates)
    )
    return DistanceReport(query, rows, tie_raw, tie_norm)
