from __future__ import annotations

from collections import Counter, defaultdict
from dataclasses import dataclass, field

import numpy as np

from ..expr.prefix import parse_text, to_text
from ..treedist import DistanceReport, distance_scenarios
from .index import EmbeddingIndex, ZeroVector


class UnlabeledQuery(ValueError):
    pass


class EmptyEvaluation(ValueError):
    pass


def class_members(index: EmbeddingIndex, query_id: str) -> set[str]:
    """Other entries sharing the query's class; the query itself is not a member."""
    label = index.entry(query_id).label
    if label is None:
        raise UnlabeledQuery(f"entry {query_id} has no class label")
    return {e.id for e in index.entries if e.label == label and e.id != query_id}


def score_k(index: EmbeddingIndex, query_id: str, k: int) -> float | None:
    """Share of the query's k nearest neighbours in its class, over ``min(k, |class|)``.

    Returns None when the class has no other member.
    """
    members = class_members(index, query_id)
    if not members:
        return None
    neighbours = index.knn(index.vector(query_id), k, exclude=(query_id,))
    hits = sum(1 for nid, _ in neighbours if nid in members)
    return hits / min(k, len(members))


@dataclass(frozen=True)
class ScoreSummary:
    mean: float
    scored: int
    skipped: int
    per_class: dict[str, float] = field(default_factory=dict)


def mean_score_k(index: EmbeddingIndex, k: int, query_ids=None) -> ScoreSummary:
    """Mean score_k over queries with at least one other class member."""
    if query_ids is None:
        query_ids = [e.id for e in index.entries if e.label is not None]
    values: list[float] = []
    by_class: dict[str, list[float]] = defaultdict(list)
    skipped = 0
    for qid in query_ids:
        s = score_k(index, qid, k)
        if s is None:
            skipped += 1
            continue
        values.append(s)
        by_class[index.entry(qid).label].append(s)
    if not values:
        raise EmptyEvaluation("no query has another member of its class in the index")
    per_class = {label: float(np.mean(v)) for label, v in sorted(by_class.items())}
    return ScoreSummary(float(np.mean(values)), len(values), skipped, per_class)


# --- embedding algebra -------------------------------------------------------

@dataclass(frozen=True)
class AnalogyQuery:
    """``x1 - y1 + y2`` should land near ``x2``; ``expected`` is x2 in prefix form."""

    x1: str
    y1: str
    y2: str
    expected: str | None = None


@dataclass(frozen=True)
class AnalogyResult:
    query: AnalogyQuery
    predicted: str
    predicted_expr: str
    similarity: float
    correct: bool | None


def _canonical(text: str) -> str:
    return to_text(parse_text(text))


def embedding_algebra(index: EmbeddingIndex, q: AnalogyQuery) -> AnalogyResult:
    """Nearest entry to ``v(x1) - v(y1) + v(y2)``, excluding the three query ids."""
    for entry_id in (q.x1, q.y1, q.y2):
        if entry_id not in index:
            raise KeyError(f"analogy id {entry_id!r} is not in the index")
    z = index.vector(q.x1) - index.vector(q.y1) + index.vector(q.y2)
    if not np.any(np.abs(z) > 1e-12 * max(1.0, float(np.abs(index.matrix).max()))):
        raise ZeroVector("analogy vector is numerically zero")
    hits = index.knn(z, 1, exclude=(q.x1, q.y1, q.y2))
    if not hits:
        raise EmptyEvaluation("no entry left after excluding the query ids")
    pid, sim = hits[0]
    pexpr = index.entry(pid).expr
    correct = None if q.expected is None else _canonical(pexpr) == _canonical(q.expected)
    return AnalogyResult(q, pid, pexpr, sim, correct)


# --- distance analysis -------------------------------------------------------

@dataclass(frozen=True)
class Neighbour:
    embedder: str
    rank: int
    id: str
    expr: str
    similarity: float


@dataclass(frozen=True)
class QueryDistances:
    query_id: str
    query_expr: str
    neighbours: tuple[Neighbour, ...]
    top1: DistanceReport


@dataclass
class DistanceTally:
    raw: Counter = field(default_factory=Counter)
    normalized: Counter = field(default_factory=Counter)

    def add(self, report: DistanceReport) -> None:
        self.raw[report.winner(False) or "tie"] += 1
        self.normalized[report.winner(True) or "tie"] += 1


@dataclass(frozen=True)
class DistanceAnalysis:
    queries: tuple[QueryDistances, ...]
    tally: DistanceTally


def distance_report(embedders: dict[str, EmbeddingIndex], query_ids: list[str], top_n: int = 5,
                    recursive: bool = True) -> DistanceAnalysis:
    """Nearest pool expressions per embedder and who returns the closer top hit.

    For every query, each embedder lists its ``top_n`` neighbours (the
    query entry itself excluded).  The top hits of all embedders are
    compared by tree edit distance to the query, raw and with constants
    normalized away; strict wins are tallied per embedder, ties separately.
    """
    if not embedders:
        raise ValueError("at least one embedder is required")
    out = []
    tally = DistanceTally()
    for qid in query_ids:
        query_expr = None
        neighbours: list[Neighbour] = []
        tops: list[tuple[str, object]] = []
        for name, index in embedders.items():
            entry = index.entry(qid)
            query_expr = entry.expr if query_expr is None else query_expr
            hits = index.knn(entry.vector, top_n, exclude=(qid,))
            for rank, (nid, sim) in enumerate(hits, 1):
                neighbours.append(Neighbour(name, rank, nid, index.entry(nid).expr, sim))
            if hits:
                tops.append((name, parse_text(index.entry(hits[0][0]).expr)))
        if not tops:
            continue
        report = distance_scenarios(parse_text(query_expr), tops, recursive=recursive)
        tally.add(report)
        out.append(QueryDistances(qid, query_expr, tuple(neighbours), report))
    return DistanceAnalysis(tuple(out), tally)
