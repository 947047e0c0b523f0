"""Embedding index, cosine nearest neighbours and the index file format.

Index file: a ``dim=<d>`` header line, then one entry per line,
``id<TAB>class<TAB>expression<TAB>v1,v2,...``.  An empty class field means
the entry is unlabeled.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np


class ZeroVector(ValueError):
    pass


class DimensionMismatch(ValueError):
    pass


class IndexFormatError(ValueError):
    pass


@dataclass(frozen=True)
class Entry:
    id: str
    expr: str
    label: str | None
    vector: np.ndarray


class EmbeddingIndex:
    """Immutable set of labeled vectors with a fixed dimension."""

    def __init__(self, entries: list[Entry]):
        if not entries:
            raise ValueError("an index needs at least one entry")
        dim = len(entries[0].vector)
        ids = [e.id for e in entries]
        if len(set(ids)) != len(ids):
            raise ValueError("entry ids must be unique")
        for e in entries:
            if len(e.vector) != dim:
                raise DimensionMismatch(f"entry {e.id} has length {len(e.vector)}, expected {dim}")
        self.entries = tuple(entries)
        self.dim = dim
        self.matrix = np.asarray([e.vector for e in entries], dtype=np.float64)
        norms = np.linalg.norm(self.matrix, axis=1)
        if np.any(norms == 0):
            bad = [entries[i].id for i in np.flatnonzero(norms == 0)]
            raise ZeroVector(f"zero vector for entries {bad[:5]}")
        self.unit = self.matrix / norms[:, None]
        self._row = {e.id: i for i, e in enumerate(entries)}
        # rank of each row in ascending id order, the tie-breaker for equal similarity
        self._id_rank = np.empty(len(entries), dtype=np.int64)
        self._id_rank[np.argsort(np.asarray(ids, dtype=object), kind="stable")] = np.arange(len(entries))

    def __len__(self) -> int:
        return len(self.entries)

    def __contains__(self, entry_id: str) -> bool:
        return entry_id in self._row

    def entry(self, entry_id: str) -> Entry:
        return self.entries[self._row[entry_id]]

    def vector(self, entry_id: str) -> np.ndarray:
        return self.matrix[self._row[entry_id]]

    def ids_for_expr(self, expr: str) -> list[str]:
        return [e.id for e in self.entries if e.expr == expr]

    def similarities(self, query) -> np.ndarray:
        q = np.asarray(query, dtype=np.float64).reshape(-1)
        if q.shape[0] != self.dim:
            raise DimensionMismatch(f"query has length {q.shape[0]}, index has {self.dim}")
        norm = np.linalg.norm(q)
        if norm == 0 or not np.isfinite(norm):
            raise ZeroVector("query vector is zero or not finite")
        return np.clip(self.unit @ (q / norm), -1.0, 1.0)

    def knn(self, query, k: int, exclude=()) -> list[tuple[str, float]]:
        """Top-``k`` entries by cosine similarity; equal similarity goes to the smaller id."""
        if k < 1:
            raise ValueError("k must be at least 1")
        sims = self.similarities(query)
        keep = np.ones(len(self.entries), dtype=bool)
        for entry_id in exclude:
            row = self._row.get(entry_id)
            if row is not None:
                keep[row] = False
        rows = np.flatnonzero(keep)
        order = rows[np.lexsort((self._id_rank[rows], -sims[rows]))][:k]
        return [(self.entries[i].id, float(sims[i])) for i in order]


def knn(index: EmbeddingIndex, query, k: int, exclude=()) -> list[tuple[str, float]]:
    return index.knn(query, k, exclude)


def write_index(index: EmbeddingIndex, path) -> None:
    lines = [f"dim={index.dim}"]
    for e in index.entries:
        values = ",".join(repr(float(v)) for v in e.vector)
        lines.append(f"{e.id}\t{e.label or ''}\t{e.expr}\t{values}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_index(path) -> EmbeddingIndex:
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().strip()
        if not header.startswith("dim="):
            raise IndexFormatError(f"{path}:1: expected 'dim=<d>' header")
        dim = int(header[4:])
        entries = []
        for lineno, raw in enumerate(fh, 2):
            line = raw.rstrip("\n")
            if not line:
                continue
            parts = line.split("\t")
            if len(parts) != 4:
                raise IndexFormatError(f"{path}:{lineno}: expected 4 tab-separated fields")
            entry_id, label, expr, values = parts
            try:
                vec = np.asarray([float(v) for v in values.split(",")], dtype=np.float64)
            except ValueError:
                raise IndexFormatError(f"{path}:{lineno}: bad vector") from None
            if len(vec) != dim:
                raise IndexFormatError(f"{path}:{lineno}: vector has {len(vec)} values, header says {dim}")
            entries.append(Entry(entry_id, expr, label or None, vec))
    if not entries:
        raise IndexFormatError(f"{path}: no entries")
    return EmbeddingIndex(entries)
