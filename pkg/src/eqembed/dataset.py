"""Pair datasets and equivalence-class datasets, with their text formats.

Every expression is stored as canonical prefix text (tokens joined by one
space), which is also the key used for deduplication and split disjointness.

Pair file::

    # comment
    #@ seed=42
    div sin x cos x<TAB>tan x

Class file::

    SPLIT UnseenEqClass
    CLASS 0
    sin x
    sub ...

A blank line ends a class; ``#@ key=value`` lines carry metadata.
"""

from __future__ import annotations

import math
import random
import statistics
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

from .expr.checks import MAX_TOKENS, validate
from .expr.nodes import Expr, count_operators, is_constant
from .expr.prefix import PrefixParseError, parse_text, to_text
from .expr.sampling import ExpressionSampler
from .rewrite.generate import generate_equivalents, undefined_everywhere
from .rewrite.oracle import DEFAULT_ORACLE, OracleConfig
from .rewrite.rules import ALL_RULES
from .rewrite.simplify import simplify_basic

SPLIT_TAGS = ("train", "validation", "SeenEqClass", "UnseenEqClass")

Pair = tuple[str, str]


class DataFormatError(ValueError):
    """A dataset file could not be read; ``lineno`` is 1-based, 0 when not line-specific."""

    def __init__(self, message: str, path=None, lineno: int = 0):
        where = f"{path}:{lineno}: " if path is not None and lineno else (f"{path}: " if path else "")
        super().__init__(where + message)
        self.path = path
        self.lineno = lineno


class InsufficientCorpus(ValueError):
    pass


@dataclass
class PairDataset:
    examples: list[Pair] = field(default_factory=list)
    metadata: dict[str, str] = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.examples)

    def __iter__(self):
        return iter(self.examples)

    def expressions(self) -> list[str]:
        """Unique expressions on either side, in first-seen order."""
        return list(dict.fromkeys(e for pair in self.examples for e in pair))

    def is_bidirectional(self) -> bool:
        present = set(self.examples)
        return all((b, a) in present for a, b in present)


@dataclass
class EqClassDataset:
    classes: dict[str, list[str]] = field(default_factory=dict)
    split: str | None = None
    metadata: dict[str, str] = field(default_factory=dict)

    def __post_init__(self):
        if self.split is not None and self.split not in SPLIT_TAGS:
            raise ValueError(f"unknown split tag {self.split!r}")
        for cid, members in self.classes.items():
            if not members:
                raise ValueError(f"class {cid} is empty")

    def members(self):
        """(class id, expression) for every member."""
        for cid, exprs in self.classes.items():
            for e in exprs:
                yield cid, e


@dataclass(frozen=True)
class SplitSpec:
    val_size: int
    test_size: int
    seed: int = 42

    def __post_init__(self):
        if self.val_size < 1 or self.test_size < 1:
            raise ValueError("split sizes must be positive")


def check_expression(text: str, max_tokens: int = MAX_TOKENS) -> Expr:
    """Parse and validate one stored expression; raises ValueError."""
    expr = parse_text(text)
    problems = validate(expr, max_tokens)
    if problems:
        raise ValueError("; ".join(problems))
    return expr


# --- generation --------------------------------------------------------------

def source_expressions(n: int, seed: int = 42, max_ops: int = 5, min_ops: int = 1,
                       cfg: OracleConfig = DEFAULT_ORACLE) -> list[Expr]:
    """``n`` distinct random sources, each already in simplified form.

    Draws that simplify away, become constant or are undefined at every
    sample point are rejected.
    """
    sampler = ExpressionSampler(seed)
    out: dict[str, Expr] = {}
    attempts = 0
    while len(out) < n:
        attempts += 1
        if attempts > 200 * n + 1000:
            raise InsufficientCorpus(f"only {len(out)} distinct sources after {attempts} draws")
        expr = sampler.sample(max_ops, min_ops)
        if simplify_basic(expr) != expr or is_constant(expr):
            continue
        if count_operators(expr) < min_ops or validate(expr, MAX_TOKENS) or undefined_everywhere(expr, cfg):
            continue
        out.setdefault(to_text(expr), expr)
    return list(out.values())


def _source_equivalents(args) -> list[str]:
    text, rules, max_ops, max_per_source, seed, cfg = args
    expr = parse_text(text)
    found = [to_text(e) for e in generate_equivalents(expr, rules, max_ops=max_ops, cfg=cfg)]
    if len(found) > max_per_source:
        # per-source stream, so the choice does not depend on the order of the sources
        rng = random.Random(f"{seed}:{text}")
        found = sorted(rng.sample(found, max_per_source))
    return found


def _map(fn, jobs, threads: int):
    if threads > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(fn, jobs, chunksize=max(1, len(jobs) // (4 * threads))))
    return [fn(job) for job in jobs]


def build_pair_dataset(
    sources: list[Expr],
    rules=ALL_RULES,
    max_per_source: int = 8,
    seed: int = 42,
    max_ops: int = 5,
    cfg: OracleConfig = DEFAULT_ORACLE,
    threads: int = 1,
) -> PairDataset:
    """Both orientations of every (source, equivalent) pair, deduplicated.

    Sources that are invalid, above ``max_ops`` or undefined at every
    sample point contribute nothing.
    """
    texts = []
    for src in sources:
        if validate(src, MAX_TOKENS) or count_operators(src) > max_ops or undefined_everywhere(src, cfg):
            continue
        texts.append(to_text(src))
    texts = list(dict.fromkeys(texts))
    jobs = [(t, tuple(rules), max_ops, max_per_source, seed, cfg) for t in texts]
    seen: dict[Pair, None] = {}
    for src, equivalents in zip(texts, _map(_source_equivalents, jobs, threads)):
        for eq in equivalents:
            seen.setdefault((src, eq))
            seen.setdefault((eq, src))
    meta = {
        "seed": str(seed),
        "rules": ",".join(r.name for r in rules),
        "max_per_source": str(max_per_source),
        "max_ops": str(max_ops),
        "sources": str(len(texts)),
        "pairs": str(len(seen)),
    }
    return PairDataset(list(seen), meta)


def build_class_dataset(
    sources: list[Expr],
    rules=ALL_RULES,
    max_per_class: int = 8,
    seed: int = 42,
    max_ops: int = 5,
    cfg: OracleConfig = DEFAULT_ORACLE,
    threads: int = 1,
    split: str | None = None,
) -> EqClassDataset:
    """One class per source: the source and its generated equivalents."""
    texts = []
    for src in sources:
        if validate(src, MAX_TOKENS) or count_operators(src) > max_ops or undefined_everywhere(src, cfg):
            continue
        texts.append(to_text(src))
    texts = list(dict.fromkeys(texts))
    jobs = [(t, tuple(rules), max_ops, max_per_class, seed, cfg) for t in texts]
    classes: dict[str, list[str]] = {}
    taken: set[str] = set()
    for src, equivalents in zip(texts, _map(_source_equivalents, jobs, threads)):
        # an expression already claimed by an earlier class would join two classes
        members = [e for e in dict.fromkeys([src, *equivalents]) if e not in taken]
        if src not in members:
            continue
        taken.update(members)
        classes[str(len(classes))] = members
    return EqClassDataset(classes, split, {"seed": str(seed)})


def make_identity_pairs(pairs: PairDataset) -> PairDataset:
    meta = dict(pairs.metadata, mode="structemb")
    return PairDataset([(e, e) for e in pairs.expressions()], meta)


def split_dataset(pairs: PairDataset, spec: SplitSpec) -> tuple[PairDataset, list[str], list[str]]:
    """Hold out single expressions for validation and test.

    Training pairs touching a held-out expression are dropped, so no
    expression string appears in more than one part.
    """
    unique = sorted(pairs.expressions())
    if spec.val_size + spec.test_size >= len(unique):
        raise InsufficientCorpus(
            f"need more than {spec.val_size + spec.test_size} unique expressions, have {len(unique)}"
        )
    random.Random(spec.seed).shuffle(unique)
    val = unique[: spec.val_size]
    test = unique[spec.val_size: spec.val_size + spec.test_size]
    held = set(val) | set(test)
    train = [(a, b) for a, b in pairs.examples if a not in held and b not in held]
    meta = dict(pairs.metadata, split_seed=str(spec.seed), pairs=str(len(train)))
    return PairDataset(train, meta), val, test


def _pair_at(members: list[str], index: int) -> Pair:
    # enumerate ordered pairs (i, j), i != j, row-major with the diagonal skipped
    n = len(members)
    i, j = divmod(index, n - 1)
    if j >= i:
        j += 1
    return members[i], members[j]


def explode_class_pairs(classes: EqClassDataset, cap: int = 100_000, seed: int = 42) -> PairDataset:
    """All ordered pairs of distinct members per class, sampled down to ``cap`` per class."""
    out: list[Pair] = []
    for cid, members in classes.classes.items():
        members = list(dict.fromkeys(members))
        n = len(members)
        total = n * (n - 1)
        if total <= cap:
            indices = range(total)
        else:
            indices = sorted(random.Random(f"{seed}:{cid}").sample(range(total), cap))
        out.extend(_pair_at(members, k) for k in indices)
    return PairDataset(out, {"seed": str(seed), "cap": str(cap), "pairs": str(len(out))})


# --- statistics --------------------------------------------------------------

def _mean_sd(values: list[float]) -> tuple[float, float]:
    if not values:
        return math.nan, math.nan
    sd = statistics.pstdev(values) if len(values) > 1 else 0.0
    return statistics.fmean(values), sd


def expression_stats(texts: list[str]) -> dict[str, tuple[float, float]]:
    """Mean and standard deviation of operator count and token length."""
    ops = [count_operators(parse_text(t)) for t in texts]
    lengths = [len(t.split()) for t in texts]
    return {"operators": _mean_sd(ops), "length": _mean_sd(lengths)}


# --- file formats ------------------------------------------------------------

def _meta_line(line: str, meta: dict, path, lineno: int) -> None:
    body = line[2:].strip()
    key, sep, value = body.partition("=")
    if not sep or not key:
        raise DataFormatError(f"bad metadata line {line!r}", path, lineno)
    meta[key.strip()] = value.strip()


def write_pairs(dataset: PairDataset, path) -> None:
    lines = [f"#@ {k}={v}" for k, v in dataset.metadata.items()]
    lines += [f"{a}\t{b}" for a, b in dataset.examples]
    Path(path).write_text("".join(line + "\n" for line in lines), encoding="utf-8")


def read_pairs(path, max_tokens: int = MAX_TOKENS) -> PairDataset:
    meta: dict[str, str] = {}
    examples: list[Pair] = []
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.rstrip("\n")
            if line.startswith("#@"):
                _meta_line(line, meta, path, lineno)
                continue
            if not line.strip() or line.startswith("#"):
                continue
            parts = line.split("\t")
            if len(parts) != 2:
                raise DataFormatError("expected 'input<TAB>output'", path, lineno)
            for text in parts:
                try:
                    check_expression(text, max_tokens)
                except (PrefixParseError, ValueError) as exc:
                    raise DataFormatError(str(exc), path, lineno) from None
            examples.append((parts[0], parts[1]))
    return PairDataset(examples, meta)


def write_expressions(texts: list[str], path) -> None:
    Path(path).write_text("".join(t + "\n" for t in texts), encoding="utf-8")


def read_expressions(path, max_tokens: int = MAX_TOKENS) -> list[str]:
    """One prefix expression per line; blank and ``#`` lines are skipped."""
    out = []
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            try:
                out.append(to_text(check_expression(line, max_tokens)))
            except (PrefixParseError, ValueError) as exc:
                raise DataFormatError(str(exc), path, lineno) from None
    return out


def write_classes(dataset: EqClassDataset, path) -> None:
    lines = [f"#@ {k}={v}" for k, v in dataset.metadata.items()]
    if dataset.split:
        lines.append(f"SPLIT {dataset.split}")
    for cid, members in dataset.classes.items():
        lines.append(f"CLASS {cid}")
        lines.extend(members)
        lines.append("")
    Path(path).write_text("".join(line + "\n" for line in lines), encoding="utf-8")


def read_classes(path, max_tokens: int = MAX_TOKENS) -> EqClassDataset:
    meta: dict[str, str] = {}
    classes: dict[str, list[str]] = {}
    split = None
    current: str | None = None
    opened_at = 0

    def close():
        if current is not None and not classes[current]:
            raise DataFormatError(f"class {current} has no members", path, opened_at)

    with open(path, encoding="utf-8") as fh:
        lineno = 0
        for lineno, raw in enumerate(fh, 1):
            line = raw.strip()
            if line.startswith("#@"):
                _meta_line(line, meta, path, lineno)
                continue
            if line.startswith("#"):
                continue
            if not line:
                close()
                current = None
                continue
            if line.startswith("SPLIT "):
                split = line[6:].strip()
                if split not in SPLIT_TAGS:
                    raise DataFormatError(f"unknown split tag {split!r}", path, lineno)
                continue
            if line.startswith("CLASS "):
                close()
                current = line[6:].strip()
                if not current:
                    raise DataFormatError("missing class id", path, lineno)
                if current in classes:
                    raise DataFormatError(f"duplicate class id {current}", path, lineno)
                classes[current] = []
                opened_at = lineno
                continue
            if current is None:
                raise DataFormatError("expression outside a CLASS section", path, lineno)
            try:
                text = to_text(check_expression(line, max_tokens))
            except (PrefixParseError, ValueError) as exc:
                raise DataFormatError(str(exc), path, lineno) from None
            if text not in classes[current]:
                classes[current].append(text)
        close()
    if not classes:
        raise DataFormatError("no classes found", path)
    return EqClassDataset(classes, split, meta)
