"""Inference: max-pooled embeddings, greedy decoding, beam search, generation accuracy."""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from ..expr.prefix import PrefixParseError, parse_prefix, to_text
from ..rewrite.oracle import DEFAULT_ORACLE, OracleConfig, Verdict, check_equivalence
from .loss import log_softmax
from .model import Seq2Seq
from .vocab import EOE, PAD, SOE, Vocabulary


class NoContentTokens(ValueError):
    pass


def _src_ids(vocab: Vocabulary, text_or_tokens) -> np.ndarray:
    tokens = text_or_tokens.split() if isinstance(text_or_tokens, str) else list(text_or_tokens)
    return np.asarray([vocab.encode(tokens)], dtype=np.int64)


def embed_ids(model: Seq2Seq, src_ids) -> np.ndarray:
    """Elementwise max of final encoder states over content positions.

    PAD positions are removed before encoding; they are masked everywhere,
    so this changes nothing except making the result independent of padding
    at the bit level.
    """
    ids = np.asarray(src_ids, dtype=np.int64).reshape(-1)
    ids = ids[ids != PAD]
    content = (ids != SOE) & (ids != EOE)
    if not content.any():
        raise NoContentTokens("the input has no non-special tokens")
    states, _ = model.encode(ids[None, :], train=False)
    return states[0][content].max(axis=0)


def embed(model: Seq2Seq, vocab: Vocabulary, expr_text: str) -> np.ndarray:
    return embed_ids(model, _src_ids(vocab, expr_text))


def _step_logprobs(model: Seq2Seq, memory, src, prefixes: np.ndarray) -> np.ndarray:
    n = prefixes.shape[0]
    logits, _ = model.decode(prefixes, np.repeat(memory, n, axis=0), np.repeat(src, n, axis=0))
    lp = log_softmax(logits[:, -1, :].astype(np.float64))
    # PAD and SOE are never emitted
    lp[:, PAD] = -np.inf
    lp[:, SOE] = -np.inf
    return lp


def greedy_decode(model: Seq2Seq, src_ids, max_len: int | None = None) -> tuple[list[int], float]:
    """Argmax decoding; returns emitted ids (EOE excluded) and their total log-probability."""
    max_len = max_len or model.cfg.max_len
    src = np.atleast_2d(np.asarray(src_ids, dtype=np.int64))
    memory, _ = model.encode(src, train=False)
    seq = [SOE]
    total = 0.0
    while len(seq) <= max_len:
        lp = _step_logprobs(model, memory, src, np.asarray([seq]))[0]
        tok = int(np.argmax(lp))
        total += float(lp[tok])
        if tok == EOE:
            break
        seq.append(tok)
    return seq[1:], total


def beam_search(model: Seq2Seq, src_ids, beam_size: int, max_len: int | None = None) -> list[tuple[list[int], float]]:
    """Beam search without length penalty.

    Each step takes the best ``beam_size - finished`` extensions of all live
    beams.  Extensions ending in EOE are finished; beams that reach
    ``max_len`` output tokens are closed as they are.  Results are sorted by
    total log-probability, best first.
    """
    if beam_size < 1:
        raise ValueError("beam_size must be at least 1")
    max_len = max_len or model.cfg.max_len
    src = np.atleast_2d(np.asarray(src_ids, dtype=np.int64))
    memory, _ = model.encode(src, train=False)
    live: list[tuple[list[int], float]] = [([SOE], 0.0)]
    finished: list[tuple[list[int], float]] = []
    while live:
        if len(live[0][0]) > max_len:
            finished.extend((seq[1:], score) for seq, score in live)
            break
        lp = _step_logprobs(model, memory, src, np.asarray([seq for seq, _ in live]))
        scores = np.asarray([score for _, score in live])[:, None] + lp
        flat = scores.reshape(-1)
        k = beam_size - len(finished)
        # stable, so ties go to the earlier beam and the lower token id, as argmax does
        order = np.argsort(-flat, kind="stable")[:k]
        v = lp.shape[1]
        nxt = []
        for idx in order:
            score = float(flat[idx])
            if score == -np.inf:
                break
            b, tok = divmod(int(idx), v)
            seq = live[b][0]
            if tok == EOE:
                finished.append((seq[1:], score))
            else:
                nxt.append((seq + [tok], score))
        live = nxt
    finished.sort(key=lambda item: -item[1])
    return finished[:beam_size]


# --- generation accuracy -----------------------------------------------------

class Outcome(enum.Enum):
    EQUIVALENT = "Equivalent"
    NOT_EQUIVALENT = "NotEquivalent"
    INCONCLUSIVE = "Inconclusive"
    SAME_AS_INPUT = "SameAsInput"
    UNPARSEABLE = "Unparseable"
    EXACT = "Exact"
    DIFFERENT = "Different"

    def __str__(self) -> str:
        return self.value


@dataclass(frozen=True)
class Candidate:
    text: str
    logprob: float
    outcome: Outcome


@dataclass(frozen=True)
class GenerationRecord:
    source: str
    candidates: tuple[Candidate, ...]
    success: bool


@dataclass(frozen=True)
class GenerationResult:
    accuracy: float
    records: tuple[GenerationRecord, ...]


def judge(source: str, tokens: list[str], mode: str, cfg: OracleConfig = DEFAULT_ORACLE) -> Outcome:
    """Classify one decoded beam against its input."""
    try:
        expr = parse_prefix(tokens)
    except PrefixParseError:
        return Outcome.UNPARSEABLE
    text = to_text(expr)
    if mode == "structemb":
        return Outcome.EXACT if text == source else Outcome.DIFFERENT
    if text == source:
        return Outcome.SAME_AS_INPUT
    verdict = check_equivalence(parse_prefix(source.split()), expr, cfg).value
    return {
        Verdict.EQUIVALENT: Outcome.EQUIVALENT,
        Verdict.NOT_EQUIVALENT: Outcome.NOT_EQUIVALENT,
        Verdict.INCONCLUSIVE: Outcome.INCONCLUSIVE,
    }[verdict]


SUCCESS = {"sememb": Outcome.EQUIVALENT, "structemb": Outcome.EXACT}


def infer(model: Seq2Seq, vocab: Vocabulary, source: str, beam_size: int, mode: str = "sememb",
          cfg: OracleConfig = DEFAULT_ORACLE, max_len: int | None = None) -> GenerationRecord:
    if mode not in SUCCESS:
        raise ValueError(f"unknown mode {mode!r}")
    beams = beam_search(model, _src_ids(vocab, source), beam_size, max_len)
    cands = []
    for ids, score in beams:
        tokens = vocab.decode(ids)
        cands.append(Candidate(" ".join(tokens), score, judge(source, tokens, mode, cfg)))
    success = any(c.outcome is SUCCESS[mode] for c in cands)
    return GenerationRecord(source, tuple(cands), success)


def evaluate_generation(model: Seq2Seq, vocab: Vocabulary, sources: list[str], beam_size: int,
                        mode: str = "sememb", cfg: OracleConfig = DEFAULT_ORACLE,
                        max_len: int | None = None) -> GenerationResult:
    """Fraction of inputs for which any beam is a success.

    SemEmb mode needs a beam that parses, differs from the input and is
    judged Equivalent; Inconclusive counts as failure.  StructEmb mode needs
    a beam identical to the input.
    """
    if not sources:
        raise ValueError("no test expressions")
    records = tuple(infer(model, vocab, s, beam_size, mode, cfg, max_len) for s in sources)
    return GenerationResult(sum(r.success for r in records) / len(records), records)
