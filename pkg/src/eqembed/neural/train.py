"""Optimizer, batching, training loop and the finite-difference gradient check."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .loss import smoothed_cross_entropy
from .model import ModelConfig, Seq2Seq
from .vocab import EOE, PAD, SOE, Vocabulary

log = logging.getLogger(__name__)


class NonFiniteLoss(FloatingPointError):
    """Training diverged; the run must stop."""


@dataclass
class AdamState:
    step: int = 0
    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)

    @classmethod
    def for_params(cls, params: dict[str, np.ndarray]) -> "AdamState":
        return cls(0, {k: np.zeros_like(p) for k, p in params.items()}, {k: np.zeros_like(p) for k, p in params.items()})


def adam_update(params, grads, state: AdamState, cfg: ModelConfig, lr: float | None = None) -> None:
    lr = cfg.learning_rate if lr is None else lr
    state.step += 1
    b1, b2 = cfg.beta1, cfg.beta2
    c1 = 1 - b1 ** state.step
    c2 = 1 - b2 ** state.step
    for name, g in grads.items():
        m = state.m[name] = b1 * state.m[name] + (1 - b1) * g
        v = state.v[name] = b2 * state.v[name] + (1 - b2) * g * g
        update = lr * (m / c1) / (np.sqrt(v / c2) + cfg.adam_eps)
        params[name] -= update.astype(params[name].dtype, copy=False)


# --- batches -----------------------------------------------------------------

@dataclass(frozen=True)
class Batch:
    src: np.ndarray
    tgt_in: np.ndarray
    tgt_out: np.ndarray

    @property
    def tokens(self) -> int:
        return int((self.tgt_out != PAD).sum())


def _pad(rows: list[list[int]]) -> np.ndarray:
    width = max(len(r) for r in rows)
    out = np.full((len(rows), width), PAD, dtype=np.int64)
    for i, r in enumerate(rows):
        out[i, : len(r)] = r
    return out


def make_batch(vocab: Vocabulary, pairs: list[tuple[str, str]]) -> Batch:
    """Source ``[SOE, a.., EOE]``, decoder input ``[SOE, b..]`` and target ``[b.., EOE]``."""
    src, tin, tout = [], [], []
    for a, b in pairs:
        src.append(vocab.encode(a.split()))
        ids = vocab.encode(b.split(), wrap=False)
        tin.append([SOE, *ids])
        tout.append([*ids, EOE])
    return Batch(_pad(src), _pad(tin), _pad(tout))


def token_batches(vocab: Vocabulary, pairs, max_tokens: int, rng: np.random.Generator | None):
    """Split ``pairs`` into padded batches of at most ``max_tokens`` tokens each.

    The budget counts the padded source plus target width times the batch
    size.  ``rng`` shuffles the order; ``None`` keeps it.
    """
    order = np.arange(len(pairs)) if rng is None else rng.permutation(len(pairs))
    batches, current = [], []
    src_w = tgt_w = 0
    for i in order:
        a, b = pairs[i]
        # padded widths: [SOE a EOE] and [SOE b]
        sw, tw = len(a.split()) + 2, len(b.split()) + 1
        if current and (max(src_w, sw) + max(tgt_w, tw)) * (len(current) + 1) > max_tokens:
            batches.append(make_batch(vocab, current))
            current, src_w, tgt_w = [], 0, 0
        current.append(pairs[i])
        src_w, tgt_w = max(src_w, sw), max(tgt_w, tw)
    if current:
        batches.append(make_batch(vocab, current))
    return batches


def train_step(model: Seq2Seq, batch: Batch, state: AdamState, lr: float | None = None) -> float:
    loss, grads = model.loss_and_grads(batch.src, batch.tgt_in, batch.tgt_out, train=True)
    if not math.isfinite(loss):
        raise NonFiniteLoss(f"loss became {loss} at step {state.step + 1}")
    adam_update(model.params, grads, state, model.cfg, lr)
    return loss


def evaluate_loss(model: Seq2Seq, batches: list[Batch]) -> float:
    total, count = 0.0, 0
    for batch in batches:
        logits = model.forward(batch.src, batch.tgt_in, train=False)
        n = batch.tokens
        total += smoothed_cross_entropy(logits, batch.tgt_out, model.cfg.label_smoothing) * n
        count += n
    return total / count


@dataclass(frozen=True)
class TrainConfig:
    max_steps: int = 2000
    min_steps: int = 0
    patience: int = 0
    eval_every: int = 100
    batch_tokens: int = 2048
    log_every: int = 100


@dataclass
class TrainResult:
    steps: int
    losses: list[float]
    val_losses: list[tuple[int, float]]
    best_step: int
    stopped_early: bool


def train(model: Seq2Seq, vocab: Vocabulary, pairs, tcfg: TrainConfig, val_pairs=None) -> TrainResult:
    """Train in place.

    With validation pairs and ``patience > 0``, stops once the validation
    loss has not improved for ``patience`` evaluations after ``min_steps``
    and restores the best parameters seen.
    """
    if not pairs:
        raise ValueError("no training pairs")
    rng = np.random.default_rng([model.cfg.seed, 2])
    state = AdamState.for_params(model.params)
    val_batches = token_batches(vocab, val_pairs, tcfg.batch_tokens, None) if val_pairs else []
    losses: list[float] = []
    val_losses: list[tuple[int, float]] = []
    best, best_step, best_params, stale = math.inf, 0, None, 0
    step, stopped = 0, False
    while step < tcfg.max_steps and not stopped:
        for batch in token_batches(vocab, pairs, tcfg.batch_tokens, rng):
            losses.append(train_step(model, batch, state))
            step += 1
            if tcfg.log_every and step % tcfg.log_every == 0:
                log.info("step %d loss %.4f", step, losses[-1])
            if val_batches and step % tcfg.eval_every == 0:
                vl = evaluate_loss(model, val_batches)
                val_losses.append((step, vl))
                log.info("step %d val_loss %.4f", step, vl)
                if vl < best:
                    best, best_step, stale = vl, step, 0
                    best_params = {k: p.copy() for k, p in model.params.items()}
                else:
                    stale += 1
                if tcfg.patience and step >= tcfg.min_steps and stale >= tcfg.patience:
                    stopped = True
                    break
            if step >= tcfg.max_steps:
                break
    if stopped and best_params is not None:
        model.params.update(best_params)
    return TrainResult(step, losses, val_losses, best_step if val_losses else step, stopped)


# --- gradient check ----------------------------------------------------------

@dataclass(frozen=True)
class GradCheckReport:
    max_rel_error: float
    probed: int
    skipped_kinks: int


def _relu_pattern(model: Seq2Seq, batch: Batch) -> tuple:
    memory, enc_cache = model.encode(batch.src, train=False)
    _, dec_cache = model.decode(batch.tgt_in, memory, batch.src, train=False)
    enc = [layer[4][1] > 0 for layer in enc_cache[1]]
    dec = [layer[7][1] > 0 for layer in dec_cache[1]]
    return tuple(np.packbits(m).tobytes() for m in enc + dec)


def grad_check_report(cfg: ModelConfig, batch: Batch, eps: float = 1e-4, probes: int = 6,
                      seed: int = 0, floor: float = 1e-6) -> GradCheckReport:
    """Compare analytic gradients with central differences, tensor by tensor.

    Runs in float64 with dropout off.  In every parameter tensor the
    entries with the largest analytic gradient plus random entries are
    probed.  A probe whose +-eps stencil flips the sign of any ReLU input is
    skipped, since the loss is not differentiable across that kink.  The
    error is ``|a - n| / max(|a|, |n|, floor)``.
    """
    cfg = replace(cfg, dtype="float64", dropout=0.0)
    model = Seq2Seq(cfg)
    _, grads = model.loss_and_grads(batch.src, batch.tgt_in, batch.tgt_out, train=False)
    base_pattern = _relu_pattern(model, batch)
    rng = np.random.default_rng(seed)

    def loss_at():
        logits = model.forward(batch.src, batch.tgt_in, train=False)
        return smoothed_cross_entropy(logits, batch.tgt_out, cfg.label_smoothing), _relu_pattern(model, batch)

    worst, probed, skipped = 0.0, 0, 0
    for name, param in model.params.items():
        flat, gflat = param.reshape(-1), grads[name].reshape(-1)
        picks = set(np.argsort(-np.abs(gflat))[: probes // 2].tolist())
        picks.update(rng.choice(flat.size, size=min(probes, flat.size), replace=False).tolist())
        for i in sorted(picks):
            saved = flat[i]
            flat[i] = saved + eps
            up, pat_up = loss_at()
            flat[i] = saved - eps
            down, pat_down = loss_at()
            flat[i] = saved
            if pat_up != base_pattern or pat_down != base_pattern:
                skipped += 1
                continue
            numeric = (up - down) / (2 * eps)
            denom = max(abs(numeric), abs(gflat[i]), floor)
            worst = max(worst, abs(numeric - gflat[i]) / denom)
            probed += 1
    return GradCheckReport(worst, probed, skipped)


def grad_check(cfg: ModelConfig, batch: Batch, eps: float = 1e-4, probes: int = 6, seed: int = 0) -> float:
    """Worst relative error of the analytic gradient; see ``grad_check_report``."""
    return grad_check_report(cfg, batch, eps, probes, seed).max_rel_error
