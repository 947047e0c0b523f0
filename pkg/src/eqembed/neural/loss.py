from __future__ import annotations

import numpy as np

from .vocab import PAD


def log_softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(-1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(-1, keepdims=True))


def smoothed_cross_entropy(logits, targets, smoothing: float, with_grad: bool = False):
    """Mean cross-entropy over non-PAD targets against a label-smoothed distribution.

    The gold class gets ``1 - smoothing`` and each other class
    ``smoothing / (V - 1)``.  Accumulates in float64 regardless of the logits dtype.
    """
    logits = np.asarray(logits, dtype=np.float64)
    targets = np.asarray(targets)
    v = logits.shape[-1]
    keep = targets != PAD
    count = int(keep.sum())
    if count == 0:
        raise ValueError("no non-PAD targets")
    logp = log_softmax(logits)
    off = smoothing / (v - 1)
    q = np.full(logits.shape, off)
    np.put_along_axis(q, targets[..., None], 1.0 - smoothing, axis=-1)
    per_pos = -(q * logp).sum(-1)
    loss = float((per_pos * keep).sum() / count)
    if not with_grad:
        return loss
    grad = (np.exp(logp) - q) * (keep[..., None] / count)
    return loss, grad
