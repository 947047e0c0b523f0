"""Sequence-to-sequence transformer with manual gradients."""

from .checkpoint import CheckpointError, load_checkpoint, save_checkpoint
from .decode import (
    Candidate,
    GenerationRecord,
    GenerationResult,
    NoContentTokens,
    Outcome,
    beam_search,
    embed,
    embed_ids,
    evaluate_generation,
    greedy_decode,
    infer,
    judge,
)
from .loss import log_softmax, smoothed_cross_entropy
from .model import LengthExceeded, ModelConfig, Seq2Seq, init_params, parameter_shapes
from .train import (
    AdamState,
    Batch,
    GradCheckReport,
    NonFiniteLoss,
    TrainConfig,
    TrainResult,
    adam_update,
    evaluate_loss,
    grad_check,
    grad_check_report,
    make_batch,
    token_batches,
    train,
    train_step,
)
from .vocab import EOE, PAD, SOE, SPECIALS, EmptyDataset, Vocabulary, build_vocab, expression_alphabet

__all__ = [
    "CheckpointError", "load_checkpoint", "save_checkpoint",
    "Candidate", "GenerationRecord", "GenerationResult", "NoContentTokens", "Outcome",
    "beam_search", "embed", "embed_ids", "evaluate_generation", "greedy_decode", "infer", "judge",
    "log_softmax", "smoothed_cross_entropy",
    "LengthExceeded", "ModelConfig", "Seq2Seq", "init_params", "parameter_shapes",
    "AdamState", "Batch", "GradCheckReport", "NonFiniteLoss", "TrainConfig", "TrainResult",
    "adam_update", "evaluate_loss", "grad_check", "grad_check_report", "make_batch",
    "token_batches", "train", "train_step",
    "EOE", "PAD", "SOE", "SPECIALS", "EmptyDataset", "Vocabulary", "build_vocab", "expression_alphabet",
]
