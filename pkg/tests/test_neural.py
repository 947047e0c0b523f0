import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from eqembed.expr import UnknownToken
from eqembed.neural import (
    EOE,
    PAD,
    SOE,
    AdamState,
    CheckpointError,
    EmptyDataset,
    LengthExceeded,
    ModelConfig,
    NoContentTokens,
    NonFiniteLoss,
    Outcome,
    Seq2Seq,
    TrainConfig,
    beam_search,
    build_vocab,
    embed,
    embed_ids,
    evaluate_generation,
    grad_check_report,
    greedy_decode,
    judge,
    load_checkpoint,
    make_batch,
    save_checkpoint,
    smoothed_cross_entropy,
    token_batches,
    train,
    train_step,
)

PAIRS = [("sin x", "cos x"), ("mul x x", "pow x INT+ 2"), ("tan x", "div sin x cos x")]
VOCAB = build_vocab(PAIRS)


def tiny(**kw):
    base = dict(vocab_size=len(VOCAB), d_model=16, n_heads=2, n_encoder_layers=1, n_decoder_layers=1, d_ff=32)
    base.update(kw)
    return ModelConfig(**base)


# --- vocabulary --------------------------------------------------------------

def test_vocab_order():
    v = build_vocab([("x", "sin x")])
    assert v.tokens == ("PAD", "SOE", "EOE", "sin", "x")
    assert build_vocab([("x", "sin x")]) == v
    with pytest.raises(UnknownToken):
        v.id("cos")
    with pytest.raises(EmptyDataset):
        build_vocab([])


def test_vocab_full_alphabet():
    v = build_vocab([("x", "sin x")], full_alphabet=True)
    assert {"asin", "INT-", "9", "euler"} <= set(v.tokens)
    assert v.tokens[:3] == ("PAD", "SOE", "EOE")


def test_encode_decode():
    ids = VOCAB.encode(["sin", "x"])
    assert ids[0] == SOE and ids[-1] == EOE
    assert VOCAB.decode(ids + [VOCAB.id("x")]) == ["sin", "x"]
    assert VOCAB.decode([PAD, VOCAB.id("x"), PAD]) == ["x"]


# --- loss --------------------------------------------------------------------

def naive_loss(logits, targets, eps):
    total, count = 0.0, 0
    v = logits.shape[-1]
    for row, t in zip(logits.reshape(-1, v), targets.reshape(-1)):
        if t == PAD:
            continue
        m = max(row)
        z = sum(math.exp(r - m) for r in row)
        for c in range(v):
            q = 1 - eps if c == t else eps / (v - 1)
            total -= q * ((row[c] - m) - math.log(z))
        count += 1
    return total / count


@given(st.integers(0, 10_000), st.sampled_from([0.0, 0.1, 0.3]))
def test_loss_matches_naive_reference(seed, eps):
    rng = np.random.default_rng(seed)
    logits = rng.normal(scale=3, size=(2, 5, 7))
    targets = rng.integers(0, 7, size=(2, 5))
    targets[0, 0] = 3
    assert smoothed_cross_entropy(logits, targets, eps) == pytest.approx(naive_loss(logits, targets, eps), abs=1e-10)


@pytest.mark.parametrize("eps", [0.0, 0.1, 0.5])
def test_uniform_logits_give_log_v(eps):
    assert smoothed_cross_entropy(np.zeros((4, 9)), np.array([3, 4, 5, 6]), eps) == pytest.approx(math.log(9))


def test_confident_logits_give_zero_loss():
    logits = np.full((3, 6), -1e4)
    targets = np.array([3, 4, 5])
    logits[np.arange(3), targets] = 1e4
    assert smoothed_cross_entropy(logits, targets, 0.0) == pytest.approx(0.0, abs=1e-12)


def test_loss_gradient_matches_differences():
    rng = np.random.default_rng(0)
    logits = rng.normal(size=(3, 5))
    targets = np.array([3, PAD, 4])
    _, grad = smoothed_cross_entropy(logits, targets, 0.1, with_grad=True)
    h = 1e-6
    for idx in np.ndindex(logits.shape):
        up, down = logits.copy(), logits.copy()
        up[idx] += h
        down[idx] -= h
        num = (smoothed_cross_entropy(up, targets, 0.1) - smoothed_cross_entropy(down, targets, 0.1)) / (2 * h)
        assert grad[idx] == pytest.approx(num, abs=1e-7)
    assert not grad[1].any()


# --- model -------------------------------------------------------------------

def test_config_invariants():
    with pytest.raises(ValueError):
        tiny(n_heads=3)
    with pytest.raises(ValueError):
        tiny(dropout=1.0)
    with pytest.raises(ValueError):
        tiny(tie_embeddings=True)


def test_forward_shape_and_determinism():
    model = Seq2Seq(tiny())
    batch = make_batch(VOCAB, PAIRS)
    logits = model.forward(batch.src, batch.tgt_in)
    assert logits.shape == batch.tgt_in.shape + (len(VOCAB),)
    assert model.forward(batch.src, batch.tgt_in).tobytes() == logits.tobytes()


def test_dropout_only_in_train_mode():
    model = Seq2Seq(tiny(dropout=0.5))
    batch = make_batch(VOCAB, PAIRS)
    a = model.forward(batch.src, batch.tgt_in, train=True)
    b = model.forward(batch.src, batch.tgt_in, train=True)
    assert not np.array_equal(a, b)


def test_causality():
    model = Seq2Seq(tiny())
    src = np.array([VOCAB.encode("tan x".split())])
    tgt = np.array([VOCAB.encode("div sin x cos x".split(), wrap=False)])
    tgt = np.concatenate([[[SOE]], tgt], axis=1)
    base = model.forward(src, tgt)
    for j in range(1, tgt.shape[1]):
        changed = tgt.copy()
        changed[0, j] = VOCAB.id("x") if changed[0, j] != VOCAB.id("x") else VOCAB.id("sin")
        out = model.forward(src, changed)
        assert np.array_equal(out[0, :j], base[0, :j])


def test_source_padding_is_masked():
    model = Seq2Seq(tiny())
    src = np.array([VOCAB.encode("sin x".split())])
    padded = np.concatenate([src, [[PAD, PAD, PAD]]], axis=1)
    tgt = np.array([[SOE, VOCAB.id("cos")]])
    assert np.allclose(model.forward(src, tgt), model.forward(padded, tgt), atol=1e-6)


def test_length_exceeded():
    model = Seq2Seq(tiny(max_len=4))
    with pytest.raises(LengthExceeded):
        model.forward(np.array([VOCAB.encode("div sin x cos x".split())]), np.array([[SOE]]))


# --- gradients ---------------------------------------------------------------

@pytest.mark.parametrize("seed", [0, 1, 2])
def test_grad_check(seed):
    batch = make_batch(VOCAB, PAIRS)
    report = grad_check_report(tiny(seed=seed, dtype="float64"), batch, probes=4, seed=seed)
    assert report.max_rel_error < 1e-3
    assert report.probed > 0


def test_grad_check_smooth_in_eps():
    batch = make_batch(VOCAB, PAIRS[:1])
    a = grad_check_report(tiny(), batch, eps=1e-4, probes=2).max_rel_error
    b = grad_check_report(tiny(), batch, eps=2e-4, probes=2).max_rel_error
    assert math.isfinite(a) and math.isfinite(b)


def test_absent_token_row_has_zero_gradient():
    model = Seq2Seq(tiny(dtype="float64", dropout=0.0))
    batch = make_batch(VOCAB, [("sin x", "cos x")])
    _, grads = model.loss_and_grads(batch.src, batch.tgt_in, batch.tgt_out, train=False)
    absent = VOCAB.id("tan")
    assert not grads["src_emb"][absent].any()
    assert not grads["tgt_emb"][absent].any()
    assert grads["src_emb"][VOCAB.id("sin")].any()


# --- training ----------------------------------------------------------------

def test_zero_learning_rate_keeps_parameters():
    model = Seq2Seq(tiny())
    before = {k: v.copy() for k, v in model.params.items()}
    state = AdamState.for_params(model.params)
    train_step(model, make_batch(VOCAB, PAIRS), state, lr=0.0)
    assert all(np.array_equal(before[k], model.params[k]) for k in before)


def test_training_is_deterministic():
    runs = []
    for _ in range(2):
        model = Seq2Seq(tiny())
        train(model, VOCAB, PAIRS, TrainConfig(max_steps=30, batch_tokens=40, log_every=0))
        runs.append(b"".join(model.params[k].tobytes() for k in sorted(model.params)))
    assert runs[0] == runs[1]


def test_loss_falls_on_repeated_pair():
    # dropout off: the property concerns the optimizer, not dropout noise
    model = Seq2Seq(tiny(dropout=0.0))
    result = train(model, VOCAB, [PAIRS[1]], TrainConfig(max_steps=200, log_every=0))
    losses = result.losses
    assert len(losses) == 200
    assert all(losses[i + 50] < losses[i] for i in range(150))


def test_early_stopping_restores_best():
    model = Seq2Seq(tiny(learning_rate=3e-3))
    result = train(
        model, VOCAB, PAIRS[:2], TrainConfig(max_steps=400, min_steps=20, patience=2, eval_every=10, log_every=0),
        val_pairs=[PAIRS[2]],
    )
    assert result.val_losses
    best = min(v for _, v in result.val_losses)
    assert result.best_step == min(s for s, v in result.val_losses if v == best)
    if result.stopped_early:
        assert result.steps < 400


def test_non_finite_loss_raises():
    model = Seq2Seq(tiny())
    model.params["out.b"][:] = np.nan
    with pytest.raises(NonFiniteLoss):
        train_step(model, make_batch(VOCAB, PAIRS), AdamState.for_params(model.params))


def test_token_budget_batches():
    pairs = PAIRS * 10
    batches = token_batches(VOCAB, pairs, 60, None)
    assert sum(b.src.shape[0] for b in batches) == len(pairs)
    for b in batches:
        assert b.src.shape[0] == 1 or (b.src.shape[1] + b.tgt_in.shape[1]) * b.src.shape[0] <= 60


# --- embedding ---------------------------------------------------------------

def test_embedding_ignores_padding():
    model = Seq2Seq(tiny())
    ids = VOCAB.encode("div sin x cos x".split())
    assert embed_ids(model, ids).tobytes() == embed_ids(model, ids + [PAD] * 4).tobytes()


def test_embedding_single_and_pair_positions():
    model = Seq2Seq(tiny())
    ids = np.array([VOCAB.encode(["x"])])
    states, _ = model.encode(ids)
    assert np.array_equal(embed_ids(model, ids), states[0, 1])
    ids = np.array([VOCAB.encode(["sin", "x"])])
    states, _ = model.encode(ids)
    assert np.array_equal(embed_ids(model, ids), np.maximum(states[0, 1], states[0, 2]))


def test_embedding_needs_content():
    with pytest.raises(NoContentTokens):
        embed_ids(Seq2Seq(tiny()), [SOE, EOE])


def test_embed_text_shape():
    vec = embed(Seq2Seq(tiny()), VOCAB, "tan x")
    assert vec.shape == (16,) and np.all(np.isfinite(vec))


# --- decoding ----------------------------------------------------------------

class RiggedModel(Seq2Seq):
    """Decoder logits come from a table keyed by output position."""

    def __init__(self, table):
        super().__init__(tiny())
        self.table = table

    def decode(self, tgt_in, memory, src, train=False):
        n, t = tgt_in.shape
        return np.broadcast_to(self.table[min(t - 1, len(self.table) - 1)], (n, t, self.table.shape[1])).copy(), None


def test_beam_returns_forced_sequence():
    v = len(VOCAB)
    target = [VOCAB.id("sin"), VOCAB.id("x"), EOE]
    table = np.full((4, v), -5.0)
    for pos, tok in enumerate(target):
        table[pos, tok] = 5.0
    model = RiggedModel(table)
    src = [VOCAB.encode(["x"])]
    for b in (1, 3, 5):
        seqs = beam_search(model, src, b, max_len=6)
        assert seqs[0][0] == target[:-1]
    assert greedy_decode(model, src, 6)[0] == target[:-1]


def test_beam_finds_sequence_greedy_misses():
    v = len(VOCAB)
    a, b, c = VOCAB.id("sin"), VOCAB.id("cos"), VOCAB.id("x")
    table = np.full((3, v), -30.0)
    # step 0: a slightly preferred over b
    table[0, a], table[0, b] = 0.1, 0.0
    model_tables = {a: None}
    del model_tables

    class Branching(RiggedModel):
        def decode(self, tgt_in, memory, src, train=False):
            n, t = tgt_in.shape
            out = np.full((n, t, v), -30.0)
            for i in range(n):
                last = tgt_in[i, -1]
                if t == 1:
                    out[i, -1, a], out[i, -1, b] = 0.1, 0.0
                elif t == 2 and last == a:
                    out[i, -1, :] = 0.0  # flat: every continuation is poor
                elif t == 2 and last == b:
                    out[i, -1, EOE] = 10.0
                else:
                    out[i, -1, EOE] = 10.0
            return out, None

    model = Branching(table)
    src = [VOCAB.encode(["x"])]
    greedy_ids, greedy_lp = greedy_decode(model, src, 4)
    beams = beam_search(model, src, 2, 4)
    assert greedy_ids[0] == a
    assert beams[0][0] == [b]
    assert beams[0][1] > greedy_lp
    assert c  # token exists


def test_beam_contracts_on_random_model():
    model = Seq2Seq(tiny(seed=3))
    rng = np.random.default_rng(0)
    toks = [t for t in VOCAB.tokens[3:]]
    for _ in range(10):
        src = [VOCAB.encode(list(rng.choice(toks, size=rng.integers(1, 5))))]
        greedy_ids, greedy_lp = greedy_decode(model, src, 8)
        one = beam_search(model, src, 1, 8)
        assert one[0][0] == greedy_ids
        assert one[0][1] == pytest.approx(greedy_lp)
        five = beam_search(model, src, 5, 8)
        assert len(five) <= 5
        scores = [s for _, s in five]
        assert scores == sorted(scores, reverse=True)


def test_beam_size_validated():
    with pytest.raises(ValueError):
        beam_search(Seq2Seq(tiny()), [VOCAB.encode(["x"])], 0)


# --- generation judging ------------------------------------------------------

def test_judge_rules():
    assert judge("sin x", ["sin", "x"], "sememb") is Outcome.SAME_AS_INPUT
    assert judge("sin x", ["sin"], "sememb") is Outcome.UNPARSEABLE
    assert judge("div sin x cos x", ["tan", "x"], "sememb") is Outcome.EQUIVALENT
    assert judge("sin x", ["cos", "x"], "sememb") is Outcome.NOT_EQUIVALENT
    assert judge("sin x", ["sin", "x"], "structemb") is Outcome.EXACT
    assert judge("sin x", ["cos", "x"], "structemb") is Outcome.DIFFERENT


def test_same_as_input_is_not_success():
    v = len(VOCAB)
    table = np.full((3, v), -5.0)
    table[0, VOCAB.id("tan")] = table[1, VOCAB.id("x")] = table[2, EOE] = 5.0
    model = RiggedModel(table)
    sem = evaluate_generation(model, VOCAB, ["tan x"], 1, "sememb", max_len=4)
    struct = evaluate_generation(model, VOCAB, ["tan x"], 1, "structemb", max_len=4)
    assert sem.accuracy == 0.0
    assert sem.records[0].candidates[0].outcome is Outcome.SAME_AS_INPUT
    assert struct.accuracy == 1.0
    equiv = evaluate_generation(model, VOCAB, ["div sin x cos x"], 1, "sememb", max_len=4)
    assert equiv.accuracy == 1.0


# --- checkpoints -------------------------------------------------------------

def test_checkpoint_round_trip(tmp_path):
    model = Seq2Seq(tiny())
    train(model, VOCAB, PAIRS, TrainConfig(max_steps=3, log_every=0))
    path = tmp_path / "m.ckpt"
    save_checkpoint(model, VOCAB, path)
    loaded, vocab = load_checkpoint(path)
    assert vocab == VOCAB and loaded.cfg == model.cfg
    for k in model.params:
        assert loaded.params[k].tobytes() == model.params[k].tobytes()
    save_checkpoint(loaded, vocab, tmp_path / "again.ckpt")
    assert (tmp_path / "again.ckpt").read_bytes() == path.read_bytes()


def test_checkpoint_corruption(tmp_path):
    path = tmp_path / "m.ckpt"
    save_checkpoint(Seq2Seq(tiny()), VOCAB, path)
    raw = path.read_bytes()
    (tmp_path / "short.ckpt").write_bytes(raw[:-10])
    with pytest.raises(CheckpointError):
        load_checkpoint(tmp_path / "short.ckpt")
    (tmp_path / "junk.ckpt").write_bytes(b"hello\n")
    with pytest.raises(CheckpointError):
        load_checkpoint(tmp_path / "junk.ckpt")
