"""Pre-LN transformer encoder-decoder in numpy with hand-written gradients.

Parameters live in a flat ``dict`` of arrays so the optimizer, the
checkpoint writer and the gradient checker can treat them uniformly.
Every ``*_fwd`` helper returns its output and a cache, and the matching
``*_bwd`` consumes the cache and accumulates into a gradient dict.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, fields

import numpy as np

from .loss import smoothed_cross_entropy
from .vocab import PAD

LN_EPS = 1e-5
MASKED = -1e9


class LengthExceeded(ValueError):
    pass


@dataclass(frozen=True)
class ModelConfig:
    vocab_size: int
    d_model: int = 32
    n_heads: int = 4
    n_encoder_layers: int = 2
    n_decoder_layers: int = 2
    d_ff: int = 128
    dropout: float = 0.1
    max_len: int = 256
    label_smoothing: float = 0.1
    learning_rate: float = 1e-4
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8
    seed: int = 42
    dtype: str = "float32"
    tie_embeddings: bool = False

    def __post_init__(self):
        if self.d_model % self.n_heads:
            raise ValueError("d_model must be divisible by n_heads")
        if not 0 <= self.dropout < 1:
            raise ValueError("dropout must lie in [0, 1)")
        if self.vocab_size < 4:
            raise ValueError("vocabulary needs at least one non-special token")
        if self.tie_embeddings:
            raise ValueError("tied embeddings are not supported")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_strings(cls, items: dict[str, str]) -> "ModelConfig":
        kinds = {f.name: f.type for f in fields(cls)}
        out = {}
        for key, raw in items.items():
            if key not in kinds:
                raise ValueError(f"unknown config field {key!r}")
            kind = kinds[key]
            if kind == "int":
                out[key] = int(raw)
            elif kind == "float":
                out[key] = float(raw)
            elif kind == "bool":
                out[key] = raw == "True"
            else:
                out[key] = raw
        return cls(**out)


def positional_encoding(max_len: int, d: int, dtype) -> np.ndarray:
    pos = np.arange(max_len)[:, None]
    i = np.arange(d)[None, :]
    angle = pos / np.power(10000.0, (2 * (i // 2)) / d)
    pe = np.where(i % 2 == 0, np.sin(angle), np.cos(angle))
    return pe.astype(dtype)


def _attn_names(prefix):
    return [prefix + s for s in ("wq", "bq", "wk", "bk", "wv", "bv", "wo", "bo")]


def parameter_shapes(cfg: ModelConfig) -> dict[str, tuple[int, ...]]:
    d, f, v = cfg.d_model, cfg.d_ff, cfg.vocab_size
    shapes: dict[str, tuple[int, ...]] = {"src_emb": (v, d), "tgt_emb": (v, d)}

    def ln(prefix):
        shapes[prefix + "g"] = (d,)
        shapes[prefix + "b"] = (d,)

    def attn(prefix):
        for name in _attn_names(prefix):
            shapes[name] = (d, d) if name[-2] == "w" else (d,)

    def ffn(prefix):
        shapes.update({prefix + "w1": (d, f), prefix + "b1": (f,), prefix + "w2": (f, d), prefix + "b2": (d,)})

    for layer in range(cfg.n_encoder_layers):
        p = f"enc.{layer}."
        ln(p + "ln1.")
        attn(p + "attn.")
        ln(p + "ln2.")
        ffn(p + "ffn.")
    ln("enc.ln_f.")
    for layer in range(cfg.n_decoder_layers):
        p = f"dec.{layer}."
        ln(p + "ln1.")
        attn(p + "self.")
        ln(p + "ln2.")
        attn(p + "cross.")
        ln(p + "ln3.")
        ffn(p + "ffn.")
    ln("dec.ln_f.")
    shapes["out.w"] = (d, v)
    shapes["out.b"] = (v,)
    return shapes


def init_params(cfg: ModelConfig) -> dict[str, np.ndarray]:
    rng = np.random.default_rng(cfg.seed)
    bound = 1.0 / np.sqrt(cfg.d_model)
    params = {}
    for name, shape in parameter_shapes(cfg).items():
        leaf = name.rsplit(".", 1)[-1]
        if len(shape) == 2:
            arr = rng.uniform(-bound, bound, shape)
        elif leaf == "g":
            arr = np.ones(shape)
        else:
            arr = np.zeros(shape)
        params[name] = arr.astype(cfg.dtype)
    return params


# --- primitive layers --------------------------------------------------------

def ln_fwd(x, g, b):
    mu = x.mean(-1, keepdims=True)
    xc = x - mu
    var = (xc * xc).mean(-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + LN_EPS)
    xhat = xc * inv
    return xhat * g + b, (xhat, inv, g)


def ln_bwd(dy, cache, grads, prefix):
    xhat, inv, g = cache
    n = xhat.shape[-1]
    grads[prefix + "g"] += (dy * xhat).reshape(-1, n).sum(0)
    grads[prefix + "b"] += dy.reshape(-1, n).sum(0)
    dxhat = dy * g
    return inv / n * (n * dxhat - dxhat.sum(-1, keepdims=True) - xhat * (dxhat * xhat).sum(-1, keepdims=True))


def attn_fwd(p, prefix, xq, xkv, bias, n_heads):
    b, tq, d = xq.shape
    tk = xkv.shape[1]
    dh = d // n_heads
    q = xq @ p[prefix + "wq"] + p[prefix + "bq"]
    k = xkv @ p[prefix + "wk"] + p[prefix + "bk"]
    v = xkv @ p[prefix + "wv"] + p[prefix + "bv"]
    qh = q.reshape(b, tq, n_heads, dh).transpose(0, 2, 1, 3)
    kh = k.reshape(b, tk, n_heads, dh).transpose(0, 2, 1, 3)
    vh = v.reshape(b, tk, n_heads, dh).transpose(0, 2, 1, 3)
    scale = np.asarray(1.0 / np.sqrt(dh), dtype=xq.dtype)
    s = (qh @ kh.transpose(0, 1, 3, 2)) * scale + bias
    s = s - s.max(-1, keepdims=True)
    e = np.exp(s)
    probs = e / e.sum(-1, keepdims=True)
    o = (probs @ vh).transpose(0, 2, 1, 3).reshape(b, tq, d)
    out = o @ p[prefix + "wo"] + p[prefix + "bo"]
    return out, (xq, xkv, qh, kh, vh, probs, o, scale)


def attn_bwd(dout, cache, p, grads, prefix, n_heads):
    xq, xkv, qh, kh, vh, probs, o, scale = cache
    b, tq, d = xq.shape
    tk = xkv.shape[1]
    dh = d // n_heads
    grads[prefix + "wo"] += o.reshape(-1, d).T @ dout.reshape(-1, d)
    grads[prefix + "bo"] += dout.reshape(-1, d).sum(0)
    do = (dout @ p[prefix + "wo"].T).reshape(b, tq, n_heads, dh).transpose(0, 2, 1, 3)
    dprobs = do @ vh.transpose(0, 1, 3, 2)
    dvh = probs.transpose(0, 1, 3, 2) @ do
    ds = probs * (dprobs - (dprobs * probs).sum(-1, keepdims=True)) * scale
    dqh = ds @ kh
    dkh = ds.transpose(0, 1, 3, 2) @ qh
    dq = dqh.transpose(0, 2, 1, 3).reshape(b, tq, d)
    dk = dkh.transpose(0, 2, 1, 3).reshape(b, tk, d)
    dv = dvh.transpose(0, 2, 1, 3).reshape(b, tk, d)
    xq2, xkv2 = xq.reshape(-1, d), xkv.reshape(-1, d)
    grads[prefix + "wq"] += xq2.T @ dq.reshape(-1, d)
    grads[prefix + "bq"] += dq.reshape(-1, d).sum(0)
    grads[prefix + "wk"] += xkv2.T @ dk.reshape(-1, d)
    grads[prefix + "bk"] += dk.reshape(-1, d).sum(0)
    grads[prefix + "wv"] += xkv2.T @ dv.reshape(-1, d)
    grads[prefix + "bv"] += dv.reshape(-1, d).sum(0)
    dxq = dq @ p[prefix + "wq"].T
    dxkv = dk @ p[prefix + "wk"].T + dv @ p[prefix + "wv"].T
    return dxq, dxkv


def ffn_fwd(p, prefix, x):
    h = x @ p[prefix + "w1"] + p[prefix + "b1"]
    a = np.maximum(h, 0)
    return a @ p[prefix + "w2"] + p[prefix + "b2"], (x, h, a)


def ffn_bwd(dout, cache, p, grads, prefix):
    x, h, a = cache
    d, f = x.shape[-1], a.shape[-1]
    grads[prefix + "w2"] += a.reshape(-1, f).T @ dout.reshape(-1, d)
    grads[prefix + "b2"] += dout.reshape(-1, d).sum(0)
    dh = (dout @ p[prefix + "w2"].T) * (h > 0)
    grads[prefix + "w1"] += x.reshape(-1, d).T @ dh.reshape(-1, f)
    grads[prefix + "b1"] += dh.reshape(-1, f).sum(0)
    return dh @ p[prefix + "w1"].T


class Dropout:
    """Inverted dropout; a rate of 0 or eval mode is the identity."""

    def __init__(self, rate: float, rng: np.random.Generator | None):
        self.rate = rate
        self.rng = rng

    def __call__(self, x):
        if self.rng is None or self.rate == 0:
            return x, None
        keep = (self.rng.random(x.shape) >= self.rate).astype(x.dtype) / np.asarray(1 - self.rate, x.dtype)
        return x * keep, keep

    @staticmethod
    def backward(dy, mask):
        return dy if mask is None else dy * mask


# --- the model ---------------------------------------------------------------

def _bias(allowed: np.ndarray, dtype) -> np.ndarray:
    return np.where(allowed, 0.0, MASKED).astype(dtype)


class Seq2Seq:
    def __init__(self, cfg: ModelConfig, params: dict[str, np.ndarray] | None = None):
        self.cfg = cfg
        self.params = init_params(cfg) if params is None else params
        self.pe = positional_encoding(cfg.max_len, cfg.d_model, cfg.dtype)
        self.emb_scale = np.asarray(np.sqrt(cfg.d_model), dtype=cfg.dtype)
        # dropout stream; consumed only in train mode
        self.rng = np.random.default_rng([cfg.seed, 1])

    @property
    def dtype(self):
        return np.dtype(self.cfg.dtype)

    def zero_grads(self) -> dict[str, np.ndarray]:
        return {k: np.zeros_like(v) for k, v in self.params.items()}

    def _check_len(self, ids: np.ndarray):
        if ids.shape[-1] > self.cfg.max_len:
            raise LengthExceeded(f"sequence length {ids.shape[-1]} exceeds {self.cfg.max_len}")

    def _embed(self, table, ids, drop):
        x = self.params[table][ids] * self.emb_scale + self.pe[: ids.shape[1]]
        x, mask = drop(x)
        return x, (table, ids, mask)

    def _embed_bwd(self, dx, cache, grads):
        table, ids, mask = cache
        dx = Dropout.backward(dx, mask) * self.emb_scale
        np.add.at(grads[table], ids, dx)

    # encoder
    def encode(self, src: np.ndarray, train: bool = False):
        """Final-LN encoder states ``[B, S, d]`` and the cache for backprop."""
        src = np.atleast_2d(src)
        self._check_len(src)
        cfg, p = self.cfg, self.params
        drop = Dropout(cfg.dropout, self.rng if train else None)
        bias = _bias((src != PAD)[:, None, None, :], self.dtype)
        h, emb_cache = self._embed("src_emb", src, drop)
        layers = []
        for layer in range(cfg.n_encoder_layers):
            pre = f"enc.{layer}."
            a, c_ln1 = ln_fwd(h, p[pre + "ln1.g"], p[pre + "ln1.b"])
            att, c_att = attn_fwd(p, pre + "attn.", a, a, bias, cfg.n_heads)
            att, m1 = drop(att)
            h = h + att
            f, c_ln2 = ln_fwd(h, p[pre + "ln2.g"], p[pre + "ln2.b"])
            f, c_ffn = ffn_fwd(p, pre + "ffn.", f)
            f, m2 = drop(f)
            h = h + f
            layers.append((c_ln1, c_att, m1, c_ln2, c_ffn, m2))
        out, c_lnf = ln_fwd(h, p["enc.ln_f.g"], p["enc.ln_f.b"])
        return out, (emb_cache, layers, c_lnf, bias)

    def encode_bwd(self, dout, cache, grads):
        emb_cache, layers, c_lnf, _ = cache
        cfg, p = self.cfg, self.params
        dh = ln_bwd(dout, c_lnf, grads, "enc.ln_f.")
        for layer in reversed(range(cfg.n_encoder_layers)):
            pre = f"enc.{layer}."
            c_ln1, c_att, m1, c_ln2, c_ffn, m2 = layers[layer]
            df = ffn_bwd(Dropout.backward(dh, m2), c_ffn, p, grads, pre + "ffn.")
            dh = dh + ln_bwd(df, c_ln2, grads, pre + "ln2.")
            dq, dkv = attn_bwd(Dropout.backward(dh, m1), c_att, p, grads, pre + "attn.", cfg.n_heads)
            dh = dh + ln_bwd(dq + dkv, c_ln1, grads, pre + "ln1.")
        self._embed_bwd(dh, emb_cache, grads)

    # decoder
    def decode(self, tgt_in: np.ndarray, memory: np.ndarray, src: np.ndarray, train: bool = False):
        """Logits ``[B, T, V]`` for decoder inputs given encoder states."""
        tgt_in, src = np.atleast_2d(tgt_in), np.atleast_2d(src)
        self._check_len(tgt_in)
        cfg, p = self.cfg, self.params
        drop = Dropout(cfg.dropout, self.rng if train else None)
        t = tgt_in.shape[1]
        causal = np.tril(np.ones((t, t), dtype=bool))[None, None]
        self_bias = _bias(causal & (tgt_in != PAD)[:, None, None, :], self.dtype)
        cross_bias = _bias((src != PAD)[:, None, None, :], self.dtype)
        h, emb_cache = self._embed("tgt_emb", tgt_in, drop)
        layers = []
        for layer in range(cfg.n_decoder_layers):
            pre = f"dec.{layer}."
            a, c_ln1 = ln_fwd(h, p[pre + "ln1.g"], p[pre + "ln1.b"])
            att, c_self = attn_fwd(p, pre + "self.", a, a, self_bias, cfg.n_heads)
            att, m1 = drop(att)
            h = h + att
            a, c_ln2 = ln_fwd(h, p[pre + "ln2.g"], p[pre + "ln2.b"])
            att, c_cross = attn_fwd(p, pre + "cross.", a, memory, cross_bias, cfg.n_heads)
            att, m2 = drop(att)
            h = h + att
            f, c_ln3 = ln_fwd(h, p[pre + "ln3.g"], p[pre + "ln3.b"])
            f, c_ffn = ffn_fwd(p, pre + "ffn.", f)
            f, m3 = drop(f)
            h = h + f
            layers.append((c_ln1, c_self, m1, c_ln2, c_cross, m2, c_ln3, c_ffn, m3))
        hf, c_lnf = ln_fwd(h, p["dec.ln_f.g"], p["dec.ln_f.b"])
        logits = hf @ p["out.w"] + p["out.b"]
        return logits, (emb_cache, layers, c_lnf, hf)

    def decode_bwd(self, dlogits, cache, grads):
        """Backprop through the decoder; returns the gradient for the encoder states."""
        emb_cache, layers, c_lnf, hf = cache
        cfg, p = self.cfg, self.params
        d, v = cfg.d_model, cfg.vocab_size
        grads["out.w"] += hf.reshape(-1, d).T @ dlogits.reshape(-1, v)
        grads["out.b"] += dlogits.reshape(-1, v).sum(0)
        dh = ln_bwd(dlogits @ p["out.w"].T, c_lnf, grads, "dec.ln_f.")
        dmem = None
        for layer in reversed(range(cfg.n_decoder_layers)):
            pre = f"dec.{layer}."
            c_ln1, c_self, m1, c_ln2, c_cross, m2, c_ln3, c_ffn, m3 = layers[layer]
            df = ffn_bwd(Dropout.backward(dh, m3), c_ffn, p, grads, pre + "ffn.")
            dh = dh + ln_bwd(df, c_ln3, grads, pre + "ln3.")
            dq, dkv = attn_bwd(Dropout.backward(dh, m2), c_cross, p, grads, pre + "cross.", cfg.n_heads)
            dmem = dkv if dmem is None else dmem + dkv
            dh = dh + ln_bwd(dq, c_ln2, grads, pre + "ln2.")
            dq, dkv = attn_bwd(Dropout.backward(dh, m1), c_self, p, grads, pre + "self.", cfg.n_heads)
            dh = dh + ln_bwd(dq + dkv, c_ln1, grads, pre + "ln1.")
        self._embed_bwd(dh, emb_cache, grads)
        return dmem

    def forward(self, src, tgt_in, train: bool = False) -> np.ndarray:
        """Logits; for 1-D inputs the batch axis is dropped again."""
        single = np.ndim(tgt_in) == 1
        memory, _ = self.encode(src, train)
        logits, _ = self.decode(tgt_in, memory, src, train)
        return logits[0] if single else logits

    def loss_and_grads(self, src, tgt_in, tgt_out, train: bool = True):
        memory, enc_cache = self.encode(src, train)
        logits, dec_cache = self.decode(tgt_in, memory, src, train)
        loss, dlogits = smoothed_cross_entropy(logits, tgt_out, self.cfg.label_smoothing, with_grad=True)
        grads = self.zero_grads()
        dmem = self.decode_bwd(dlogits.astype(self.dtype, copy=False), dec_cache, grads)
        self.encode_bwd(dmem, enc_cache, grads)
        return loss, grads
