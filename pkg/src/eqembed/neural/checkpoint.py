"""Checkpoint files: a text header followed by raw little-endian float32 tensors.

Header lines, in order::

    EQEMBED-CHECKPOINT 1
    config <field>=<value>      (one per ModelConfig field)
    vocab <token>               (one per token, in id order)
    tensor <name> <d0,d1,..> <offset> <nbytes>
    END

Offsets count from the first byte after the ``END`` line.
"""

from __future__ import annotations

import os
import tempfile
from pathlib import Path

import numpy as np

from .model import ModelConfig, Seq2Seq, parameter_shapes
from .vocab import Vocabulary

MAGIC = "EQEMBED-CHECKPOINT 1"
_DTYPE = np.dtype("<f4")


class CheckpointError(ValueError):
    pass


def atomic_write_bytes(path, data: bytes) -> None:
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent or ".", prefix=path.name + ".", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        Path(tmp).unlink(missing_ok=True)
        raise


def checkpoint_bytes(model: Seq2Seq, vocab: Vocabulary) -> bytes:
    lines = [MAGIC]
    for key, value in model.cfg.to_dict().items():
        lines.append(f"config {key}={value}")
    for token in vocab.tokens:
        lines.append(f"vocab {token}")
    blobs, offset = [], 0
    for name in parameter_shapes(model.cfg):
        arr = np.ascontiguousarray(model.params[name], dtype=_DTYPE)
        data = arr.tobytes()
        shape = ",".join(str(s) for s in arr.shape)
        lines.append(f"tensor {name} {shape} {offset} {len(data)}")
        blobs.append(data)
        offset += len(data)
    lines.append("END")
    return ("\n".join(lines) + "\n").encode("utf-8") + b"".join(blobs)


def save_checkpoint(model: Seq2Seq, vocab: Vocabulary, path) -> None:
    atomic_write_bytes(path, checkpoint_bytes(model, vocab))


def load_checkpoint(path) -> tuple[Seq2Seq, Vocabulary]:
    raw = Path(path).read_bytes()
    end = raw.find(b"\nEND\n")
    if not raw.startswith(MAGIC.encode() + b"\n") or end < 0:
        raise CheckpointError(f"{path}: not a checkpoint file")
    header = raw[: end].decode("utf-8").split("\n")[1:]
    body = raw[end + len(b"\nEND\n"):]
    config: dict[str, str] = {}
    tokens: list[str] = []
    manifest = []
    for line in header:
        kind, _, rest = line.partition(" ")
        if kind == "config":
            key, _, value = rest.partition("=")
            config[key] = value
        elif kind == "vocab":
            tokens.append(rest)
        elif kind == "tensor":
            name, shape, offset, nbytes = rest.split(" ")
            dims = tuple(int(s) for s in shape.split(",")) if shape else ()
            manifest.append((name, dims, int(offset), int(nbytes)))
        else:
            raise CheckpointError(f"{path}: unexpected header line {line!r}")
    cfg = ModelConfig.from_strings(config)
    vocab = Vocabulary(tuple(tokens))
    expected = parameter_shapes(cfg)
    params = {}
    for name, dims, offset, nbytes in manifest:
        if expected.get(name) != dims:
            raise CheckpointError(f"{path}: tensor {name} has shape {dims}, expected {expected.get(name)}")
        if offset + nbytes > len(body) or nbytes != _DTYPE.itemsize * int(np.prod(dims, dtype=np.int64)):
            raise CheckpointError(f"{path}: tensor {name} data is truncated or mis-sized")
        arr = np.frombuffer(body, dtype=_DTYPE, count=nbytes // _DTYPE.itemsize, offset=offset)
        params[name] = arr.reshape(dims).astype(cfg.dtype)
    missing = set(expected) - set(params)
    if missing:
        raise CheckpointError(f"{path}: missing tensors {sorted(missing)}")
    return Seq2Seq(cfg, params), vocab
