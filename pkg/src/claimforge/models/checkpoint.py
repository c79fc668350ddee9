"""Versioned binary checkpoint container.

Layout: 4-byte magic, uint32 little-endian header length, UTF-8 JSON header,
then each array's raw float64 little-endian bytes in header order. Round
trips are bit-exact.
"""
from __future__ import annotations

import json
import struct

import numpy as np

from ..errors import IoError, SchemaVersionMismatchError, VocabHashMismatchError
from .classifier import EncoderClassifier
from .config import ModelConfig
from .decoder import DecoderLM

MAGIC = b"CFCP"
CHECKPOINT_SCHEMA_VERSION = 1


def save_checkpoint(model, path, extra: dict | None = None) -> None:
    """``extra`` holds caller state (e.g. experiment RNG); JSON-serializable."""
    names = sorted(model.params)
    header = {
        "schema_version": CHECKPOINT_SCHEMA_VERSION,
        "kind": model.kind,
        "config": model.config.to_dict(),
        "step": model.step,
        "vocab_hash": model.vocab_hash,
        "extra": extra or {},
        "arrays": [{"name": n, "shape": list(model.params[n].shape)}
                   for n in names],
    }
    if model.kind == "classifier":
        header["num_labels"] = model.num_labels
    blob = json.dumps(header, sort_keys=True).encode("utf-8")
    try:
        with open(path, "wb") as f:
            f.write(MAGIC)
            f.write(struct.pack("<I", len(blob)))
            f.write(blob)
            for n in names:
                arr = np.ascontiguousarray(model.params[n], dtype="<f8")
                f.write(arr.tobytes())
    except OSError as e:
        raise IoError(f"cannot write checkpoint {path}: {e}") from e


def load_checkpoint(path, expect_vocab_hash: str | None = None):
    """Returns (model, extra). Raises VocabHashMismatch when the caller's
    vocabulary does not match the one the model was trained under."""
    try:
        with open(path, "rb") as f:
            raw = f.read()
    except OSError as e:
        raise IoError(f"cannot read checkpoint {path}: {e}") from e
    if len(raw) < 8 or raw[:4] != MAGIC:
        raise IoError(f"{path} is not a checkpoint file")
    (hlen,) = struct.unpack("<I", raw[4:8])
    if len(raw) < 8 + hlen:
        raise IoError(f"checkpoint {path} truncated in header")
    try:
        header = json.loads(raw[8:8 + hlen].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise IoError(f"checkpoint header unreadable: {e}") from e
    version = header.get("schema_version")
    if version != CHECKPOINT_SCHEMA_VERSION:
        raise SchemaVersionMismatchError(
            f"checkpoint schema_version {version}, expected "
            f"{CHECKPOINT_SCHEMA_VERSION}")

    params = {}
    offset = 8 + hlen
    for spec in header["arrays"]:
        shape = tuple(spec["shape"])
        nbytes = int(np.prod(shape, dtype=np.int64)) * 8
        chunk = raw[offset:offset + nbytes]
        if len(chunk) < nbytes:
            raise IoError(f"checkpoint {path} truncated in array "
                          f"{spec['name']}")
        params[spec["name"]] = np.frombuffer(
            chunk, dtype="<f8").reshape(shape).copy()
        offset += nbytes

    config = ModelConfig.from_dict(header["config"])
    if header["kind"] == "classifier":
        model = EncoderClassifier(config, header["num_labels"], params=params)
    else:
        model = DecoderLM(config, params=params)
    model.step = header["step"]
    model.vocab_hash = header["vocab_hash"]
    if (expect_vocab_hash is not None and model.vocab_hash is not None
            and model.vocab_hash != expect_vocab_hash):
        raise VocabHashMismatchError(
            f"checkpoint trained under vocabulary {model.vocab_hash[:12]}..., "
            f"caller supplied {expect_vocab_hash[:12]}...")
    return model, header.get("extra", {})
