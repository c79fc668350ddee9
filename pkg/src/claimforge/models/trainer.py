"""Training loops: Adam optimization of the LM and the classifier.

Determinism contract: same seed, same data, same config -> identical loss
trace and identical final weights.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..dataset.bpe import Vocabulary
from ..errors import (
    ClaimForgeError,
    EmptyCorpusError,
    LabelOutOfRangeError,
    VocabMismatchError,
)
from .classifier import EncoderClassifier
from .config import TrainConfig
from .decoder import DecoderLM
from .functional import cross_entropy_forward


@dataclass
class EncodedDataset:
    """LM records as id sequences (BOS ... EOS), bound to one vocabulary."""

    sequences: list[list[int]]
    vocab_hash: str
    pad_id: int

    def __post_init__(self):
        if not self.sequences:
            raise EmptyCorpusError("dataset has no sequences")

    @classmethod
    def from_texts(cls, texts, vocab: Vocabulary) -> "EncodedDataset":
        seqs = [[vocab.bos_id] + list(vocab.encode(t).ids) + [vocab.eos_id]
                for t in texts]
        return cls(sequences=seqs, vocab_hash=vocab.vocab_hash(),
                   pad_id=vocab.pad_id)


@dataclass
class LabeledDataset:
    """Classifier records: (id sequence, set of label indices)."""

    items: list[tuple[list[int], frozenset[int]]]
    vocab_hash: str
    pad_id: int
    num_labels: int

    def __post_init__(self):
        if not self.items:
            raise EmptyCorpusError("dataset has no labeled items")
        for _, labels in self.items:
            for lab in labels:
                if not 0 <= lab < self.num_labels:
                    raise LabelOutOfRangeError(
                        f"label {lab} outside [0, {self.num_labels})")

    @classmethod
    def from_texts(cls, text_label_pairs, vocab: Vocabulary,
                   num_labels: int) -> "LabeledDataset":
        items = []
        for text, labels in text_label_pairs:
            ids = [vocab.bos_id] + list(vocab.encode(text).ids) + [vocab.eos_id]
            items.append((ids, frozenset(labels)))
        return cls(items=items, vocab_hash=vocab.vocab_hash(),
                   pad_id=vocab.pad_id, num_labels=num_labels)


class Adam:
    def __init__(self, params: dict, tc: TrainConfig):
        self.params = params
        self.tc = tc
        self.m = {k: np.zeros_like(v) for k, v in params.items()}
        self.v = {k: np.zeros_like(v) for k, v in params.items()}
        self.t = 0

    def step(self, grads: dict) -> None:
        tc = self.tc
        if tc.grad_clip is not None:
            sq = sum(float((g * g).sum()) for g in grads.values())
            norm = math.sqrt(sq)
            if norm > tc.grad_clip:
                scale = tc.grad_clip / norm
                grads = {k: g * scale for k, g in grads.items()}
        self.t += 1
        bc1 = 1.0 - tc.beta1 ** self.t
        bc2 = 1.0 - tc.beta2 ** self.t
        for k, p in self.params.items():
            g = grads[k]
            self.m[k] = tc.beta1 * self.m[k] + (1.0 - tc.beta1) * g
            self.v[k] = tc.beta2 * self.v[k] + (1.0 - tc.beta2) * g * g
            p -= tc.learning_rate * (self.m[k] / bc1) / (
                np.sqrt(self.v[k] / bc2) + tc.eps)


def _check_vocab(model, vocab_hash: str) -> None:
    if model.vocab_hash is None:
        model.vocab_hash = vocab_hash
    elif model.vocab_hash != vocab_hash:
        raise VocabMismatchError(
            f"model bound to vocabulary {model.vocab_hash[:12]}..., "
            f"dataset encoded under {vocab_hash[:12]}...")


def _lm_batch(ds: EncodedDataset, indices, context_len: int):
    seqs = [ds.sequences[i][:context_len + 1] for i in indices]
    T = max(len(s) for s in seqs) - 1
    B = len(seqs)
    ids = np.full((B, T), ds.pad_id, dtype=np.int64)
    targets = np.full((B, T), ds.pad_id, dtype=np.int64)
    mask = np.zeros((B, T))
    for r, s in enumerate(seqs):
        n = len(s) - 1
        ids[r, :n] = s[:-1]
        targets[r, :n] = s[1:]
        mask[r, :n] = 1.0
    return ids, targets, mask


def _cls_batch(ds: LabeledDataset, indices, context_len: int):
    items = [(ds.items[i][0][:context_len], ds.items[i][1]) for i in indices]
    T = max(len(s) for s, _ in items)
    B = len(items)
    ids = np.full((B, T), ds.pad_id, dtype=np.int64)
    key_mask = np.zeros((B, T), dtype=bool)
    targets = np.zeros((B, ds.num_labels))
    for r, (s, labels) in enumerate(items):
        ids[r, :len(s)] = s
        key_mask[r, :len(s)] = True
        for lab in labels:
            targets[r, lab] = 1.0
    return ids, key_mask, targets


def _assert_finite(loss: float, step: int) -> None:
    if not math.isfinite(loss):
        raise ClaimForgeError(f"non-finite loss {loss} at step {step}")


def train_lm(model: DecoderLM, ds: EncodedDataset,
             tc: TrainConfig) -> tuple[DecoderLM, list[float]]:
    """Optimizes next-token cross-entropy; returns per-step loss trace."""
    _check_vocab(model, ds.vocab_hash)
    rng = np.random.default_rng(tc.seed)
    adam = Adam(model.params, tc)
    n = len(ds.sequences)
    trace = []
    for step in range(tc.max_steps):
        indices = rng.integers(0, n, size=min(tc.batch_size, n))
        ids, targets, mask = _lm_batch(ds, indices, model.config.context_len)
        loss, grads = model.loss_and_grads(ids, targets, mask)
        _assert_finite(loss, model.step)
        trace.append(loss)
        adam.step(grads)
        model.step += 1
    return model, trace


def fine_tune(model: DecoderLM, ds: EncodedDataset,
              tc: TrainConfig) -> tuple[DecoderLM, list[float]]:
    """Continues training from current weights with fresh optimizer state."""
    return train_lm(model, ds, tc)


def train_classifier(model: EncoderClassifier, ds: LabeledDataset,
                     tc: TrainConfig) -> tuple[EncoderClassifier, list[float]]:
    if ds.num_labels != model.num_labels:
        raise LabelOutOfRangeError(
            f"dataset carries {ds.num_labels} labels, model has "
            f"{model.num_labels}")
    _check_vocab(model, ds.vocab_hash)
    rng = np.random.default_rng(tc.seed)
    adam = Adam(model.params, tc)
    n = len(ds.items)
    trace = []
    for step in range(tc.max_steps):
        indices = rng.integers(0, n, size=min(tc.batch_size, n))
        ids, key_mask, targets = _cls_batch(ds, indices,
                                            model.config.context_len)
        loss, grads = model.loss_and_grads(ids, key_mask, targets)
        _assert_finite(loss, model.step)
        trace.append(loss)
        adam.step(grads)
        model.step += 1
    return model, trace


def evaluate_lm(model: DecoderLM, ds: EncodedDataset,
                batch_size: int = 32) -> float:
    """Mean per-token cross-entropy over the whole dataset."""
    _check_vocab(model, ds.vocab_hash)
    total_nll = 0.0
    total_tokens = 0.0
    n = len(ds.sequences)
    for start in range(0, n, batch_size):
        indices = range(start, min(start + batch_size, n))
        ids, targets, mask = _lm_batch(ds, indices, model.config.context_len)
        logits = model.forward(ids)
        loss, (_, _, m, denom) = cross_entropy_forward(logits, targets, mask)
        total_nll += loss * denom
        total_tokens += m.sum()
    return total_nll / max(total_tokens, 1.0)


def evaluate_classifier_exact(model: EncoderClassifier, ds: LabeledDataset,
                              threshold: float = 0.5,
                              batch_size: int = 32) -> float:
    """Fraction of items whose thresholded label set matches exactly."""
    _check_vocab(model, ds.vocab_hash)
    hits = 0
    n = len(ds.items)
    for start in range(0, n, batch_size):
        indices = range(start, min(start + batch_size, n))
        ids, key_mask, targets = _cls_batch(ds, indices,
                                            model.config.context_len)
        probs = model.predict_proba(ids, key_mask)
        pred = probs >= threshold
        hits += int(((pred == (targets > 0.5)).all(axis=1)).sum())
    return hits / n
