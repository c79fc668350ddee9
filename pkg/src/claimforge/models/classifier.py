"""Bidirectional encoder with mean pooling and a multi-label sigmoid head."""
from __future__ import annotations

import numpy as np

from ..errors import EmptySequenceError, SequenceTooLongError
from .config import ModelConfig
from .functional import (
    bce_with_logits_backward,
    bce_with_logits_forward,
    sigmoid,
)
from .trunk import init_trunk_params, trunk_backward, trunk_forward, zero_grads

INIT_STD = 0.02


class EncoderClassifier:
    kind = "classifier"

    def __init__(self, config: ModelConfig, num_labels: int,
                 params: dict | None = None):
        if num_labels < 1:
            raise ValueError(f"num_labels must be >= 1, got {num_labels}")
        self.config = config
        self.num_labels = num_labels
        if params is None:
            rng = np.random.default_rng(config.seed)
            params = init_trunk_params(config, rng)
            params["cls_w"] = rng.normal(0.0, INIT_STD,
                                         (config.d_model, num_labels))
            params["cls_b"] = np.zeros(num_labels)
        self.params = params
        self.step = 0
        self.vocab_hash: str | None = None

    # -- inference --------------------------------------------------------

    def forward(self, ids: np.ndarray, key_mask: np.ndarray):
        """Label logits (B, num_labels); padded positions excluded from pool."""
        logits, _ = self._forward_cached(ids, key_mask)
        return logits

    def predict_proba(self, ids: np.ndarray, key_mask: np.ndarray):
        return sigmoid(self.forward(ids, key_mask))

    def proba_for(self, seq) -> np.ndarray:
        """Per-label probabilities for one unpadded sequence of ids."""
        ids = np.asarray(getattr(seq, "ids", seq), dtype=np.int64)
        if ids.size == 0:
            raise EmptySequenceError("cannot classify an empty sequence")
        if ids.size > self.config.context_len:
            raise SequenceTooLongError(
                f"sequence length {ids.size} exceeds context_len "
                f"{self.config.context_len}")
        mask = np.ones((1, ids.size), dtype=bool)
        return self.predict_proba(ids[None, :], mask)[0]

    # -- training ---------------------------------------------------------

    def _forward_cached(self, ids, key_mask):
        h, cache = trunk_forward(self.params, ids, self.config,
                                 causal=False, key_mask=key_mask)
        m = key_mask.astype(np.float64)
        counts = np.maximum(m.sum(axis=1, keepdims=True), 1.0)
        pooled = (h * m[..., None]).sum(axis=1) / counts
        logits = pooled @ self.params["cls_w"] + self.params["cls_b"]
        cache.update(h=h, m=m, counts=counts, pooled=pooled)
        return logits, cache

    def loss(self, ids, key_mask, targets) -> float:
        logits, _ = self._forward_cached(ids, key_mask)
        loss, _ = bce_with_logits_forward(logits, targets)
        return float(loss)

    def loss_and_grads(self, ids, key_mask, targets):
        logits, cache = self._forward_cached(ids, key_mask)
        loss, bce_cache = bce_with_logits_forward(logits, targets)
        dlogits = bce_with_logits_backward(bce_cache)
        grads = zero_grads(self.params)
        grads["cls_w"] += cache["pooled"].T @ dlogits
        grads["cls_b"] += dlogits.sum(axis=0)
        dpooled = dlogits @ self.params["cls_w"].T
        dh = dpooled[:, None, :] * (cache["m"] / cache["counts"])[..., None]
        trunk_backward(dh, cache, self.config, grads)
        return float(loss), grads
