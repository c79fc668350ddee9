"""Decoder-only autoregressive language model (causal attention)."""
from __future__ import annotations

import numpy as np

from ..errors import EmptySequenceError, SequenceTooLongError
from .config import ModelConfig
from .functional import cross_entropy_backward, cross_entropy_forward
from .trunk import init_trunk_params, trunk_backward, trunk_forward, zero_grads


class DecoderLM:
    kind = "lm"

    def __init__(self, config: ModelConfig,
                 params: dict | None = None):
        self.config = config
        if params is None:
            rng = np.random.default_rng(config.seed)
            params = init_trunk_params(config, rng)
        self.params = params
        self.step = 0
        # set when training or loading binds the model to a tokenizer
        self.vocab_hash: str | None = None

    # -- inference --------------------------------------------------------

    def forward(self, ids: np.ndarray) -> np.ndarray:
        """Batch logits (B, T, vocab); output projection tied to tok_emb."""
        h, _ = trunk_forward(self.params, ids, self.config, causal=True)
        return h @ self.params["tok_emb"].T

    def logits_for(self, seq) -> np.ndarray:
        """Logits (T, vocab) for one sequence of token ids."""
        ids = _as_1d_ids(seq, self.config.context_len)
        return self.forward(ids[None, :])[0]

    # -- training ---------------------------------------------------------

    def loss(self, ids, targets, mask) -> float:
        logits = self.forward(ids)
        loss, _ = cross_entropy_forward(logits, targets, mask)
        return float(loss)

    def loss_and_grads(self, ids, targets, mask):
        h, cache = trunk_forward(self.params, ids, self.config, causal=True)
        wte = self.params["tok_emb"]
        logits = h @ wte.T
        loss, ce_cache = cross_entropy_forward(logits, targets, mask)
        dlogits = cross_entropy_backward(ce_cache)
        grads = zero_grads(self.params)
        # tied weights: tok_emb collects head and embedding contributions
        dh = dlogits @ wte
        V = wte.shape[0]
        grads["tok_emb"] += dlogits.reshape(-1, V).T @ h.reshape(-1, h.shape[-1])
        trunk_backward(dh, cache, self.config, grads)
        return float(loss), grads


def _as_1d_ids(seq, context_len: int) -> np.ndarray:
    ids = np.asarray(getattr(seq, "ids", seq), dtype=np.int64)
    if ids.ndim != 1:
        raise ValueError(f"expected a 1-D id sequence, got shape {ids.shape}")
    if ids.size == 0:
        raise EmptySequenceError("cannot run the model on an empty sequence")
    if ids.size > context_len:
        raise SequenceTooLongError(
            f"sequence length {ids.size} exceeds context_len {context_len}")
    return ids


def forward_lm(model: DecoderLM, seq) -> np.ndarray:
    """Per-position next-token logits for one sequence."""
    return model.logits_for(seq)
