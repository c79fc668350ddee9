"""Central finite-difference verification of the hand-written backward pass."""
from __future__ import annotations

import numpy as np

from .classifier import EncoderClassifier
from .config import ModelConfig
from .decoder import DecoderLM

FD_STEP = 1e-4
# relative-error floor keeps near-zero coordinate pairs from dividing by ~0
REL_FLOOR = 1e-5

TINY_CONFIG = ModelConfig(vocab_size=29, n_layers=2, n_heads=2, d_model=12,
                          d_ff=24, context_len=16, seed=3)


def _max_rel_error(loss_fn, params: dict, grads: dict, h: float) -> float:
    worst = 0.0
    for name in sorted(params):
        p = params[name]
        g = grads[name]
        it = np.nditer(p, flags=["multi_index"])
        while not it.finished:
            idx = it.multi_index
            orig = p[idx]
            p[idx] = orig + h
            up = loss_fn()
            p[idx] = orig - h
            down = loss_fn()
            p[idx] = orig
            numeric = (up - down) / (2.0 * h)
            analytic = g[idx]
            denom = max(abs(analytic) + abs(numeric), REL_FLOOR)
            worst = max(worst, abs(analytic - numeric) / denom)
            it.iternext()
    return worst


def gradient_check_lm(config: ModelConfig = TINY_CONFIG, batch: int = 2,
                      seq_len: int = 8, h: float = FD_STEP,
                      seed: int = 11) -> float:
    """Max relative error of analytic vs numeric gradients, every parameter."""
    rng = np.random.default_rng(seed)
    model = DecoderLM(config)
    ids = rng.integers(0, config.vocab_size, size=(batch, seq_len))
    targets = rng.integers(0, config.vocab_size, size=(batch, seq_len))
    mask = np.ones((batch, seq_len))
    mask[0, -2:] = 0.0  # exercise the loss mask path
    _, grads = model.loss_and_grads(ids, targets, mask)
    return _max_rel_error(lambda: model.loss(ids, targets, mask),
                          model.params, grads, h)


def gradient_check_classifier(config: ModelConfig = TINY_CONFIG,
                              num_labels: int = 3, batch: int = 2,
                              seq_len: int = 8, h: float = FD_STEP,
                              seed: int = 13) -> float:
    rng = np.random.default_rng(seed)
    model = EncoderClassifier(config, num_labels)
    ids = rng.integers(0, config.vocab_size, size=(batch, seq_len))
    key_mask = np.ones((batch, seq_len), dtype=bool)
    key_mask[0, -3:] = False  # exercise the padding-mask path
    targets = (rng.random((batch, num_labels)) < 0.5).astype(np.float64)
    _, grads = model.loss_and_grads(ids, key_mask, targets)
    return _max_rel_error(lambda: model.loss(ids, key_mask, targets),
                          model.params, grads, h)


def gradient_check(kind: str, **kwargs) -> float:
    if kind == "lm":
        return gradient_check_lm(**kwargs)
    if kind == "classifier":
        return gradient_check_classifier(**kwargs)
    raise ValueError(f"unknown model kind {kind!r}")
