"""Next-token selection strategies over the decoder LM."""
from __future__ import annotations

import numpy as np

from ..models.decoder import DecoderLM
from ..models.functional import log_softmax, softmax
from .types import SamplingConfig, SamplingStrategy


def sample_next_token(model: DecoderLM, seq, sc: SamplingConfig,
                      rng: np.random.Generator | None = None):
    """Returns (token_id, logprob).

    The reported logprob is always the model's own log P(token | seq);
    strategy and temperature shape only the sampling distribution.
    """
    if rng is None:
        rng = np.random.default_rng(sc.seed)
    logits = model.logits_for(seq)[-1]
    logp = log_softmax(logits)

    if sc.strategy is SamplingStrategy.GREEDY:
        token = int(np.argmax(logits))
    elif sc.strategy is SamplingStrategy.TOP_K:
        k = min(sc.top_k, logits.size)
        top = np.argpartition(logits, -k)[-k:]
        probs = softmax(logits[top])
        token = int(top[rng.choice(k, p=probs)])
    else:  # TEMPERATURE
        probs = softmax(logits / sc.temperature)
        token = int(rng.choice(logits.size, p=probs))
    return token, float(logp[token])
