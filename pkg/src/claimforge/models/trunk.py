"""Shared pre-norm transformer trunk used by both the LM and the classifier.

Parameters live in a flat name -> float64 array dict so checkpointing and
finite-difference checking can walk them uniformly.
"""
from __future__ import annotations

import numpy as np

from .config import ModelConfig
from .functional import (
    attention_backward,
    attention_forward,
    layer_norm_backward,
    layer_norm_forward,
    mlp_backward,
    mlp_forward,
)

INIT_STD = 0.02


def init_trunk_params(cfg: ModelConfig, rng: np.random.Generator) -> dict:
    D, F, V, C = cfg.d_model, cfg.d_ff, cfg.vocab_size, cfg.context_len
    p = {
        "tok_emb": rng.normal(0.0, INIT_STD, (V, D)),
        "pos_emb": rng.normal(0.0, INIT_STD, (C, D)),
        "lnf_g": np.ones(D),
        "lnf_b": np.zeros(D),
    }
    for i in range(cfg.n_layers):
        p[f"h{i}.ln1_g"] = np.ones(D)
        p[f"h{i}.ln1_b"] = np.zeros(D)
        p[f"h{i}.attn_w"] = rng.normal(0.0, INIT_STD, (D, 3 * D))
        p[f"h{i}.attn_b"] = np.zeros(3 * D)
        p[f"h{i}.proj_w"] = rng.normal(0.0, INIT_STD, (D, D))
        p[f"h{i}.proj_b"] = np.zeros(D)
        p[f"h{i}.ln2_g"] = np.ones(D)
        p[f"h{i}.ln2_b"] = np.zeros(D)
        p[f"h{i}.fc_w"] = rng.normal(0.0, INIT_STD, (D, F))
        p[f"h{i}.fc_b"] = np.zeros(F)
        p[f"h{i}.out_w"] = rng.normal(0.0, INIT_STD, (F, D))
        p[f"h{i}.out_b"] = np.zeros(D)
    return p


def trunk_forward(params: dict, ids: np.ndarray, cfg: ModelConfig,
                  causal: bool, key_mask: np.ndarray | None = None):
    """ids (B, T) -> final hidden states (B, T, D) plus backward cache."""
    B, T = ids.shape
    x = params["tok_emb"][ids] + params["pos_emb"][:T]
    blocks = []
    for i in range(cfg.n_layers):
        n1, ln1_c = layer_norm_forward(x, params[f"h{i}.ln1_g"],
                                       params[f"h{i}.ln1_b"])
        a, attn_c = attention_forward(
            n1, params[f"h{i}.attn_w"], params[f"h{i}.attn_b"],
            params[f"h{i}.proj_w"], params[f"h{i}.proj_b"],
            cfg.n_heads, causal, key_mask)
        x = x + a
        n2, ln2_c = layer_norm_forward(x, params[f"h{i}.ln2_g"],
                                       params[f"h{i}.ln2_b"])
        m, mlp_c = mlp_forward(n2, params[f"h{i}.fc_w"], params[f"h{i}.fc_b"],
                               params[f"h{i}.out_w"], params[f"h{i}.out_b"])
        x = x + m
        blocks.append((ln1_c, attn_c, ln2_c, mlp_c))
    h, lnf_c = layer_norm_forward(x, params["lnf_g"], params["lnf_b"])
    cache = {"ids": ids, "blocks": blocks, "lnf": lnf_c, "seq_len": T}
    return h, cache


def trunk_backward(dh: np.ndarray, cache: dict, cfg: ModelConfig,
                   grads: dict) -> None:
    """Accumulates parameter gradients into ``grads`` (same keys as params)."""
    dx, dg, db = layer_norm_backward(dh, cache["lnf"])
    grads["lnf_g"] += dg
    grads["lnf_b"] += db
    for i in reversed(range(cfg.n_layers)):
        ln1_c, attn_c, ln2_c, mlp_c = cache["blocks"][i]
        dn2, dw_fc, db_fc, dw_out, db_out = mlp_backward(dx, mlp_c)
        grads[f"h{i}.fc_w"] += dw_fc
        grads[f"h{i}.fc_b"] += db_fc
        grads[f"h{i}.out_w"] += dw_out
        grads[f"h{i}.out_b"] += db_out
        dres2, dg2, db2 = layer_norm_backward(dn2, ln2_c)
        grads[f"h{i}.ln2_g"] += dg2
        grads[f"h{i}.ln2_b"] += db2
        dx = dx + dres2
        dn1, dw_qkv, db_qkv, dw_o, db_o = attention_backward(dx, attn_c)
        grads[f"h{i}.attn_w"] += dw_qkv
        grads[f"h{i}.attn_b"] += db_qkv
        grads[f"h{i}.proj_w"] += dw_o
        grads[f"h{i}.proj_b"] += db_o
        dres1, dg1, db1 = layer_norm_backward(dn1, ln1_c)
        grads[f"h{i}.ln1_g"] += dg1
        grads[f"h{i}.ln1_b"] += db1
        dx = dx + dres1
    ids, T = cache["ids"], cache["seq_len"]
    grads["pos_emb"][:T] += dx.sum(axis=0)
    np.add.at(grads["tok_emb"], ids, dx)


def zero_grads(params: dict) -> dict:
    return {k: np.zeros_like(v) for k, v in params.items()}
