"""Forward and backward passes for every layer, written out by hand.

Everything is float64 numpy. Each ``*_forward`` returns (output, cache) and
the matching ``*_backward`` consumes that cache, so analytic gradients can be
compared against finite differences coordinate by coordinate.
"""
from __future__ import annotations

import math

import numpy as np

NEG_INF = -1e30  # additive mask; large but finite so softmax never sees NaN
_GELU_C = math.sqrt(2.0 / math.pi)
_GELU_A = 0.044715
LN_EPS = 1e-5


# -- layer norm ------------------------------------------------------------

def layer_norm_forward(x, gain, bias):
    mu = x.mean(axis=-1, keepdims=True)
    var = x.var(axis=-1, keepdims=True)
    std = np.sqrt(var + LN_EPS)
    xhat = (x - mu) / std
    out = xhat * gain + bias
    return out, (xhat, std, gain)


def layer_norm_backward(dout, cache):
    xhat, std, gain = cache
    dxhat = dout * gain
    dx = (dxhat - dxhat.mean(axis=-1, keepdims=True)
          - xhat * (dxhat * xhat).mean(axis=-1, keepdims=True)) / std
    dgain = (dout * xhat).sum(axis=tuple(range(dout.ndim - 1)))
    dbias = dout.sum(axis=tuple(range(dout.ndim - 1)))
    return dx, dgain, dbias


# -- affine ----------------------------------------------------------------

def linear_forward(x, w, b):
    return x @ w + b, (x, w)


def linear_backward(dout, cache):
    x, w = cache
    din, dout_dim = w.shape
    dw = x.reshape(-1, din).T @ dout.reshape(-1, dout_dim)
    db = dout.reshape(-1, dout_dim).sum(axis=0)
    dx = dout @ w.T
    return dx, dw, db


# -- GELU (tanh approximation) ---------------------------------------------

def gelu_forward(x):
    u = _GELU_C * (x + _GELU_A * x ** 3)
    t = np.tanh(u)
    return 0.5 * x * (1.0 + t), (x, t)


def gelu_backward(dout, cache):
    x, t = cache
    du_dx = _GELU_C * (1.0 + 3.0 * _GELU_A * x ** 2)
    dgelu = 0.5 * (1.0 + t) + 0.5 * x * (1.0 - t ** 2) * du_dx
    return dout * dgelu


# -- softmax ---------------------------------------------------------------

def softmax(x, axis=-1):
    shifted = x - x.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=axis, keepdims=True)


def log_softmax(x, axis=-1):
    shifted = x - x.max(axis=axis, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=axis, keepdims=True))


# -- multi-head attention --------------------------------------------------

def attention_forward(x, w_qkv, b_qkv, w_o, b_o, n_heads,
                      causal, key_mask=None):
    """x: (B, T, D). key_mask: optional (B, T) bool, True marks real tokens."""
    B, T, D = x.shape
    dh = D // n_heads
    qkv, lin_cache = linear_forward(x, w_qkv, b_qkv)
    q, k, v = np.split(qkv, 3, axis=-1)

    def heads(m):
        return m.reshape(B, T, n_heads, dh).transpose(0, 2, 1, 3)

    q, k, v = heads(q), heads(k), heads(v)
    scale = 1.0 / math.sqrt(dh)
    scores = (q @ k.transpose(0, 1, 3, 2)) * scale
    if causal:
        scores = scores + np.triu(np.full((T, T), NEG_INF), k=1)
    if key_mask is not None:
        scores = scores + np.where(key_mask[:, None, None, :], 0.0, NEG_INF)
    att = softmax(scores)
    ctx = att @ v
    merged = ctx.transpose(0, 2, 1, 3).reshape(B, T, D)
    out, out_cache = linear_forward(merged, w_o, b_o)
    return out, (lin_cache, q, k, v, att, merged, out_cache, scale, n_heads)


def attention_backward(dout, cache):
    lin_cache, q, k, v, att, merged, out_cache, scale, n_heads = cache
    B, H, T, dh = q.shape
    D = H * dh
    dmerged, dw_o, db_o = linear_backward(dout, out_cache)
    dctx = dmerged.reshape(B, T, H, dh).transpose(0, 2, 1, 3)
    datt = dctx @ v.transpose(0, 1, 3, 2)
    dv = att.transpose(0, 1, 3, 2) @ dctx
    # masked entries have att == 0, so their score gradient vanishes here
    dscores = att * (datt - (datt * att).sum(axis=-1, keepdims=True))
    dq = (dscores @ k) * scale
    dk = (dscores.transpose(0, 1, 3, 2) @ q) * scale

    def unheads(m):
        return m.transpose(0, 2, 1, 3).reshape(B, T, D)

    dqkv = np.concatenate([unheads(dq), unheads(dk), unheads(dv)], axis=-1)
    dx, dw_qkv, db_qkv = linear_backward(dqkv, lin_cache)
    return dx, dw_qkv, db_qkv, dw_o, db_o


# -- feed-forward block ----------------------------------------------------

def mlp_forward(x, w_fc, b_fc, w_out, b_out):
    h_pre, fc_cache = linear_forward(x, w_fc, b_fc)
    h, gelu_cache = gelu_forward(h_pre)
    out, out_cache = linear_forward(h, w_out, b_out)
    return out, (fc_cache, gelu_cache, out_cache)


def mlp_backward(dout, cache):
    fc_cache, gelu_cache, out_cache = cache
    dh, dw_out, db_out = linear_backward(dout, out_cache)
    dh_pre = gelu_backward(dh, gelu_cache)
    dx, dw_fc, db_fc = linear_backward(dh_pre, fc_cache)
    return dx, dw_fc, db_fc, dw_out, db_out


# -- losses ----------------------------------------------------------------

def cross_entropy_forward(logits, targets, mask):
    """Mean next-token CE over unmasked positions.

    logits (B, T, V); targets (B, T) int; mask (B, T) float 0/1.
    """
    logp = log_softmax(logits)
    B, T, V = logits.shape
    picked = np.take_along_axis(logp, targets[..., None], axis=-1)[..., 0]
    denom = max(mask.sum(), 1.0)
    loss = -(picked * mask).sum() / denom
    return loss, (logp, targets, mask, denom)


def cross_entropy_backward(cache):
    logp, targets, mask, denom = cache
    probs = np.exp(logp)
    dlogits = probs.copy()
    B, T, V = dlogits.shape
    flat = dlogits.reshape(-1, V)
    flat[np.arange(flat.shape[0]), targets.reshape(-1)] -= 1.0
    dlogits *= (mask / denom)[..., None]
    return dlogits


def bce_with_logits_forward(logits, targets):
    """Stable multi-label sigmoid cross-entropy, mean over all entries."""
    z, y = logits, targets
    loss_elem = np.maximum(z, 0.0) - z * y + np.log1p(np.exp(-np.abs(z)))
    return loss_elem.mean(), (z, y)


def bce_with_logits_backward(cache):
    z, y = cache
    p = 1.0 / (1.0 + np.exp(-z))
    return (p - y) / z.size


def sigmoid(x):
    return 1.0 / (1.0 + np.exp(-np.clip(x, -500, 500)))
