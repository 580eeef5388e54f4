"""Stacked LSTM over packed relation sequences, forward and backward by hand.

Sequences are sorted by decreasing length, so the rows still running at step
``t`` are always a prefix ``[:n_t]`` and no masking is needed. Gate order in
the fused weight matrices is input, forget, cell, output.
"""

from __future__ import annotations

import numpy as np


def sigmoid(x):
    # split by sign so exp never overflows
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def num_layers(params) -> int:
    n = 0
    while f"lstm.l{n}.W" in params:
        n += 1
    return n


def active_counts(lengths: np.ndarray) -> np.ndarray:
    """``n_t`` = number of sequences longer than ``t``; needs descending lengths."""
    t_max = int(lengths[0]) if lengths.size else 0
    return np.searchsorted(-lengths, -np.arange(t_max), side="left").astype(np.int64)


def _step(x, h_prev, c_prev, W, U, b, H):
    z = x @ W + h_prev @ U + b
    gates = np.empty_like(z)
    gates[:, :2 * H] = sigmoid(z[:, :2 * H])
    gates[:, 2 * H:3 * H] = np.tanh(z[:, 2 * H:3 * H])
    gates[:, 3 * H:] = sigmoid(z[:, 3 * H:])
    i, f, g, o = gates[:, :H], gates[:, H:2 * H], gates[:, 2 * H:3 * H], gates[:, 3 * H:]
    c = f * c_prev + i * g
    tc = np.tanh(c)
    return o * tc, c, gates, tc


def lstm_forward(params, tokens, lengths, dropout=0.0, rng=None, keep_cache=False):
    """Final ``(h, c)`` of the top layer for every packed sequence.

    ``tokens`` is ``(n, T)`` padded, rows sorted by decreasing ``lengths``.
    Dropout (when ``rng`` is given) hits the outputs passed between layers.
    """
    emb = params["relation_embedding"]
    L = num_layers(params)
    H = params["lstm.l0.U"].shape[0]
    n = tokens.shape[0]
    hs = [np.zeros((n, H)) for _ in range(L)]
    cs = [np.zeros((n, H)) for _ in range(L)]
    nt = active_counts(lengths)
    cache = [] if keep_cache else None
    keep = 1.0 - dropout
    for t in range(nt.size):
        m = int(nt[t])
        x = emb[tokens[:m, t]]
        step_cache = []
        for layer in range(L):
            W, U, b = (params[f"lstm.l{layer}.{k}"] for k in "WUb")
            h_prev, c_prev = hs[layer][:m], cs[layer][:m]
            h, c, gates, tc = _step(x, h_prev, c_prev, W, U, b, H)
            mask = None
            if layer < L - 1 and rng is not None and dropout > 0:
                mask = (rng.random(h.shape) < keep) / keep
            if keep_cache:
                step_cache.append((x, h_prev.copy(), c_prev.copy(), gates, tc, mask))
            hs[layer][:m] = h
            cs[layer][:m] = c
            x = h if mask is None else h * mask
        if keep_cache:
            cache.append(step_cache)
    return hs[-1], cs[-1], (cache, nt)


def lstm_backward(params, cache, tokens, d_h, d_c, grads):
    """Accumulate parameter gradients into ``grads`` given d(final h, c)."""
    steps, nt = cache
    L = num_layers(params)
    H = params["lstm.l0.U"].shape[0]
    n = d_h.shape[0]
    dh = [np.zeros((n, H)) for _ in range(L)]
    dc = [np.zeros((n, H)) for _ in range(L)]
    dh[-1] += d_h
    dc[-1] += d_c
    g_emb = grads["relation_embedding"]
    for t in range(nt.size - 1, -1, -1):
        m = int(nt[t])
        d_in = None
        for layer in range(L - 1, -1, -1):
            x, h_prev, c_prev, gates, tc, mask = steps[t][layer]
            W, U = params[f"lstm.l{layer}.W"], params[f"lstm.l{layer}.U"]
            i, f, g, o = gates[:, :H], gates[:, H:2 * H], gates[:, 2 * H:3 * H], gates[:, 3 * H:]
            dh_t = dh[layer][:m]
            if d_in is not None:
                dh_t = dh_t + (d_in * mask if mask is not None else d_in)
            dc_t = dc[layer][:m] + dh_t * o * (1.0 - tc * tc)
            dz = np.empty_like(gates)
            dz[:, :H] = dc_t * g * i * (1.0 - i)
            dz[:, H:2 * H] = dc_t * c_prev * f * (1.0 - f)
            dz[:, 2 * H:3 * H] = dc_t * i * (1.0 - g * g)
            dz[:, 3 * H:] = dh_t * tc * o * (1.0 - o)
            grads[f"lstm.l{layer}.W"] += x.T @ dz
            grads[f"lstm.l{layer}.U"] += h_prev.T @ dz
            grads[f"lstm.l{layer}.b"] += dz.sum(axis=0)
            dh[layer][:m] = dz @ U.T
            dc[layer][:m] = dc_t * f
            d_in = dz @ W.T
        np.add.at(g_emb, tokens[:m, t], d_in)
