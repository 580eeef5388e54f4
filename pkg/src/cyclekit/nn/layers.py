"""Graph convolution and MLP readout with their backward passes."""

from __future__ import annotations

import numpy as np

from .lstm import sigmoid


def dropout_mask(rng, shape, rate):
    if rng is None or rate <= 0:
        return None
    keep = 1.0 - rate
    return (rng.random(shape) < keep) / keep


def gcn_forward(adj, x, weights, activation="relu", dropout=0.0, rng=None):
    """``X^{l+1} = act(A_hat drop(X^l) W^l)``; no activation after the last layer."""
    if x.shape[0] != adj.shape[0]:
        raise ValueError(f"feature rows {x.shape[0]} != cycle graph nodes {adj.shape[0]}")
    cache = []
    for i, w in enumerate(weights):
        if x.shape[1] != w.shape[0]:
            raise ValueError(f"layer {i}: input width {x.shape[1]} != weight rows {w.shape[0]}")
        mask = dropout_mask(rng, x.shape, dropout)
        a = x if mask is None else x * mask
        z = adj @ (a @ w)
        last = i == len(weights) - 1
        x = z if last or activation == "identity" else np.maximum(z, 0.0)
        cache.append((a, mask, z, last))
    return x, cache


def gcn_backward(adj, weights, cache, d_out, activation="relu"):
    """Returns (d_input, [dW per layer]). ``adj`` must be symmetric."""
    grads = [None] * len(weights)
    d = d_out
    for i in range(len(weights) - 1, -1, -1):
        a, mask, z, last = cache[i]
        if not last and activation != "identity":
            d = d * (z > 0)
        ad = adj.T @ d
        grads[i] = a.T @ ad
        d = ad @ weights[i].T
        if mask is not None:
            d = d * mask
    return d, grads


def mlp_forward(x, w0, b0, w1, b1):
    pre = x @ w0 + b0
    hid = np.maximum(pre, 0.0)
    p = sigmoid((hid @ w1 + b1)[:, 0])
    return p, (x, pre, hid)


def mlp_backward(cache, w0, w1, p, d_p):
    x, pre, hid = cache
    ds = (d_p * p * (1.0 - p))[:, None]
    g_w1 = hid.T @ ds
    g_b1 = ds.sum(axis=0)
    dh = (ds @ w1.T) * (pre > 0)
    g_w0 = x.T @ dh
    g_b0 = dh.sum(axis=0)
    return dh @ w0.T, (g_w0, g_b0, g_w1, g_b1)
