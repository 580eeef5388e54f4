"""The full cycle-basis model: encode cycles, propagate over cycle graphs,
score cycles, route to targets and mix the bases."""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
import scipy.sparse as sp

from .. import _kernels
from ..basis import BasisBundle
from ..cycle_graph import CycleGraph, cycle_graph
from .layers import gcn_backward, gcn_forward, mlp_backward, mlp_forward
from .lstm import lstm_backward, lstm_forward
from .params import ModelConfig, first_nonfinite, init_params, zeros_like
from .sequences import reverse_packed

EPS = 1e-7
CHUNK_TOKENS = 250_000


class NonFiniteError(FloatingPointError):
    pass


@dataclass(frozen=True, eq=False)
class BasisView:
    graph: CycleGraph
    adj: sp.csr_matrix       # normalised cycle-graph adjacency
    cycle_seq: np.ndarray    # row of the sequence table for every cycle
    target_ptr: np.ndarray   # CSR over targets -> covering cycles
    target_cycles: np.ndarray

    @property
    def num_cycles(self) -> int:
        return int(self.cycle_seq.size)


@dataclass(frozen=True, eq=False)
class Instance:
    """Everything the model needs about one working graph and its targets.

    Identical relation sequences are encoded once: ``tokens`` holds one row
    per distinct sequence and direction (row ``i * directions + d``), sorted
    by decreasing length so the recurrent pass can run packed.
    """

    tokens: np.ndarray
    lengths: np.ndarray
    directions: int
    chunks: tuple
    bases: tuple
    num_targets: int

    @property
    def num_sequences(self) -> int:
        return self.lengths.size // self.directions


class Prediction(NamedTuple):
    P: list
    Y: np.ndarray          # (k, n) per-basis target confidences
    Y_final: np.ndarray
    argmax: list           # covering cycle chosen per target, -1 if none
    weights: np.ndarray


def _target_rows(bundle: BasisBundle, target_edges: np.ndarray):
    inc = bundle.incidence
    lo, hi = inc.row_ptr[target_edges], inc.row_ptr[target_edges + 1]
    ptr = np.zeros(target_edges.size + 1, dtype=np.int64)
    np.cumsum(hi - lo, out=ptr[1:])
    seg = np.repeat(np.arange(target_edges.size), hi - lo)
    cols = inc.row_cycles[lo[seg] + np.arange(ptr[-1]) - ptr[seg]]
    return ptr, cols


def _chunks(lengths: np.ndarray, directions: int, budget: int) -> tuple:
    out, start, acc = [], 0, 0
    for i in range(0, lengths.size, directions):
        size = int(lengths[i]) * directions
        if acc and acc + size > budget:
            out.append((start, i))
            start, acc = i, 0
        acc += size
    if start < lengths.size:
        out.append((start, lengths.size))
    return tuple(out)


def prepare_instance(bundles: list[BasisBundle], target_edges, num_relations: int, m: int = 2,
                     directions: int = 2, chunk_tokens: int = CHUNK_TOKENS) -> Instance:
    target_edges = np.asarray(target_edges, dtype=np.int64)
    lens = [b.basis.cycle_length for b in bundles]
    all_len = np.concatenate(lens) if lens else np.zeros(0, np.int64)
    t_max = int(all_len.max(initial=0))
    padded = np.full((all_len.size, t_max), -1, dtype=np.int64)
    row = 0
    for b in bundles:
        s = b.basis
        n = len(s)
        pos = np.arange(s.tokens.size) - np.repeat(s.ptr[:-1], s.cycle_length)
        padded[row + np.repeat(np.arange(n), s.cycle_length), pos] = s.tokens
        row += n
    uniq, inverse = np.unique(padded, axis=0, return_inverse=True)
    inverse = inverse.ravel()
    u_len = (uniq >= 0).sum(axis=1)
    order = np.argsort(-u_len, kind="stable")
    rank = np.empty_like(order)
    rank[order] = np.arange(order.size)
    uniq, u_len = uniq[order], u_len[order]

    fwd = uniq
    tokens = np.zeros((uniq.shape[0] * directions, t_max), dtype=np.int64)
    tokens[0::directions] = np.where(fwd >= 0, fwd, 0)
    if directions == 2:
        ptr = np.zeros(u_len.size + 1, dtype=np.int64)
        np.cumsum(u_len, out=ptr[1:])
        rev = reverse_packed(ptr, fwd[fwd >= 0], num_relations)
        mask = np.arange(t_max)[None, :] < u_len[:, None]
        rev_pad = np.zeros_like(fwd)
        rev_pad[mask] = rev
        tokens[1::2] = rev_pad
    lengths = np.repeat(u_len, directions)

    views, row = [], 0
    for b in bundles:
        n = len(b.basis)
        cg = cycle_graph(b.incidence, m)
        t_ptr, t_cols = _target_rows(b, target_edges)
        views.append(BasisView(cg, cg.normalized_adjacency(), rank[inverse[row:row + n]], t_ptr, t_cols))
        row += n
    return Instance(tokens, lengths, directions, _chunks(lengths, directions, chunk_tokens),
                    tuple(views), int(target_edges.size))


def bce_loss(y, labels):
    """Mean binary cross-entropy on ``clip(y, EPS, 1 - EPS)`` and its gradient."""
    labels = np.asarray(labels, dtype=np.float64)
    n = max(y.size, 1)
    yc = np.clip(y, EPS, 1.0 - EPS)
    loss = -np.sum(labels * np.log(yc) + (1.0 - labels) * np.log1p(-yc)) / n
    inside = (y >= EPS) & (y <= 1.0 - EPS)
    grad = np.where(inside, (-labels / yc + (1.0 - labels) / (1.0 - yc)) / n, 0.0)
    return float(loss), grad


def route_max_gradient(argmax, d_y, num_cycles: int) -> np.ndarray:
    """Send each target's gradient to the cycle that won its max (none if uncovered)."""
    hit = argmax >= 0
    return np.bincount(argmax[hit], weights=d_y[hit], minlength=num_cycles)


def softmax(z):
    e = np.exp(z - z.max())
    return e / e.sum()


class CycleModel:
    def __init__(self, config: ModelConfig, params: dict | None = None, seed: int = 0):
        self.config = config
        self.seed = int(seed)
        self.params = init_params(config, seed) if params is None else params
        missing = set(init_params(config, 0)) - set(self.params)
        if missing:
            raise ValueError(f"parameters missing: {sorted(missing)}")

    # ------------------------------------------------------------ helpers
    def prepare(self, bundles: list[BasisBundle], target_edges, chunk_tokens: int = CHUNK_TOKENS) -> Instance:
        if len(bundles) != self.config.k:
            raise ValueError(f"model expects {self.config.k} bases, got {len(bundles)}")
        dirs = 2 if self.config.feature == "br-lstm" else 1
        return prepare_instance(bundles, target_edges, self.config.num_relations, self.config.m,
                                dirs, chunk_tokens)

    def _rng(self, train, epoch, stream, index):
        if not train or self.config.dropout <= 0:
            return None
        return np.random.default_rng([self.seed, epoch, stream, index])

    def _chunk_forward(self, inst, c, train, epoch, keep_cache):
        s, e = inst.chunks[c]
        lens = inst.lengths[s:e]
        tok = inst.tokens[s:e, :int(lens[0])]
        return lstm_forward(self.params, tok, lens, self.config.dropout,
                            self._rng(train, epoch, 0, c), keep_cache)

    def _fold(self, h, c, d):
        h = h.reshape(-1, d, h.shape[1]).sum(axis=1)
        c = c.reshape(-1, d, c.shape[1]).sum(axis=1)
        return np.concatenate([h, c], axis=1)

    def encode(self, inst: Instance, train=False, epoch=0, keep_cache=False):
        """Feature row per distinct sequence, plus per-chunk LSTM caches."""
        p = self.params
        if self.config.feature == "bow":
            tok = inst.tokens
            mask = np.arange(tok.shape[1])[None, :] < inst.lengths[:, None]
            emb = p["relation_embedding"][tok] * mask[..., None]
            return emb.sum(axis=1) / np.maximum(inst.lengths, 1)[:, None], None
        d = inst.directions
        feats, caches = [], []
        for c in range(len(inst.chunks)):
            h, cc, cache = self._chunk_forward(inst, c, train, epoch, keep_cache)
            feats.append(self._fold(h, cc, d))
            caches.append(cache if keep_cache else None)
        width = 2 * self.config.d_h
        f = np.concatenate(feats) if feats else np.zeros((0, width))
        return f, caches

    def _head(self, inst, view, b, feats, train, epoch):
        p, cfg = self.params, self.config
        x0 = feats[view.cycle_seq]
        if cfg.use_gcn:
            ws = [p[f"gcn.W{i}"] for i in range(len(cfg.gcn_dims))]
            x, gcache = gcn_forward(view.adj, x0, ws, cfg.gcn_activation, cfg.dropout,
                                    self._rng(train, epoch, 1, b))
        else:
            x, gcache = x0, None
        prob, mcache = mlp_forward(x, p["mlp.W0"], p["mlp.b0"], p["mlp.W1"], p["mlp.b1"])
        y, arg = _kernels.segment_max(view.target_ptr, view.target_cycles, prob)
        return prob, y, arg, (gcache, mcache)

    def forward(self, inst: Instance, train=False, epoch=0, keep_cache=False):
        feats, enc_cache = self.encode(inst, train, epoch, keep_cache)
        heads = [self._head(inst, v, b, feats, train, epoch) for b, v in enumerate(inst.bases)]
        P = [h[0] for h in heads]
        Y = np.stack([h[1] for h in heads]) if heads else np.zeros((0, inst.num_targets))
        w = softmax(self.params["basis_logits"])
        y_final = w @ Y
        self._check({"cycle features": feats, "cycle confidence": np.concatenate(P) if P else feats,
                     "target confidence": y_final})
        pred = Prediction(P, Y, y_final, [h[2] for h in heads], w)
        return pred, (feats, enc_cache, [h[3] for h in heads])

    def predict(self, inst: Instance) -> np.ndarray:
        return self.forward(inst)[0].Y_final

    @staticmethod
    def _check(tensors):
        bad = first_nonfinite(tensors)
        if bad is not None:
            raise NonFiniteError(f"non-finite values in {bad}")

    # ----------------------------------------------------------- backward
    def loss_and_grad(self, inst: Instance, labels, epoch: int = 0, train: bool = True):
        """Loss and gradients of every parameter, in one forward/backward sweep.

        With several LSTM chunks the forward pass keeps no recurrent cache; the
        backward pass recomputes each chunk (same dropout stream) just before
        differentiating through it, so peak memory stays one chunk wide.
        """
        cfg, p = self.config, self.params
        single = len(inst.chunks) <= 1
        pred, (feats, enc_cache, head_caches) = self.forward(inst, train, epoch, keep_cache=single)
        loss, d_y = bce_loss(pred.Y_final, labels)
        grads = zeros_like(p)

        w = pred.weights
        g = pred.Y @ d_y
        grads["basis_logits"] += w * (g - w @ g)

        d_feats = np.zeros_like(feats)
        for b, view in enumerate(inst.bases):
            gcache, mcache = head_caches[b]
            d_p = route_max_gradient(pred.argmax[b], w[b] * d_y, view.num_cycles)
            d_x, (gw0, gb0, gw1, gb1) = mlp_backward(mcache, p["mlp.W0"], p["mlp.W1"], pred.P[b], d_p)
            grads["mlp.W0"] += gw0
            grads["mlp.b0"] += gb0
            grads["mlp.W1"] += gw1
            grads["mlp.b1"] += gb1
            if cfg.use_gcn:
                ws = [p[f"gcn.W{i}"] for i in range(len(cfg.gcn_dims))]
                d_x, gws = gcn_backward(view.adj, ws, gcache, d_x, cfg.gcn_activation)
                for i, gw in enumerate(gws):
                    grads[f"gcn.W{i}"] += gw
            np.add.at(d_feats, view.cycle_seq, d_x)

        self._encode_backward(inst, d_feats, enc_cache, grads, train, epoch)
        self._check(grads)
        return loss, grads, pred

    def _encode_backward(self, inst, d_feats, enc_cache, grads, train, epoch):
        if self.config.feature == "bow":
            tok = inst.tokens
            mask = np.arange(tok.shape[1])[None, :] < inst.lengths[:, None]
            scale = (d_feats / np.maximum(inst.lengths, 1)[:, None])
            rows = np.broadcast_to(np.arange(tok.shape[0])[:, None], tok.shape)[mask]
            np.add.at(grads["relation_embedding"], tok[mask], scale[rows])
            return
        d, H = inst.directions, self.config.d_h
        for c, (s, e) in enumerate(inst.chunks):
            cache = enc_cache[c]
            if cache is None:
                cache = self._chunk_forward(inst, c, train, epoch, True)[2]
            df = d_feats[s // d:e // d]
            d_h = np.repeat(df[:, :H], d, axis=0)
            d_c = np.repeat(df[:, H:], d, axis=0)
            tok = inst.tokens[s:e, :int(inst.lengths[s])]
            lstm_backward(self.params, cache, tok, d_h, d_c, grads)
