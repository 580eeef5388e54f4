"""Knowledge-graph storage, dataset IO, inverse relations and negative sampling."""

from __future__ import annotations

import hashlib
import json
import logging
import os
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, NamedTuple

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components as _cc

logger = logging.getLogger(__name__)


class DatasetError(ValueError):
    """Malformed dataset file or inconsistent vocabulary."""


class UnknownRelationError(DatasetError):
    pass


class SamplingExhaustedError(RuntimeError):
    pass


class Triplet(NamedTuple):
    head: int
    relation: int
    tail: int
    edge_id: int


def _frozen(a, dtype=np.int64):
    a = np.ascontiguousarray(a, dtype=dtype)
    a.setflags(write=False)
    return a


def inverse_id(relation, num_relations):
    """Map a relation id to its inverse and back (offset ``num_relations``)."""
    relation = np.asarray(relation)
    out = np.where(relation < num_relations, relation + num_relations,
                   relation - num_relations)
    return out if out.ndim else int(out)


@dataclass(frozen=True, eq=False)
class KnowledgeGraph:
    """Undirected multigraph of relational triplets.

    Edge ``i`` is ``(heads[i], relations[i], tails[i])``; edge ids are the
    array positions, so they are dense and start at zero.
    """

    heads: np.ndarray
    relations: np.ndarray
    tails: np.ndarray
    num_entities: int
    relation_vocab: dict = field(default_factory=dict)
    entity_vocab: dict | None = None

    def __post_init__(self):
        for name in ("heads", "relations", "tails"):
            object.__setattr__(self, name, _frozen(getattr(self, name)))
        if not (self.heads.shape == self.relations.shape == self.tails.shape):
            raise ValueError("heads, relations and tails must have equal length")
        if self.heads.size:
            if min(self.heads.min(), self.tails.min()) < 0 or \
                    max(self.heads.max(), self.tails.max()) >= self.num_entities:
                raise ValueError("entity id out of range")
            if (self.heads == self.tails).any():
                raise ValueError("self-loops are not supported")

    @property
    def num_edges(self) -> int:
        return int(self.heads.size)

    @property
    def num_relations(self) -> int:
        return len(self.relation_vocab)

    @property
    def triplets(self) -> list[Triplet]:
        return [Triplet(int(h), int(r), int(t), i)
                for i, (h, r, t) in enumerate(zip(self.heads, self.relations, self.tails))]

    def triplet_array(self) -> np.ndarray:
        return np.stack([self.heads, self.relations, self.tails], axis=1)

    @cached_property
    def extended_triplets(self) -> np.ndarray:
        return extend_with_inverses(self)

    @cached_property
    def edge_index(self) -> dict:
        """(head, relation, tail) -> edge id."""
        return {(int(h), int(r), int(t)): i
                for i, (h, r, t) in enumerate(zip(self.heads, self.relations, self.tails))}

    @cached_property
    def adjacency(self):
        """CSR incidence lists ``(indptr, edge_ids, neighbours)``.

        Each edge is listed once per endpoint; within a vertex the edges are in
        ascending edge-id order.
        """
        n_e = self.num_edges
        ends = np.concatenate([self.heads, self.tails])
        other = np.concatenate([self.tails, self.heads])
        eid = np.concatenate([np.arange(n_e), np.arange(n_e)])
        order = np.lexsort((eid, ends))
        indptr = np.zeros(self.num_entities + 1, dtype=np.int64)
        np.cumsum(np.bincount(ends, minlength=self.num_entities), out=indptr[1:])
        return _frozen(indptr), _frozen(eid[order]), _frozen(other[order])

    def degree(self) -> np.ndarray:
        indptr = self.adjacency[0]
        return np.diff(indptr)

    @cached_property
    def vertex_order(self) -> np.ndarray:
        """Vertices by first appearance in edge order; isolated ones last.

        Anything that must not depend on how entities happen to be numbered
        iterates vertices in this order instead of by id.
        """
        seq = np.empty(2 * self.num_edges, dtype=np.int64)
        seq[0::2] = self.heads
        seq[1::2] = self.tails
        _, first = np.unique(seq, return_index=True)
        seen = seq[np.sort(first)]
        isolated = np.setdiff1d(np.arange(self.num_entities), seen)
        return _frozen(np.concatenate([seen, isolated]))

    @cached_property
    def components(self):
        """``(count, labels)`` with labels numbered in ``vertex_order``."""
        n = self.num_entities
        if n == 0:
            return 0, _frozen(np.zeros(0, dtype=np.int64))
        adj = sp.coo_matrix((np.ones(self.num_edges), (self.heads, self.tails)), shape=(n, n))
        count, raw = _cc(adj, directed=False)
        ranked = raw[self.vertex_order]
        _, first = np.unique(ranked, return_index=True)
        relabel = np.empty(count, dtype=np.int64)
        relabel[ranked[np.sort(first)]] = np.arange(count)
        return int(count), _frozen(relabel[raw])

    def entity_names(self) -> list[str]:
        if self.entity_vocab is None:
            return [str(i) for i in range(self.num_entities)]
        names = [""] * self.num_entities
        for name, i in self.entity_vocab.items():
            names[i] = name
        return names

    def relation_names(self) -> list[str]:
        names = [""] * self.num_relations
        for name, i in self.relation_vocab.items():
            names[i] = name
        return names

    def relabel_entities(self, perm: np.ndarray) -> "KnowledgeGraph":
        """Rename entity ``i`` to ``perm[i]``; edge order is kept."""
        perm = np.asarray(perm, dtype=np.int64)
        vocab = None
        if self.entity_vocab is not None:
            vocab = {k: int(perm[v]) for k, v in self.entity_vocab.items()}
        return KnowledgeGraph(perm[self.heads], self.relations, perm[self.tails],
                              self.num_entities, self.relation_vocab, vocab)


def extend_with_inverses(kg: KnowledgeGraph) -> np.ndarray:
    """E' as an ``(2|E|, 4)`` array of ``(head, relation, tail, edge_id)``.

    Row ``i`` is edge ``i``; row ``|E| + i`` is its inverse ``(t, r + R, h)``,
    which shares edge id ``i``.
    """
    n = kg.num_edges
    eid = np.arange(n)
    fwd = np.stack([kg.heads, kg.relations, kg.tails, eid], axis=1)
    inv = np.stack([kg.tails, kg.relations + kg.num_relations, kg.heads, eid], axis=1)
    return _frozen(np.concatenate([fwd, inv]).reshape(2 * n, 4))


# --------------------------------------------------------------------- IO

def _read_triplets(path: str) -> list[tuple[str, str, str]]:
    rows = []
    if not os.path.exists(path):
        raise FileNotFoundError(path)
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\r\n")
            if not line.strip():
                continue
            parts = line.split("\t")
            if len(parts) != 3 or not all(p.strip() for p in parts):
                raise DatasetError(f"{path}:{lineno}: expected 'head<TAB>relation<TAB>tail', got {line!r}")
            rows.append(tuple(p.strip() for p in parts))
    return rows


def build_graph(rows: Iterable[tuple[str, str, str]], relation_vocab: dict | None = None,
                source: str = "<memory>") -> KnowledgeGraph:
    """Index string triplets. Grows ``relation_vocab`` only when it is None."""
    fixed = relation_vocab is not None
    rel_vocab = dict(relation_vocab) if fixed else {}
    ent_vocab: dict[str, int] = {}
    heads, rels, tails = [], [], []
    seen = set()
    n_loops = n_dups = 0
    for h, r, t in rows:
        if h == t:
            n_loops += 1
            continue
        if r not in rel_vocab:
            if fixed:
                raise UnknownRelationError(f"{source}: relation {r!r} does not occur in the training split")
            rel_vocab[r] = len(rel_vocab)
        hi = ent_vocab.setdefault(h, len(ent_vocab))
        ti = ent_vocab.setdefault(t, len(ent_vocab))
        key = (hi, rel_vocab[r], ti)
        if key in seen:
            n_dups += 1
            continue
        seen.add(key)
        heads.append(hi)
        rels.append(rel_vocab[r])
        tails.append(ti)
    if n_loops:
        logger.warning("%s: dropped %d self-loop triplet(s)", source, n_loops)
    if n_dups:
        logger.warning("%s: dropped %d duplicate triplet(s)", source, n_dups)
    return KnowledgeGraph(np.array(heads, dtype=np.int64), np.array(rels, dtype=np.int64),
                          np.array(tails, dtype=np.int64), len(ent_vocab), rel_vocab, ent_vocab)


def load_dataset(path: str, splits=("train", "test")) -> dict[str, KnowledgeGraph]:
    """Read ``<split>.txt`` files. Entities are split-local; relations come from train."""
    graphs: dict[str, KnowledgeGraph] = {}
    train_file = os.path.join(path, f"{splits[0]}.txt")
    graphs[splits[0]] = build_graph(_read_triplets(train_file), source=train_file)
    vocab = graphs[splits[0]].relation_vocab
    for split in splits[1:]:
        fname = os.path.join(path, f"{split}.txt")
        graphs[split] = build_graph(_read_triplets(fname), vocab, source=fname)
    return graphs


def write_triplets(kg: KnowledgeGraph, path: str) -> None:
    ents, rels = kg.entity_names(), kg.relation_names()
    with open(path, "w", encoding="utf-8") as fh:
        for h, r, t in zip(kg.heads, kg.relations, kg.tails):
            fh.write(f"{ents[h]}\t{rels[r]}\t{ents[t]}\n")


def dataset_hash(path: str, splits=("train", "test")) -> str:
    digest = hashlib.sha256()
    for split in splits:
        fname = os.path.join(path, f"{split}.txt")
        if os.path.exists(fname):
            with open(fname, "rb") as fh:
                digest.update(split.encode() + b"\0" + fh.read())
    return digest.hexdigest()[:16]


# ---------------------------------------------------------------- targets

@dataclass(frozen=True, eq=False)
class TargetSet:
    """Scored triplets with labels.

    Positives come first. With ``ratio`` set, negative ``j`` of positive ``i``
    sits at ``num_pos + i * ratio + j``.
    """

    triplets: np.ndarray  # (n, 3) head, relation, tail
    labels: np.ndarray
    seed: int | None = None
    ratio: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "triplets", _frozen(np.asarray(self.triplets).reshape(-1, 3)))
        object.__setattr__(self, "labels", _frozen(self.labels, np.int64))
        if len(self.triplets) != len(self.labels):
            raise ValueError("labels and triplets differ in length")

    def __len__(self):
        return len(self.labels)

    @property
    def num_pos(self) -> int:
        return int(self.labels.sum())

    @property
    def num_neg(self) -> int:
        return len(self) - self.num_pos

    def relabel_entities(self, perm) -> "TargetSet":
        perm = np.asarray(perm)
        t = self.triplets.copy()
        t[:, 0] = perm[t[:, 0]]
        t[:, 2] = perm[t[:, 2]]
        return TargetSet(t, self.labels, self.seed, self.ratio)

    def to_jsonl(self, path: str, kg: KnowledgeGraph | None = None) -> None:
        ents = kg.entity_names() if kg is not None else None
        rels = None
        if kg is not None:
            base = kg.relation_names()
            rels = base + [n + "_inv" for n in base]
        with open(path, "w", encoding="utf-8") as fh:
            for (h, r, t), y in zip(self.triplets.tolist(), self.labels.tolist()):
                rec = {"head": ents[h] if ents else h,
                       "relation": rels[r] if rels else r,
                       "tail": ents[t] if ents else t,
                       "label": y}
                fh.write(json.dumps(rec) + "\n")


def positives_of(kg: KnowledgeGraph) -> np.ndarray:
    return kg.triplet_array()


def sample_negatives(kg: KnowledgeGraph, positives, ratio: int = 1, seed: int = 0) -> TargetSet:
    """Corrupt head or tail (fair coin) of each positive with a uniform entity.

    A corruption is redrawn while it is an existing edge, a self-loop or a
    repeat of an earlier target; each negative gets ``10 * |V|`` draws.
    """
    if ratio < 1:
        raise ValueError("ratio must be >= 1")
    pos = np.asarray(positives, dtype=np.int64)
    pos = pos.reshape(-1, pos.shape[-1] if pos.ndim == 2 else 3)[:, :3]
    rng = np.random.default_rng(seed)
    n_ent = kg.num_entities
    existing = kg.edge_index
    taken = {tuple(p) for p in pos.tolist()}
    budget = 10 * n_ent
    negs = np.empty((len(pos) * ratio, 3), dtype=np.int64)
    k = 0
    for h, r, t in pos.tolist():
        for _ in range(ratio):
            for _attempt in range(budget):
                if rng.random() < 0.5:
                    cand = (int(rng.integers(n_ent)), r, t)
                else:
                    cand = (h, r, int(rng.integers(n_ent)))
                if cand[0] != cand[2] and cand not in existing and cand not in taken:
                    break
            else:
                raise SamplingExhaustedError(
                    f"no valid corruption of {(h, r, t)} after {budget} draws")
            taken.add(cand)
            negs[k] = cand
            k += 1
    triplets = np.concatenate([pos, negs])
    labels = np.concatenate([np.ones(len(pos), np.int64), np.zeros(len(negs), np.int64)])
    return TargetSet(triplets, labels, seed, ratio)


class WorkingGraph(NamedTuple):
    graph: KnowledgeGraph
    target_edges: np.ndarray  # edge id of every target, in target order


def add_targets_to_graph(kg: KnowledgeGraph, targets: TargetSet) -> WorkingGraph:
    """Graph plus every target not already an edge; returns target edge ids."""
    index = kg.edge_index
    extra = []
    ids = np.empty(len(targets), dtype=np.int64)
    for i, trip in enumerate(targets.triplets.tolist()):
        key = tuple(trip)
        eid = index.get(key)
        if eid is None:
            eid = kg.num_edges + len(extra)
            extra.append(key)
        ids[i] = eid
    if not extra:
        return WorkingGraph(kg, _frozen(ids))
    extra = np.asarray(extra, dtype=np.int64)
    g = KnowledgeGraph(np.concatenate([kg.heads, extra[:, 0]]),
                       np.concatenate([kg.relations, extra[:, 1]]),
                       np.concatenate([kg.tails, extra[:, 2]]),
                       kg.num_entities, kg.relation_vocab, kg.entity_vocab)
    return WorkingGraph(g, _frozen(ids))
