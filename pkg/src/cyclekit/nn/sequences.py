"""Turning cycles into pairs of relation-token sequences."""

from __future__ import annotations

from typing import NamedTuple

import numpy as np

from ..basis import SptCycleBasis
from ..kg import KnowledgeGraph, inverse_id
from ..z2 import Z2Chain


class MalformedCycleError(ValueError):
    pass


class RelationSequence(NamedTuple):
    tokens: np.ndarray  # extended relation ids; r + R marks an inverse step
    start_edge: int


def reverse_tokens(tokens: np.ndarray, num_relations: int) -> np.ndarray:
    """The same closed walk traversed the other way round, from the same edge.

    The start edge is read backwards and the remaining steps come in reverse
    order, each inverted.
    """
    tokens = np.asarray(tokens)
    out = np.empty_like(tokens)
    out[0] = inverse_id(tokens[0], num_relations)
    out[1:] = inverse_id(tokens[:0:-1], num_relations)
    return out


def cycle_sequences(cycle: Z2Chain, basis: SptCycleBasis, kg: KnowledgeGraph
                    ) -> tuple[RelationSequence, RelationSequence]:
    """Orient an elementary cycle into two opposite relation sequences.

    The walk starts on the cycle's unique non-tree edge ``(u, r, v)``: the
    first sequence leaves ``u`` along it (token ``r``), the second leaves
    ``v`` (token ``r^-1``).
    """
    edges = cycle.edges()
    hits = np.flatnonzero(np.isin(basis.nontree_edge, edges))
    if hits.size != 1:
        raise MalformedCycleError(f"cycle holds {hits.size} non-tree edges of the basis")
    start = int(basis.nontree_edge[hits[0]])

    incident: dict[int, list[int]] = {}
    for e in edges.tolist():
        for x in (int(kg.heads[e]), int(kg.tails[e])):
            incident.setdefault(x, []).append(e)
    if any(len(v) != 2 for v in incident.values()):
        raise MalformedCycleError("cycle is not a single closed walk")

    R = kg.num_relations
    u, v = int(kg.heads[start]), int(kg.tails[start])
    tokens = [int(kg.relations[start])]
    used = {start}
    here = v
    while here != u:
        nxt = [e for e in incident[here] if e not in used]
        if len(nxt) != 1:
            raise MalformedCycleError("cycle is not a single closed walk")
        e = nxt[0]
        used.add(e)
        h, t, r = int(kg.heads[e]), int(kg.tails[e]), int(kg.relations[e])
        if h == here:
            tokens.append(r)
            here = t
        else:
            tokens.append(r + R)
            here = h
    if len(used) != edges.size:
        raise MalformedCycleError("cycle edges form more than one loop")
    fwd = np.array(tokens, dtype=np.int64)
    return RelationSequence(fwd, start), RelationSequence(reverse_tokens(fwd, R), start)


def basis_sequences(basis: SptCycleBasis, num_relations: int, j: int
                    ) -> tuple[RelationSequence, RelationSequence]:
    """Fast path for basis cycles, whose walk order is stored already."""
    fwd = basis.cycle_tokens(j)
    e = int(basis.nontree_edge[j])
    return RelationSequence(fwd.copy(), e), RelationSequence(reverse_tokens(fwd, num_relations), e)


def reverse_packed(ptr: np.ndarray, tokens: np.ndarray, num_relations: int) -> np.ndarray:
    """``reverse_tokens`` applied to every segment of a CSR token array."""
    lengths = np.diff(ptr)
    seg = np.repeat(np.arange(lengths.size), lengths)
    pos = np.arange(tokens.size) - ptr[seg]
    # position 0 stays in place; position p >= 1 reads from len - p
    src = np.where(pos == 0, ptr[seg], ptr[seg] + lengths[seg] - pos)
    return inverse_id(tokens[src], num_relations)
