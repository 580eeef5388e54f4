"""Chains, boundaries and linear algebra over the two-element field.

Chains are bit-packed into ``uint64`` words so that addition is a word-wise
XOR. Elimination keeps, for every pivot row, the set of input chains it was
built from, which is what lets :func:`solve_in_span` return coefficients.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from . import _kernels
from .kg import KnowledgeGraph


class DimensionError(ValueError):
    pass


def _n_words(universe: int) -> int:
    return max(1, (universe + 63) // 64)


def pack_bits(indices, universe: int) -> np.ndarray:
    words = np.zeros(_n_words(universe), dtype=np.uint64)
    idx = np.asarray(indices, dtype=np.int64)
    if idx.size:
        if idx.min() < 0 or idx.max() >= universe:
            raise DimensionError(f"bit index outside universe of size {universe}")
        # XOR accumulates repeated indices mod 2
        np.bitwise_xor.at(words, idx // 64, np.left_shift(np.uint64(1), (idx % 64).astype(np.uint64)))
    return words


def unpack_bits(words: np.ndarray, universe: int) -> np.ndarray:
    """0/1 vector of length ``universe``."""
    return np.unpackbits(words.view(np.uint8), bitorder="little")[:universe]


class Z2Chain:
    """A set of edges as a fixed-universe bit vector."""

    __slots__ = ("bits", "universe")

    def __init__(self, bits: np.ndarray, universe: int):
        bits = np.asarray(bits, dtype=np.uint64)
        if bits.shape != (_n_words(universe),):
            raise DimensionError("word count does not match universe")
        if universe % 64 and universe:
            spill = bits[-1] >> np.uint64(universe % 64)
            if spill:
                raise DimensionError("bits set beyond the universe")
        self.bits = bits
        self.universe = int(universe)

    @classmethod
    def from_edges(cls, edges: Iterable[int], universe: int) -> "Z2Chain":
        return cls(pack_bits(list(edges), universe), universe)

    @classmethod
    def empty(cls, universe: int) -> "Z2Chain":
        return cls(np.zeros(_n_words(universe), dtype=np.uint64), universe)

    def edges(self) -> np.ndarray:
        return np.flatnonzero(unpack_bits(self.bits, self.universe))

    def __len__(self) -> int:
        return int(np.unpackbits(self.bits.view(np.uint8)).sum())

    def __bool__(self) -> bool:
        return bool(self.bits.any())

    def __add__(self, other: "Z2Chain") -> "Z2Chain":
        return chain_add(self, other)

    def __eq__(self, other) -> bool:
        return (isinstance(other, Z2Chain) and self.universe == other.universe
                and bool(np.array_equal(self.bits, other.bits)))

    def __hash__(self):
        return hash((self.universe, self.bits.tobytes()))

    def __repr__(self):
        return f"Z2Chain({self.edges().tolist()}, universe={self.universe})"


def chain_add(a: Z2Chain, b: Z2Chain) -> Z2Chain:
    if a.universe != b.universe:
        raise DimensionError(f"universe mismatch: {a.universe} vs {b.universe}")
    return Z2Chain(a.bits ^ b.bits, a.universe)


@dataclass(frozen=True)
class BoundaryMatrix:
    """|V| x |E| incidence matrix stored column-wise as endpoint pairs."""

    rows: int
    cols: int
    endpoints: np.ndarray  # (|E|, 2)

    def dense(self) -> np.ndarray:
        m = np.zeros((self.rows, self.cols), dtype=np.uint8)
        e = np.arange(self.cols)
        m[self.endpoints[:, 0], e] = 1
        m[self.endpoints[:, 1], e] = 1
        return m


def boundary_matrix(kg: KnowledgeGraph) -> BoundaryMatrix:
    ends = np.stack([kg.heads, kg.tails], axis=1)
    return BoundaryMatrix(kg.num_entities, kg.num_edges, ends)


def apply_boundary(m: BoundaryMatrix, c: Z2Chain) -> np.ndarray:
    """Mod-2 product ``m @ c`` as a boolean vertex vector."""
    if c.universe != m.cols:
        raise DimensionError(f"chain universe {c.universe} != boundary columns {m.cols}")
    e = c.edges()
    counts = np.bincount(m.endpoints[e].ravel(), minlength=m.rows)
    return (counts & 1).astype(bool)


def is_cycle(m: BoundaryMatrix, c: Z2Chain) -> bool:
    return not apply_boundary(m, c).any()


def betti_number(kg: KnowledgeGraph) -> int:
    """Dimension of the cycle space: |E| - |V| + #components."""
    n_comp, _ = kg.components
    return kg.num_edges - kg.num_entities + n_comp


def _stack(chains: Sequence[Z2Chain], universe: int | None = None) -> np.ndarray:
    if universe is None:
        universe = chains[0].universe if chains else 0
    for c in chains:
        if c.universe != universe:
            raise DimensionError("chains do not share a universe")
    if not chains:
        return np.zeros((0, _n_words(universe)), dtype=np.uint64)
    return np.ascontiguousarray(np.stack([c.bits for c in chains]))


class Z2Span:
    """Row-echelon form of a list of chains, with the combination record."""

    def __init__(self, chains: Sequence[Z2Chain], universe: int | None = None):
        rows = _stack(chains, universe)
        self.universe = chains[0].universe if chains else (universe or 0)
        self.size = len(chains)
        (self.rank, self._piv_rows, self._piv_comb,
         self._col_to_piv) = _kernels.z2_eliminate(rows)
        self.rank = int(self.rank)

    def solve(self, target: Z2Chain) -> np.ndarray | None:
        if target.universe != self.universe:
            raise DimensionError("target universe differs from the basis")
        if self.rank == 0:
            return np.zeros(self.size, dtype=np.uint8) if not target else None
        ok, comb = _kernels.z2_reduce(self._piv_rows, self._piv_comb, self._col_to_piv,
                                      target.bits)
        if not ok:
            return None
        return unpack_bits(comb, self.size).copy()


def z2_rank(chains: Sequence[Z2Chain]) -> int:
    return Z2Span(chains).rank


def solve_in_span(basis: Sequence[Z2Chain], target: Z2Chain) -> np.ndarray | None:
    """Coefficients ``alpha`` with ``sum(alpha_i * basis_i) == target``, or None."""
    return Z2Span(basis, target.universe).solve(target)


def combine(basis: Sequence[Z2Chain], alpha) -> Z2Chain:
    if not basis:
        raise ValueError("empty basis")
    out = np.zeros_like(basis[0].bits)
    for c, a in zip(basis, alpha):
        if a:
            out ^= c.bits
    return Z2Chain(out, basis[0].universe)
