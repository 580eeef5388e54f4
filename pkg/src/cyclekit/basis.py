"""Shortest-path-tree cycle bases and their cycle incidence matrices."""

from __future__ import annotations

import json
import logging
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from . import _kernels
from ._io import save_npz
from .kg import KnowledgeGraph
from .spectral import random_roots, spectral_roots
from .z2 import Z2Chain, Z2Span, boundary_matrix, is_cycle

logger = logging.getLogger(__name__)

CACHE_VERSION = 1


class BasisError(RuntimeError):
    pass


def worker_count() -> int:
    try:
        n = int(os.environ.get("CYCLEKIT_THREADS", "0"))
    except ValueError:
        n = 0
    return n if n > 0 else (os.cpu_count() or 1)


@dataclass(frozen=True, eq=False)
class SptTree:
    """BFS forest: one shortest-path tree per component that holds a root.

    ``parent``, ``parent_edge`` and ``depth`` are -1 at roots (depth 0 there)
    and at vertices no root reaches.
    """

    roots: np.ndarray
    parent: np.ndarray
    parent_edge: np.ndarray
    depth: np.ndarray

    @property
    def root(self) -> int:
        return int(self.roots[0])

    def spans(self) -> np.ndarray:
        return self.depth >= 0

    def tree_edges(self) -> np.ndarray:
        pe = self.parent_edge
        return np.sort(pe[pe >= 0])


def build_spt(kg: KnowledgeGraph, root) -> SptTree:
    """BFS from ``root`` (an int, or one root per component).

    FIFO frontier, incident edges scanned by ascending edge id, so with
    parallel edges the lowest id becomes the tree edge.
    """
    roots = np.atleast_1d(np.asarray(root, dtype=np.int64))
    if roots.size and (roots.min() < 0 or roots.max() >= kg.num_entities):
        raise ValueError("root is not a vertex of the graph")
    indptr, adj_edge, adj_nbr = kg.adjacency
    parent, pe, depth = _kernels.bfs_forest(indptr, adj_edge, adj_nbr, kg.num_entities, roots)
    return SptTree(roots, parent, pe, depth)


def lca(tree: SptTree, u: int, v: int) -> int:
    d, par = tree.depth, tree.parent
    if d[u] < 0 or d[v] < 0:
        raise BasisError("vertex not covered by the tree")
    while d[u] > d[v]:
        u = par[u]
    while d[v] > d[u]:
        v = par[v]
    while u != v:
        if par[u] < 0:
            raise BasisError("vertices lie in different components")
        u, v = par[u], par[v]
    return int(u)


@dataclass(frozen=True, eq=False)
class SptCycleBasis:
    """Elementary cycles of one tree, each listed as a closed walk.

    Cycle ``j`` occupies ``edges[ptr[j]:ptr[j+1]]``. The walk starts at the
    non-tree edge ``(u, r, v)`` going u -> v, climbs the tree from v to the
    common ancestor and comes back down to u. ``tokens`` holds the relation
    id of each step, offset by ``num_relations`` when the step runs against
    the triplet direction.
    """

    tree: SptTree
    ptr: np.ndarray
    edges: np.ndarray
    tokens: np.ndarray
    nontree_edge: np.ndarray
    num_edges: int

    def __len__(self) -> int:
        return int(self.nontree_edge.size)

    @property
    def cycle_length(self) -> np.ndarray:
        return np.diff(self.ptr)

    def cycle_edges(self, j: int) -> np.ndarray:
        return self.edges[self.ptr[j]:self.ptr[j + 1]]

    def cycle_tokens(self, j: int) -> np.ndarray:
        return self.tokens[self.ptr[j]:self.ptr[j + 1]]

    def chain(self, j: int) -> Z2Chain:
        return Z2Chain.from_edges(self.cycle_edges(j), self.num_edges)

    @property
    def cycles(self) -> list[Z2Chain]:
        return [self.chain(j) for j in range(len(self))]


def nontree_edges(kg: KnowledgeGraph, tree: SptTree) -> np.ndarray:
    covered = (tree.depth[kg.heads] >= 0) & (tree.depth[kg.tails] >= 0)
    is_tree = np.zeros(kg.num_edges, dtype=bool)
    is_tree[tree.tree_edges()] = True
    return np.flatnonzero(covered & ~is_tree)


def spt_cycle_basis(kg: KnowledgeGraph, tree: SptTree) -> SptCycleBasis:
    nt = nontree_edges(kg, tree)
    ptr, edges, tokens = _kernels.spt_cycles(
        kg.heads, kg.tails, kg.relations, kg.num_relations,
        tree.parent, tree.parent_edge, tree.depth, nt)
    return SptCycleBasis(tree, ptr, edges, tokens, nt, kg.num_edges)


@dataclass(frozen=True, eq=False)
class IncidenceMatrix:
    """Sparse |E| x beta 0/1 matrix; entry (i, j) is set iff cycle j uses edge i."""

    rows: int
    cols: int
    col_ptr: np.ndarray
    col_edges: np.ndarray  # sorted within each column
    row_ptr: np.ndarray
    row_cycles: np.ndarray  # sorted within each row

    def column(self, j: int) -> np.ndarray:
        return self.col_edges[self.col_ptr[j]:self.col_ptr[j + 1]]

    def row(self, i: int) -> np.ndarray:
        return self.row_cycles[self.row_ptr[i]:self.row_ptr[i + 1]]

    def to_scipy(self) -> sp.csr_matrix:
        return sp.csr_matrix((np.ones(self.row_cycles.size, dtype=np.int64),
                              self.row_cycles, self.row_ptr), shape=(self.rows, self.cols))

    def dense(self) -> np.ndarray:
        return self.to_scipy().toarray()


def cycle_incidence_matrix(basis: SptCycleBasis, num_edges: int | None = None) -> IncidenceMatrix:
    n_rows = basis.num_edges if num_edges is None else int(num_edges)
    if basis.edges.size and basis.edges.max() >= n_rows:
        raise ValueError("cycle edge outside the row range")
    n_cols = len(basis)
    col = np.repeat(np.arange(n_cols), basis.cycle_length)
    by_col = np.lexsort((basis.edges, col))
    col_edges = basis.edges[by_col]
    by_row = np.lexsort((col, basis.edges))
    row_ptr = np.zeros(n_rows + 1, dtype=np.int64)
    np.cumsum(np.bincount(basis.edges, minlength=n_rows), out=row_ptr[1:])
    return IncidenceMatrix(n_rows, n_cols, basis.ptr.copy(), col_edges, row_ptr, col[by_row])


@dataclass(frozen=True, eq=False)
class BasisBundle:
    basis: SptCycleBasis
    incidence: IncidenceMatrix

    @property
    def roots(self) -> np.ndarray:
        return self.basis.tree.roots


def select_roots(kg: KnowledgeGraph, k: int, seed: int = 0, mode: str = "cluster") -> list[list[int]]:
    if mode == "cluster":
        return spectral_roots(kg, k, seed)
    if mode == "random":
        return random_roots(kg, k, seed)
    raise ValueError(f"unknown root mode {mode!r}")


def forest_roots(per_component: list[list[int]], k: int) -> list[np.ndarray]:
    """Root set of each of the ``k`` forests.

    Forest ``i`` takes root ``i mod k_c`` of every component ``c``, so every
    component is spanned ``k`` times even when it holds fewer than ``k``
    distinct roots.
    """
    return [np.array([rs[i % len(rs)] for rs in per_component if rs], dtype=np.int64)
            for i in range(k)]


def build_basis(kg: KnowledgeGraph, roots) -> BasisBundle:
    basis = spt_cycle_basis(kg, build_spt(kg, roots))
    return BasisBundle(basis, cycle_incidence_matrix(basis, kg.num_edges))


def build_all_bases(kg: KnowledgeGraph, k: int, seed: int = 0, mode: str = "cluster",
                    roots: list[list[int]] | None = None, check: bool | None = None
                    ) -> list[BasisBundle]:
    """``k`` SPT cycle bases covering every component.

    Forests are independent and built on a thread pool capped by
    ``CYCLEKIT_THREADS``; output order follows root order regardless.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    if roots is None:
        roots = select_roots(kg, k, seed, mode)
    forests = forest_roots(roots, k)
    workers = min(worker_count(), k)
    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            out = list(pool.map(lambda r: build_basis(kg, r), forests))
    else:
        out = [build_basis(kg, r) for r in forests]
    if check is None:
        check = bool(os.environ.get("CYCLEKIT_DEBUG"))
    if check:
        for b in out:
            verify_basis(kg, b.basis)
    return out


def verify_basis(kg: KnowledgeGraph, basis: SptCycleBasis, rank_check: bool = True) -> None:
    """Raise BasisError unless ``basis`` is a genuine cycle basis of its components."""
    from .z2 import betti_number

    tree = basis.tree
    n_comp, labels = kg.components
    covered_comps = np.unique(labels[tree.roots]) if tree.roots.size else np.zeros(0, np.int64)
    if covered_comps.size == n_comp:
        beta = betti_number(kg)
    else:
        mask = np.isin(labels, covered_comps)
        e_mask = mask[kg.heads]
        beta = int(e_mask.sum() - mask.sum() + covered_comps.size)
    if len(basis) != beta:
        raise BasisError(f"basis has {len(basis)} cycles, expected beta={beta}")
    is_tree = np.zeros(kg.num_edges, dtype=bool)
    is_tree[tree.tree_edges()] = True
    bm = boundary_matrix(kg)
    for j in range(len(basis)):
        e = basis.cycle_edges(j)
        nt = e[~is_tree[e]]
        if nt.size != 1 or nt[0] != basis.nontree_edge[j]:
            raise BasisError(f"cycle {j} holds non-tree edges {nt.tolist()}")
        if np.unique(e).size != e.size:
            raise BasisError(f"cycle {j} repeats an edge")
        if not is_cycle(bm, basis.chain(j)):
            raise BasisError(f"cycle {j} has non-zero boundary")
    if rank_check and len(basis):
        rank = Z2Span(basis.cycles).rank
        if rank != len(basis):
            raise BasisError(f"Z2 rank {rank} < {len(basis)}")


# ----------------------------------------------------------------- cache

def save_bases(path: str, bundles: list[BasisBundle], key: dict) -> None:
    arrays = {"version": np.array(CACHE_VERSION), "key": np.array(json.dumps(key, sort_keys=True)),
              "count": np.array(len(bundles))}
    for i, b in enumerate(bundles):
        t, s, inc = b.basis.tree, b.basis, b.incidence
        arrays.update({
            f"b{i}_roots": t.roots, f"b{i}_parent": t.parent, f"b{i}_parent_edge": t.parent_edge,
            f"b{i}_depth": t.depth, f"b{i}_ptr": s.ptr, f"b{i}_edges": s.edges,
            f"b{i}_tokens": s.tokens, f"b{i}_nontree": s.nontree_edge,
            f"b{i}_row_ptr": inc.row_ptr, f"b{i}_row_cycles": inc.row_cycles,
            f"b{i}_col_edges": inc.col_edges,
        })
    save_npz(path, arrays)


def load_bases(path: str, num_edges: int, key: dict | None = None) -> list[BasisBundle]:
    with np.load(path, allow_pickle=False) as z:
        if int(z["version"]) != CACHE_VERSION:
            raise BasisError(f"{path}: cache version {int(z['version'])} unsupported")
        if key is not None and json.loads(str(z["key"])) != key:
            raise BasisError(f"{path}: cache key mismatch")
        out = []
        for i in range(int(z["count"])):
            g = lambda n: z[f"b{i}_{n}"]  # noqa: E731
            tree = SptTree(g("roots"), g("parent"), g("parent_edge"), g("depth"))
            basis = SptCycleBasis(tree, g("ptr"), g("edges"), g("tokens"), g("nontree"), num_edges)
            inc = IncidenceMatrix(num_edges, len(basis), g("ptr"), g("col_edges"),
                                  g("row_ptr"), g("row_cycles"))
            out.append(BasisBundle(basis, inc))
    return out


def cache_key(z_path: str) -> dict:
    with np.load(z_path, allow_pickle=False) as z:
        return json.loads(str(z["key"]))


def tree_root_of(tree: SptTree) -> np.ndarray:
    """Root of the tree each vertex hangs from (-1 where uncovered)."""
    root = np.where(tree.depth == 0, np.arange(tree.depth.size), -1)
    for d in range(1, int(tree.depth.max(initial=0)) + 1):
        lvl = np.flatnonzero(tree.depth == d)
        root[lvl] = root[tree.parent[lvl]]
    return root


def basis_stats_rows(kg: KnowledgeGraph, bundles: list[BasisBundle]):
    """``(basis, cycle_id, root, length)`` for every cycle of every basis."""
    for i, b in enumerate(bundles):
        s = b.basis
        root = tree_root_of(s.tree)[kg.heads[s.nontree_edge]]
        for j, (r, n) in enumerate(zip(root.tolist(), s.cycle_length.tolist())):
            yield i, j, r, n
