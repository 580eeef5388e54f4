"""Graphs whose nodes are basis cycles, joined to their top-m overlapping peers."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from . import _kernels
from .basis import IncidenceMatrix


@dataclass(frozen=True, eq=False)
class CycleGraph:
    num_nodes: int
    edges: np.ndarray    # (n, 2), i < j, lexicographically sorted
    overlap: np.ndarray  # shared-edge count per edge (metadata only)

    @property
    def num_edges(self) -> int:
        return len(self.edges)

    def degree(self) -> np.ndarray:
        return np.bincount(self.edges.ravel(), minlength=self.num_nodes)

    def adjacency(self) -> sp.csr_matrix:
        n = self.num_nodes
        i, j = self.edges[:, 0], self.edges[:, 1]
        data = np.ones(2 * len(i))
        return sp.csr_matrix((data, (np.concatenate([i, j]), np.concatenate([j, i]))), shape=(n, n))

    def normalized_adjacency(self) -> sp.csr_matrix:
        """``D^-1/2 (A + I) D^-1/2`` with unit edge weights."""
        a = self.adjacency() + sp.identity(self.num_nodes, format="csr")
        d = 1.0 / np.sqrt(np.asarray(a.sum(axis=1)).ravel())
        dm = sp.diags(d)
        return (dm @ a @ dm).tocsr()

    def edge_rows(self):
        for (i, j), c in zip(self.edges.tolist(), self.overlap.tolist()):
            yield i, j, c


def cycle_overlap(ct: IncidenceMatrix) -> sp.csr_matrix:
    """``C_T^T C_T``: shared-edge counts, cycle lengths on the diagonal."""
    m = ct.to_scipy()
    return (m.T @ m).tocsr()


def _from_selection(n: int, nbr: np.ndarray, ovl: np.ndarray) -> CycleGraph:
    src = np.repeat(np.arange(n), nbr.shape[1])
    dst, cnt = nbr.ravel(), ovl.ravel()
    ok = dst >= 0
    src, dst, cnt = src[ok], dst[ok], cnt[ok]
    lo, hi = np.minimum(src, dst), np.maximum(src, dst)
    key = lo * max(n, 1) + hi
    _, first = np.unique(key, return_index=True)
    edges = np.stack([lo[first], hi[first]], axis=1).reshape(-1, 2)
    return CycleGraph(n, edges, cnt[first])


def build_cycle_graph(overlap, m: int = 2) -> CycleGraph:
    """Link every cycle to its ``m`` most-overlapping others (union, undirected).

    Ties go to the lower cycle index; zero-overlap pairs are never linked.
    """
    if m < 1:
        raise ValueError("m must be >= 1")
    o = sp.coo_matrix(overlap)
    n = o.shape[0]
    keep = (o.row != o.col) & (o.data > 0)
    row, col, val = o.row[keep].astype(np.int64), o.col[keep].astype(np.int64), o.data[keep].astype(np.int64)
    order = np.lexsort((col, -val, row))
    row, col, val = row[order], col[order], val[order]
    starts = np.searchsorted(row, np.arange(n))
    rank = np.arange(row.size) - starts[row] if row.size else row
    sel = rank < m
    nbr = np.full((n, m), -1, dtype=np.int64)
    ovl = np.zeros((n, m), dtype=np.int64)
    nbr[row[sel], rank[sel]] = col[sel]
    ovl[row[sel], rank[sel]] = val[sel]
    return _from_selection(n, nbr, ovl)


def cycle_graph(ct: IncidenceMatrix, m: int = 2) -> CycleGraph:
    """Same result as ``build_cycle_graph(cycle_overlap(ct), m)`` without
    materialising the beta x beta overlap matrix."""
    if m < 1:
        raise ValueError("m must be >= 1")
    nbr, ovl = _kernels.cycle_topm(ct.col_ptr, ct.col_edges, ct.row_ptr, ct.row_cycles, m)
    return _from_selection(ct.cols, nbr, ovl)
