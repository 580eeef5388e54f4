"""Pure-numpy versions of the kernels in ``_numba.py``.

Same signatures, same outputs bit for bit. Loops run per BFS level or per
tree depth rather than per vertex, so they stay tolerable without a JIT.
"""

import numpy as np
import scipy.sparse as sp


def bfs_forest(indptr, adj_edge, adj_nbr, num_vertices, roots):
    parent = np.full(num_vertices, -1, dtype=np.int64)
    parent_edge = np.full(num_vertices, -1, dtype=np.int64)
    depth = np.full(num_vertices, -1, dtype=np.int64)
    for root in np.asarray(roots, dtype=np.int64):
        if depth[root] >= 0:
            continue
        depth[root] = 0
        frontier = np.array([root], dtype=np.int64)
        level = 0
        while frontier.size:
            starts = indptr[frontier]
            counts = indptr[frontier + 1] - starts
            # slots of every incident edge, frontier order then edge order
            owner = np.repeat(np.arange(frontier.size), counts)
            offs = np.arange(counts.sum()) - np.repeat(np.cumsum(counts) - counts, counts)
            slots = starts[owner] + offs
            nbrs = adj_nbr[slots]
            fresh = depth[nbrs] < 0
            slots, nbrs, owner = slots[fresh], nbrs[fresh], owner[fresh]
            # first discovery wins, exactly as a FIFO queue would decide
            _, first = np.unique(nbrs, return_index=True)
            first.sort()
            new = nbrs[first]
            level += 1
            depth[new] = level
            parent[new] = frontier[owner[first]]
            parent_edge[new] = adj_edge[slots[first]]
            frontier = new
    return parent, parent_edge, depth


def _lca_many(parent, depth, u, v):
    u = u.copy()
    v = v.copy()
    while True:
        du, dv = depth[u], depth[v]
        if not (du != dv).any():
            break
        u = np.where(du > dv, parent[u], u)
        v = np.where(dv > du, parent[v], v)
    while True:
        diff = u != v
        if not diff.any():
            return u
        u = np.where(diff, parent[u], u)
        v = np.where(diff, parent[v], v)


def spt_cycles(heads, tails, rels, num_relations, parent, parent_edge, depth,
               nontree):
    nontree = np.asarray(nontree, dtype=np.int64)
    u = heads[nontree]
    v = tails[nontree]
    a = _lca_many(parent, depth, u, v)
    up_v = depth[v] - depth[a]
    up_u = depth[u] - depth[a]
    ptr = np.zeros(nontree.size + 1, dtype=np.int64)
    np.cumsum(1 + up_u + up_v, out=ptr[1:])
    edges = np.empty(ptr[-1], dtype=np.int64)
    tokens = np.empty(ptr[-1], dtype=np.int64)
    edges[ptr[:-1]] = nontree
    tokens[ptr[:-1]] = rels[nontree]

    x, pos = v.copy(), ptr[:-1] + 1
    active = x != a
    while active.any():
        xs = x[active]
        f = parent_edge[xs]
        edges[pos[active]] = f
        tokens[pos[active]] = rels[f] + np.where(heads[f] == xs, 0, num_relations)
        x[active] = parent[xs]
        pos[active] += 1
        active = x != a

    x, pos = u.copy(), ptr[1:] - 1
    active = x != a
    while active.any():
        xs = x[active]
        f = parent_edge[xs]
        edges[pos[active]] = f
        tokens[pos[active]] = rels[f] + np.where(tails[f] == xs, 0, num_relations)
        x[active] = parent[xs]
        pos[active] -= 1
        active = x != a
    return ptr, edges, tokens


def cycle_topm(cycle_ptr, cycle_edges, edge_ptr, edge_cycles, m):
    n_cyc = cycle_ptr.size - 1
    n_edges = edge_ptr.size - 1
    nbr = np.full((n_cyc, m), -1, dtype=np.int64)
    ovl = np.zeros((n_cyc, m), dtype=np.int64)
    if n_cyc == 0:
        return nbr, ovl
    ct = sp.csc_matrix(
        (np.ones(cycle_edges.size, dtype=np.int64), cycle_edges, cycle_ptr),
        shape=(n_edges, n_cyc))
    overlap = (ct.T @ ct).tocoo()
    keep = overlap.row != overlap.col
    row, col, val = overlap.row[keep], overlap.col[keep], overlap.data[keep]
    order = np.lexsort((col, -val, row))
    row, col, val = row[order], col[order], val[order]
    starts = np.searchsorted(row, np.arange(n_cyc))
    rank = np.arange(row.size) - starts[row]
    sel = rank < m
    nbr[row[sel], rank[sel]] = col[sel]
    ovl[row[sel], rank[sel]] = val[sel]
    return nbr, ovl


def segment_max(row_ptr, col_idx, values):
    n = row_ptr.size - 1
    out = np.zeros(n, dtype=values.dtype)
    arg = np.full(n, -1, dtype=np.int64)
    if col_idx.size == 0:
        return out, arg
    counts = np.diff(row_ptr)
    row = np.repeat(np.arange(n), counts)
    vals = values[col_idx]
    # position order inside a row breaks ties, matching a strict '>' scan
    pos = np.arange(col_idx.size)
    order = np.lexsort((pos, -vals, row))
    first = order[np.concatenate(([0], np.flatnonzero(np.diff(row[order])) + 1))]
    out[row[first]] = vals[first]
    arg[row[first]] = col_idx[first]
    return out, arg


def _lowest_bit(v):
    nz = np.flatnonzero(v)
    if nz.size == 0:
        return -1
    w = int(nz[0])
    word = int(v[w])
    return w * 64 + ((word & -word).bit_length() - 1)


def z2_eliminate(rows):
    n, n_words = rows.shape
    comb_words = (n + 63) // 64
    piv_rows = np.zeros((n, n_words), dtype=np.uint64)
    piv_comb = np.zeros((n, comb_words), dtype=np.uint64)
    col_to_piv = np.full(n_words * 64, -1, dtype=np.int64)
    rank = 0
    for i in range(n):
        v = rows[i].copy()
        comb = np.zeros(comb_words, dtype=np.uint64)
        comb[i // 64] = np.uint64(1) << np.uint64(i % 64)
        while True:
            c = _lowest_bit(v)
            if c < 0:
                break
            p = col_to_piv[c]
            if p < 0:
                piv_rows[rank] = v
                piv_comb[rank] = comb
                col_to_piv[c] = rank
                rank += 1
                break
            v ^= piv_rows[p]
            comb ^= piv_comb[p]
    return rank, piv_rows[:rank].copy(), piv_comb[:rank].copy(), col_to_piv


def z2_reduce(piv_rows, piv_comb, col_to_piv, target):
    v = target.copy()
    comb = np.zeros(piv_comb.shape[1], dtype=np.uint64)
    while True:
        c = _lowest_bit(v)
        if c < 0:
            return True, comb
        if c >= col_to_piv.size or col_to_piv[c] < 0:
            return False, comb
        p = col_to_piv[c]
        v ^= piv_rows[p]
        comb ^= piv_comb[p]
