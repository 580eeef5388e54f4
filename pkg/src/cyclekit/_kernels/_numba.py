"""numba-compiled graph and Z2 kernels.

Every function here has a twin with the same signature and semantics in
``_numpy.py``; the two are checked against each other in the test suite.
"""

import numpy as np
from numba import njit

_JIT = dict(cache=True, nogil=True)


@njit(**_JIT)
def bfs_forest(indptr, adj_edge, adj_nbr, num_vertices, roots):
    parent = np.full(num_vertices, -1, dtype=np.int64)
    parent_edge = np.full(num_vertices, -1, dtype=np.int64)
    depth = np.full(num_vertices, -1, dtype=np.int64)
    queue = np.empty(num_vertices, dtype=np.int64)
    for r in range(roots.shape[0]):
        root = roots[r]
        if depth[root] >= 0:
            continue
        depth[root] = 0
        head = 0
        tail = 0
        queue[tail] = root
        tail += 1
        while head < tail:
            x = queue[head]
            head += 1
            for k in range(indptr[x], indptr[x + 1]):
                y = adj_nbr[k]
                if depth[y] < 0:
                    depth[y] = depth[x] + 1
                    parent[y] = x
                    parent_edge[y] = adj_edge[k]
                    queue[tail] = y
                    tail += 1
    return parent, parent_edge, depth


@njit(**_JIT)
def _lca(parent, depth, u, v):
    while depth[u] > depth[v]:
        u = parent[u]
    while depth[v] > depth[u]:
        v = parent[v]
    while u != v:
        u = parent[u]
        v = parent[v]
    return u


@njit(**_JIT)
def spt_cycles(heads, tails, rels, num_relations, parent, parent_edge, depth,
               nontree):
    n_cyc = nontree.shape[0]
    ptr = np.zeros(n_cyc + 1, dtype=np.int64)
    lcas = np.empty(n_cyc, dtype=np.int64)
    for i in range(n_cyc):
        e = nontree[i]
        u = heads[e]
        v = tails[e]
        a = _lca(parent, depth, u, v)
        lcas[i] = a
        ptr[i + 1] = ptr[i] + 1 + (depth[u] - depth[a]) + (depth[v] - depth[a])
    edges = np.empty(ptr[n_cyc], dtype=np.int64)
    tokens = np.empty(ptr[n_cyc], dtype=np.int64)
    for i in range(n_cyc):
        e = nontree[i]
        u = heads[e]
        v = tails[e]
        a = lcas[i]
        pos = ptr[i]
        edges[pos] = e
        tokens[pos] = rels[e]
        pos += 1
        # climb from v to the common ancestor
        x = v
        while x != a:
            f = parent_edge[x]
            edges[pos] = f
            if heads[f] == x:
                tokens[pos] = rels[f]
            else:
                tokens[pos] = rels[f] + num_relations
            pos += 1
            x = parent[x]
        # descend from the ancestor to u: u's climb, written back to front
        x = u
        pos = ptr[i + 1] - 1
        while x != a:
            f = parent_edge[x]
            edges[pos] = f
            if tails[f] == x:
                tokens[pos] = rels[f]
            else:
                tokens[pos] = rels[f] + num_relations
            pos -= 1
            x = parent[x]
    return ptr, edges, tokens


@njit(**_JIT)
def cycle_topm(cycle_ptr, cycle_edges, edge_ptr, edge_cycles, m):
    n_cyc = cycle_ptr.shape[0] - 1
    nbr = np.full((n_cyc, m), -1, dtype=np.int64)
    ovl = np.zeros((n_cyc, m), dtype=np.int64)
    counts = np.zeros(n_cyc, dtype=np.int64)
    touched = np.empty(n_cyc, dtype=np.int64)
    for i in range(n_cyc):
        n_t = 0
        for p in range(cycle_ptr[i], cycle_ptr[i + 1]):
            e = cycle_edges[p]
            for q in range(edge_ptr[e], edge_ptr[e + 1]):
                j = edge_cycles[q]
                if j == i:
                    continue
                if counts[j] == 0:
                    touched[n_t] = j
                    n_t += 1
                counts[j] += 1
        # insertion into a length-m leaderboard, ordered by (-count, index)
        filled = 0
        for t in range(n_t):
            j = touched[t]
            c = counts[j]
            counts[j] = 0
            slot = filled
            while slot > 0 and (ovl[i, slot - 1] < c or
                                (ovl[i, slot - 1] == c and nbr[i, slot - 1] > j)):
                slot -= 1
            if slot >= m:
                continue
            last = filled if filled < m else m - 1
            for s in range(last, slot, -1):
                nbr[i, s] = nbr[i, s - 1]
                ovl[i, s] = ovl[i, s - 1]
            nbr[i, slot] = j
            ovl[i, slot] = c
            if filled < m:
                filled += 1
    return nbr, ovl


@njit(**_JIT)
def segment_max(row_ptr, col_idx, values):
    n = row_ptr.shape[0] - 1
    out = np.zeros(n, dtype=values.dtype)
    arg = np.full(n, -1, dtype=np.int64)
    for r in range(n):
        best = -np.inf
        for p in range(row_ptr[r], row_ptr[r + 1]):
            j = col_idx[p]
            if values[j] > best:
                best = values[j]
                arg[r] = j
        if arg[r] >= 0:
            out[r] = best
    return out, arg


@njit(**_JIT)
def _lowest_bit(v):
    for w in range(v.shape[0]):
        word = v[w]
        if word != 0:
            for b in range(64):
                if (word >> np.uint64(b)) & np.uint64(1):
                    return w * 64 + b
    return -1


@njit(**_JIT)
def z2_eliminate(rows):
    n, n_words = rows.shape
    comb_words = (n + 63) // 64
    piv_rows = np.zeros((n, n_words), dtype=np.uint64)
    piv_comb = np.zeros((n, comb_words), dtype=np.uint64)
    col_to_piv = np.full(n_words * 64, -1, dtype=np.int64)
    rank = 0
    v = np.empty(n_words, dtype=np.uint64)
    comb = np.empty(comb_words, dtype=np.uint64)
    for i in range(n):
        v[:] = rows[i]
        comb[:] = 0
        comb[i // 64] |= np.uint64(1) << np.uint64(i % 64)
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
            for w in range(n_words):
                v[w] ^= piv_rows[p, w]
            for w in range(comb_words):
                comb[w] ^= piv_comb[p, w]
    return rank, piv_rows[:rank].copy(), piv_comb[:rank].copy(), col_to_piv


@njit(**_JIT)
def z2_reduce(piv_rows, piv_comb, col_to_piv, target):
    v = target.copy()
    comb = np.zeros(piv_comb.shape[1], dtype=np.uint64)
    while True:
        c = _lowest_bit(v)
        if c < 0:
            return True, comb
        if c >= col_to_piv.shape[0]:
            return False, comb
        p = col_to_piv[c]
        if p < 0:
            return False, comb
        for w in range(v.shape[0]):
            v[w] ^= piv_rows[p, w]
        for w in range(comb.shape[0]):
            comb[w] ^= piv_comb[p, w]
