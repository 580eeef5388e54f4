"""Root selection for shortest-path trees: spectral clustering per component."""

from __future__ import annotations

import logging
import warnings

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import eigsh

from .kg import KnowledgeGraph

logger = logging.getLogger(__name__)

DENSE_LIMIT = 3000
EIG_TOL = 1e-8
EIG_MAXITER = 20000


def normalized_laplacian(kg: KnowledgeGraph, vertices: np.ndarray | None = None) -> sp.csr_matrix:
    """``I - D^-1/2 A D^-1/2`` on ``vertices`` (all, in canonical order, by default).

    Parallel edges add to the adjacency weight. Isolated vertices get a zero
    row, so they contribute a zero eigenvalue like any other component.
    """
    if vertices is None:
        vertices = kg.vertex_order
    n = len(vertices)
    local = np.full(kg.num_entities, -1, dtype=np.int64)
    local[vertices] = np.arange(n)
    h, t = local[kg.heads], local[kg.tails]
    keep = (h >= 0) & (t >= 0)
    h, t = h[keep], t[keep]
    a = sp.coo_matrix((np.ones(2 * h.size), (np.concatenate([h, t]), np.concatenate([t, h]))),
                      shape=(n, n)).tocsr()
    a.sum_duplicates()
    deg = np.asarray(a.sum(axis=1)).ravel()
    inv_sqrt = np.zeros(n)
    nz = deg > 0
    inv_sqrt[nz] = 1.0 / np.sqrt(deg[nz])
    d = sp.diags(inv_sqrt)
    ident = sp.diags(nz.astype(float))
    return (ident - d @ a @ d).tocsr()


def spectral_embedding(lap: sp.csr_matrix, dim: int, seed: int = 0) -> np.ndarray:
    """Eigenvectors of the ``dim`` smallest eigenvalues, rows unit-normalised."""
    n = lap.shape[0]
    if n <= DENSE_LIMIT or dim >= n - 1:
        _, vecs = np.linalg.eigh(lap.toarray())
        vecs = vecs[:, :dim]
    else:
        # largest eigenpairs of I - L are the smallest of L
        op = sp.identity(n, format="csr") - lap
        v0 = np.random.default_rng(seed).standard_normal(n)
        vals, vecs = eigsh(op, k=dim, which="LA", v0=v0, tol=EIG_TOL, maxiter=EIG_MAXITER)
        vecs = vecs[:, np.argsort(-vals, kind="stable")]
    norms = np.linalg.norm(vecs, axis=1, keepdims=True)
    norms[norms == 0] = 1.0
    return vecs / norms


def allocate_roots(sizes, k: int) -> np.ndarray:
    """Roots per component: one each, the rest proportional to size.

    Largest-remainder rounding, ties to the earlier component; never more
    roots than vertices.
    """
    sizes = np.asarray(sizes, dtype=np.int64)
    n_comp = sizes.size
    alloc = np.ones(n_comp, dtype=np.int64)
    spare = k - n_comp
    if spare > 0 and n_comp:
        quota = spare * sizes / sizes.sum()
        base = np.floor(quota).astype(np.int64)
        left = spare - base.sum()
        frac = quota - base
        order = np.lexsort((np.arange(n_comp), -frac))
        base[order[:left]] += 1
        alloc += base
    over = alloc > sizes
    if over.any():
        logger.warning("clamping roots to component size for %d component(s)", int(over.sum()))
        alloc = np.minimum(alloc, sizes)
    return alloc


def _kmeans_centers(x: np.ndarray, n_clusters: int, seed: int) -> list[int]:
    if n_clusters == 1:
        # one cluster: k-means converges to the mean immediately
        dist = np.linalg.norm(x - x.mean(axis=0), axis=1)
        return [int(np.argmin(dist))]
    from sklearn.cluster import KMeans

    with warnings.catch_warnings():
        warnings.simplefilter("ignore")  # duplicate points on tiny components
        km = KMeans(n_clusters=n_clusters, n_init=10, random_state=seed).fit(x)
    picks = []
    for c in range(n_clusters):
        members = np.flatnonzero(km.labels_ == c)
        if members.size == 0:
            continue
        dist = np.linalg.norm(x[members] - km.cluster_centers_[c], axis=1)
        # argmin keeps the first minimum, i.e. the lowest canonical position
        picks.append(int(members[np.argmin(dist)]))
    return sorted(set(picks))


def _component_vertices(kg: KnowledgeGraph):
    n_comp, labels = kg.components
    order = kg.vertex_order
    lab = labels[order]
    idx = np.argsort(lab, kind="stable")
    bounds = np.searchsorted(lab[idx], np.arange(n_comp + 1))
    return [order[idx[bounds[c]:bounds[c + 1]]] for c in range(n_comp)]


def spectral_roots(kg: KnowledgeGraph, k: int, seed: int = 0) -> list[list[int]]:
    """Cluster-centre roots, grouped per connected component.

    Component ``c`` gets ``allocate_roots`` many roots; within a component
    the roots are listed in canonical vertex order.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    comps = _component_vertices(kg)
    alloc = allocate_roots([len(c) for c in comps], k)
    out = []
    for verts, kc in zip(comps, alloc):
        kc = int(kc)
        if kc >= len(verts):
            out.append([int(v) for v in verts])
            continue
        # a lone cluster also gets the Fiedler vector, else every row is identical
        dim = max(kc, 2)
        emb = spectral_embedding(normalized_laplacian(kg, verts), dim, seed)
        picks = _kmeans_centers(emb, kc, seed)
        out.append([int(verts[p]) for p in picks])
    return out


def random_roots(kg: KnowledgeGraph, k: int, seed: int = 0) -> list[list[int]]:
    """Uniformly sampled roots with the same per-component allocation."""
    if k < 1:
        raise ValueError("k must be >= 1")
    rng = np.random.default_rng(seed)
    comps = _component_vertices(kg)
    alloc = allocate_roots([len(c) for c in comps], k)
    out = []
    for verts, kc in zip(comps, alloc):
        picks = np.sort(rng.choice(len(verts), size=int(kc), replace=False))
        out.append([int(verts[p]) for p in picks])
    return out
