import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, strategies as st
from scipy.sparse.csgraph import shortest_path

from cyclekit.basis import (BasisError, basis_stats_rows, build_all_bases, build_spt, forest_roots, lca,
                            load_bases, nontree_edges, save_bases, spt_cycle_basis, verify_basis)
from cyclekit.synthetic import random_multigraph
from cyclekit.z2 import Z2Chain, betti_number, solve_in_span

from helpers import graph_from

seeds = st.integers(0, 10**6)


def hop_distances(kg, root):
    n = kg.num_entities
    a = sp.coo_matrix((np.ones(kg.num_edges), (kg.heads, kg.tails)), shape=(n, n))
    return shortest_path(a, directed=False, unweighted=True, indices=root)


def random_walk_cycle(kg, rng, max_steps=500):
    """Edges of the loop closed by a random walk when it first revisits a vertex."""
    indptr, eids, nbrs = kg.adjacency
    v = int(rng.integers(kg.num_entities))
    path_v, path_e = [v], []
    for _ in range(max_steps):
        lo, hi = indptr[v], indptr[v + 1]
        choices = [i for i in range(lo, hi) if not path_e or eids[i] != path_e[-1]]
        if not choices:
            return None
        i = choices[int(rng.integers(len(choices)))]
        v = int(nbrs[i])
        path_e.append(int(eids[i]))
        if v in path_v:
            return path_e[path_v.index(v):]
        path_v.append(v)
    return None


@given(seeds)
def test_spt_depth_is_hop_distance(seed):
    kg = random_multigraph(30, 70, 3, seed=seed, connected=bool(seed % 3))
    root = seed % kg.num_entities
    tree = build_spt(kg, root)
    dist = hop_distances(kg, root)
    reach = np.isfinite(dist)
    np.testing.assert_array_equal(tree.depth[reach], dist[reach].astype(int))
    assert (tree.depth[~reach] == -1).all()
    kids = np.flatnonzero(tree.parent >= 0)
    e = tree.parent_edge[kids]
    ends = {frozenset(p) for p in zip(kg.heads[e].tolist(), kg.tails[e].tolist())}
    assert ends == {frozenset(p) for p in zip(kids.tolist(), tree.parent[kids].tolist())}
    assert (tree.depth[tree.parent[kids]] == tree.depth[kids] - 1).all()


@given(seeds)
def test_lca_matches_brute_force(seed):
    kg = random_multigraph(25, 50, 2, seed=seed)
    tree = build_spt(kg, 0)
    rng = np.random.default_rng(seed)

    def ancestors(x):
        out = [x]
        while tree.parent[x] >= 0:
            x = int(tree.parent[x])
            out.append(x)
        return out

    for _ in range(20):
        u, v = (int(x) for x in rng.integers(kg.num_entities, size=2))
        common = set(ancestors(u)) & set(ancestors(v))
        assert lca(tree, u, v) == max(common, key=lambda x: tree.depth[x])


def test_lca_across_components():
    kg = graph_from([(0, "r", 1), (2, "r", 3)])
    tree = build_spt(kg, [0, 2])
    with pytest.raises(BasisError):
        lca(tree, 0, 3)


def test_parallel_edge_prefers_lowest_id():
    kg = graph_from([("a", "s", "b"), ("a", "r", "b"), ("b", "r", "c"), ("c", "r", "a")])
    tree = build_spt(kg, 0)
    assert tree.parent_edge[1] == 0
    basis = spt_cycle_basis(kg, tree)
    assert basis.nontree_edge.tolist() == [1, 2]
    assert sorted(basis.cycle_edges(0).tolist()) == [0, 1]


@given(seeds)
def test_basis_properties(seed):
    kg = random_multigraph(20, 55, 3, seed=seed, connected=bool(seed % 2))
    for b in build_all_bases(kg, 3, seed=seed):
        verify_basis(kg, b.basis)
        assert len(b.basis) == betti_number(kg)
        s = b.basis
        # each cycle is a closed walk in stored order, starting on its non-tree edge
        for j in range(len(s)):
            e = s.cycle_edges(j)
            assert e[0] == s.nontree_edge[j]
            here = int(kg.tails[e[0]])
            for edge, tok in zip(e[1:], s.cycle_tokens(j)[1:]):
                h, t = int(kg.heads[edge]), int(kg.tails[edge])
                assert here in (h, t)
                assert tok == kg.relations[edge] + (0 if h == here else kg.num_relations)
                here = t if h == here else h
            assert here == kg.heads[e[0]]


@given(seeds)
def test_random_walk_cycles_are_spanned(seed):
    kg = random_multigraph(15, 40, 3, seed=seed)
    rng = np.random.default_rng(seed)
    cycles = [c for c in (random_walk_cycle(kg, rng) for _ in range(30)) if c]
    for b in build_all_bases(kg, 2, seed=seed):
        basis = b.basis.cycles
        for c in cycles:
            assert solve_in_span(basis, Z2Chain.from_edges(c, kg.num_edges)) is not None


def test_tree_component_has_empty_basis():
    kg = graph_from([(0, "r", 1), (1, "r", 2), (3, "r", 4), (4, "r", 5), (5, "s", 3)])
    (b,) = build_all_bases(kg, 1)
    assert len(b.basis) == 1
    verify_basis(kg, b.basis)
    line = graph_from([(0, "r", 1), (1, "r", 2)])
    assert len(build_all_bases(line, 2)[0].basis) == 0


def test_forest_roots_reuse_roots_cyclically():
    out = forest_roots([[1, 2, 3], [7]], 4)
    assert [r.tolist() for r in out] == [[1, 7], [2, 7], [3, 7], [1, 7]]


def test_fewer_trees_than_components_still_span_all():
    kg = graph_from([(0, "r", 1), (1, "r", 2), (2, "r", 0), (3, "r", 4), (4, "s", 3), (5, "r", 6), (6, "s", 5)])
    (b,) = build_all_bases(kg, 1)
    verify_basis(kg, b.basis)
    assert len(b.basis) == 3


def test_verify_rejects_corrupted_basis(small_graph):
    (b,) = build_all_bases(small_graph, 1)
    s = b.basis
    bad = type(s)(s.tree, s.ptr[:-1], s.edges[:s.ptr[-2]], s.tokens[:s.ptr[-2]], s.nontree_edge[:-1],
                  s.num_edges)
    with pytest.raises(BasisError):
        verify_basis(small_graph, bad)


def test_thread_count_does_not_change_result(small_graph, monkeypatch):
    monkeypatch.setenv("CYCLEKIT_THREADS", "1")
    one = build_all_bases(small_graph, 4, seed=1)
    monkeypatch.setenv("CYCLEKIT_THREADS", "4")
    four = build_all_bases(small_graph, 4, seed=1)
    for a, b in zip(one, four):
        np.testing.assert_array_equal(a.basis.edges, b.basis.edges)
        np.testing.assert_array_equal(a.roots, b.roots)


def test_cache_round_trip(tmp_path, small_graph):
    bundles = build_all_bases(small_graph, 3, seed=2)
    path = str(tmp_path / "b.npz")
    save_bases(path, bundles, {"k": 3})
    back = load_bases(path, small_graph.num_edges, {"k": 3})
    for a, b in zip(bundles, back):
        for name in ("ptr", "edges", "tokens", "nontree_edge"):
            np.testing.assert_array_equal(getattr(a.basis, name), getattr(b.basis, name))
        np.testing.assert_array_equal(a.incidence.dense(), b.incidence.dense())
    with pytest.raises(BasisError):
        load_bases(path, small_graph.num_edges, {"k": 4})


def test_incidence_matrix_matches_cycles(small_graph):
    (b,) = build_all_bases(small_graph, 1)
    dense = b.incidence.dense()
    for j in range(len(b.basis)):
        assert set(np.flatnonzero(dense[:, j])) == set(b.basis.cycle_edges(j).tolist())
    assert (b.incidence.to_scipy().T @ b.incidence.to_scipy()).diagonal().tolist() == \
        b.basis.cycle_length.tolist()


def test_basis_stats_rows(small_graph):
    bundles = build_all_bases(small_graph, 2)
    rows = list(basis_stats_rows(small_graph, bundles))
    assert len(rows) == sum(len(b.basis) for b in bundles)
    roots = set(np.concatenate([b.roots for b in bundles]).tolist())
    assert {r[2] for r in rows} <= roots


def test_nontree_count(small_graph):
    tree = build_spt(small_graph, 0)
    assert nontree_edges(small_graph, tree).size == betti_number(small_graph)
