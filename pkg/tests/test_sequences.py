import numpy as np
import pytest
from hypothesis import given, strategies as st

from cyclekit.basis import build_all_bases
from cyclekit.nn.sequences import (MalformedCycleError, basis_sequences, cycle_sequences, reverse_packed,
                                   reverse_tokens)
from cyclekit.synthetic import random_multigraph
from cyclekit.z2 import Z2Chain

from helpers import graph_from


def test_parallel_two_cycle():
    kg = graph_from([("u", "r", "v"), ("u", "s", "v")])
    (b,) = build_all_bases(kg, 1)
    R = kg.num_relations
    fwd, rev = cycle_sequences(b.basis.chain(0), b.basis, kg)
    r, s = kg.relation_vocab["r"], kg.relation_vocab["s"]
    # edge 1 (u, s, v) is the non-tree edge, so the walk starts there
    assert fwd.start_edge == rev.start_edge == 1
    assert fwd.tokens.tolist() == [s, r + R]
    assert rev.tokens.tolist() == [s + R, r]


@given(st.lists(st.integers(0, 7), min_size=1, max_size=12))
def test_reverse_is_involution(tokens):
    tokens = np.array(tokens)
    once = reverse_tokens(tokens, 4)
    assert len(once) == len(tokens)
    np.testing.assert_array_equal(reverse_tokens(once, 4), tokens)


@given(st.integers(0, 10**6))
def test_edge_set_orientation_matches_stored_walk(seed):
    kg = random_multigraph(15, 35, 3, seed=seed)
    (b,) = build_all_bases(kg, 1, seed=seed)
    s = b.basis
    for j in range(len(s)):
        a = cycle_sequences(s.chain(j), s, kg)
        c = basis_sequences(s, kg.num_relations, j)
        for x, y in zip(a, c):
            np.testing.assert_array_equal(x.tokens, y.tokens)
            assert x.start_edge == y.start_edge
        assert len(a[0].tokens) == s.cycle_length[j]


def test_reverse_packed_matches_per_segment(rng):
    lengths = rng.integers(1, 7, size=20)
    ptr = np.concatenate([[0], np.cumsum(lengths)])
    tokens = rng.integers(0, 10, size=ptr[-1])
    out = reverse_packed(ptr, tokens, 5)
    for i in range(20):
        seg = slice(ptr[i], ptr[i + 1])
        np.testing.assert_array_equal(out[seg], reverse_tokens(tokens[seg], 5))


def test_malformed_cycles_rejected():
    # two triangles sharing vertex a: a figure eight
    kg = graph_from([("a", "r", "b"), ("b", "r", "c"), ("c", "r", "a"),
                     ("a", "r", "d"), ("d", "r", "e"), ("e", "r", "a")])
    (b,) = build_all_bases(kg, 1)
    s = b.basis
    eight = s.chain(0) + s.chain(1)
    with pytest.raises(MalformedCycleError):
        cycle_sequences(eight, s, kg)
    path = Z2Chain.from_edges([0, 1], kg.num_edges)
    with pytest.raises(MalformedCycleError):
        cycle_sequences(path, s, kg)
