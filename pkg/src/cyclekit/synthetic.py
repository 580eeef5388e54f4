"""Small generated graphs: random multigraphs for property tests and
rule-planted knowledge graphs for end-to-end runs without external data."""

from __future__ import annotations

import os

import numpy as np

from .kg import KnowledgeGraph, build_graph


def random_multigraph(num_vertices: int, num_edges: int, num_relations: int = 3, seed=0,
                      connected: bool = True) -> KnowledgeGraph:
    """Random loop-free multigraph; parallel edges carry distinct relations.

    With ``connected`` a random spanning tree is laid down first, so
    ``num_edges`` must be at least ``num_vertices - 1``.
    """
    rng = np.random.default_rng(seed)
    n = num_vertices
    rows: set[tuple[int, int, int]] = set()
    if connected:
        if num_edges < n - 1:
            raise ValueError("a connected graph needs at least |V| - 1 edges")
        order = rng.permutation(n)
        for i in range(1, n):
            a, b = int(order[i]), int(order[rng.integers(i)])
            if rng.random() < 0.5:
                a, b = b, a
            rows.add((a, int(rng.integers(num_relations)), b))
    cap = n * (n - 1) * num_relations
    if num_edges > cap:
        raise ValueError("too many edges for this vertex and relation count")
    while len(rows) < num_edges:
        a, b = (int(x) for x in rng.integers(n, size=2))
        if a != b:
            rows.add((a, int(rng.integers(num_relations)), b))
    ordered = rng.permutation(np.array(sorted(rows))).tolist()
    return build_graph([(f"v{h}", f"r{r}", f"v{t}") for h, r, t in ordered],
                       relation_vocab={f"r{i}": i for i in range(num_relations)})


def rule_triplets(num_entities: int = 150, num_rules: int = 2, base_degree: float = 2.5,
                  rule_prob: float = 0.9, noise: float = 0.05, seed=0, prefix: str = "e"
                  ) -> list[tuple[str, str, str]]:
    """Triplets generated by planted length-2 rules.

    Rule ``i`` reads ``a_i(x, y) and b_i(y, z) -> c_i(x, z)``. Body edges are
    drawn at random; every body path closes into a head edge with
    probability ``rule_prob``; ``noise`` adds unsupported head edges.
    """
    rng = np.random.default_rng(seed)
    n = num_entities
    body = [(f"a{i}", f"b{i}") for i in range(num_rules)]
    heads = [f"c{i}" for i in range(num_rules)]
    rows: set[tuple[str, str, str]] = set()
    per_rel = int(base_degree * n / (2 * num_rules))
    for (ra, rb), rc in zip(body, heads):
        a_edges = rng.integers(n, size=(per_rel, 2))
        b_edges = rng.integers(n, size=(per_rel, 2))
        a_edges = a_edges[a_edges[:, 0] != a_edges[:, 1]]
        b_edges = b_edges[b_edges[:, 0] != b_edges[:, 1]]
        for x, y in a_edges.tolist():
            rows.add((f"{prefix}{x}", ra, f"{prefix}{y}"))
        for y, z in b_edges.tolist():
            rows.add((f"{prefix}{y}", rb, f"{prefix}{z}"))
        out_b: dict[int, list[int]] = {}
        for y, z in b_edges.tolist():
            out_b.setdefault(y, []).append(z)
        for x, y in a_edges.tolist():
            for z in out_b.get(y, ()):
                if x != z and rng.random() < rule_prob:
                    rows.add((f"{prefix}{x}", rc, f"{prefix}{z}"))
        for _ in range(int(noise * per_rel)):
            x, z = (int(v) for v in rng.integers(n, size=2))
            if x != z:
                rows.add((f"{prefix}{x}", rc, f"{prefix}{z}"))
    return sorted(rows)


def write_rule_dataset(path: str, num_entities: int = 150, seed=0, **kwargs) -> str:
    """``train.txt`` and ``test.txt`` over disjoint entity sets, same rules."""
    os.makedirs(path, exist_ok=True)
    for i, split in enumerate(("train", "test")):
        rows = rule_triplets(num_entities, seed=[seed, i], prefix=f"{split[:2]}", **kwargs)
        with open(os.path.join(path, f"{split}.txt"), "w", encoding="utf-8") as fh:
            for h, r, t in rows:
                fh.write(f"{h}\t{r}\t{t}\n")
    return path
