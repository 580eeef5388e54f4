"""Time the numba kernels against their pure-numpy twins.

    python benchmarks/bench_kernels.py [--vertices 3000] [--edges 8000] [--repeats 5]

Both backends are imported directly, so the CYCLEKIT_NUMBA flag does not
matter here. Outputs are compared before anything is timed.
"""

import argparse
import time

import numpy as np

from cyclekit import _kernels
from cyclekit.basis import build_spt, cycle_incidence_matrix, nontree_edges, spt_cycle_basis
from cyclekit.synthetic import random_multigraph
from cyclekit.z2 import pack_bits

numpy_backend = _kernels.numpy_backend
numba_backend = _kernels.numba_backend


def best_of(fn, repeats):
    times = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def same(a, b):
    if isinstance(a, tuple):
        return all(same(x, y) for x, y in zip(a, b))
    return np.array_equal(np.asarray(a), np.asarray(b))


def cases(kg, rng):
    indptr, adj_edge, adj_nbr = kg.adjacency
    roots = np.array([0], dtype=np.int64)
    tree = build_spt(kg, roots)
    nt = nontree_edges(kg, tree)
    basis = spt_cycle_basis(kg, tree)
    inc = cycle_incidence_matrix(basis, kg.num_edges)
    vals = rng.random(basis.nontree_edge.size)
    rows = np.stack([pack_bits(basis.cycle_edges(j), kg.num_edges) for j in range(min(len(basis), 400))])
    yield "bfs_forest", lambda b: b.bfs_forest(indptr, adj_edge, adj_nbr, kg.num_entities, roots)
    yield "spt_cycles", lambda b: b.spt_cycles(kg.heads, kg.tails, kg.relations, kg.num_relations,
                                               tree.parent, tree.parent_edge, tree.depth, nt)
    yield "cycle_topm", lambda b: b.cycle_topm(inc.col_ptr, inc.col_edges, inc.row_ptr, inc.row_cycles, 2)
    yield "segment_max", lambda b: b.segment_max(inc.row_ptr, inc.row_cycles, vals)
    yield "z2_eliminate", lambda b: b.z2_eliminate(rows)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--vertices", type=int, default=3000)
    ap.add_argument("--edges", type=int, default=8000)
    ap.add_argument("--repeats", type=int, default=5)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)
    if numba_backend is None:
        raise SystemExit("numba backend unavailable (CYCLEKIT_NUMBA disabled or numba missing)")
    rng = np.random.default_rng(args.seed)
    kg = random_multigraph(args.vertices, args.edges, 9, seed=args.seed)
    print(f"graph: |V|={kg.num_entities} |E|={kg.num_edges}")
    print(f"{'kernel':<14}{'numpy [ms]':>12}{'numba [ms]':>12}{'speedup':>10}")
    for name, run in cases(kg, rng):
        ref, got = run(numpy_backend), run(numba_backend)  # second call also warms the jit
        if not same(ref, got):
            raise SystemExit(f"{name}: backends disagree")
        t_np = best_of(lambda: run(numpy_backend), args.repeats)
        t_nb = best_of(lambda: run(numba_backend), args.repeats)
        print(f"{name:<14}{1e3 * t_np:>12.2f}{1e3 * t_nb:>12.2f}{t_np / t_nb:>9.1f}x")


if __name__ == "__main__":
    main()
