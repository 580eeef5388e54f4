from cyclekit.kg import build_graph


def graph_from(rows):
    """Build a graph from (h, r, t) tuples of ints or strings."""
    return build_graph([(str(h), str(r), str(t)) for h, r, t in rows])


def tiny_instance(seed, k=3, n=10, e=20, num_relations=3, n_pos=6, **config):
    """A small working graph with targets, its bases and a fresh model."""
    import numpy as np

    from cyclekit.basis import build_all_bases
    from cyclekit.kg import add_targets_to_graph, sample_negatives
    from cyclekit.nn import CycleModel, ModelConfig
    from cyclekit.synthetic import random_multigraph

    kg = random_multigraph(n, e, num_relations, seed=seed)
    ts = sample_negatives(kg, kg.triplet_array()[:n_pos], 1, seed=seed)
    wg = add_targets_to_graph(kg, ts)
    bundles = build_all_bases(wg.graph, k, seed=seed)
    config.setdefault("dropout", 0.0)
    model = CycleModel(ModelConfig(num_relations=kg.num_relations, k=k, **config), seed=seed)
    model.params["basis_logits"][:] = np.random.default_rng(seed).standard_normal(k)
    return model, model.prepare(bundles, wg.target_edges), ts.labels, (kg, ts, wg, bundles)
