import json
import math
import time

import numpy as np
import pytest
from hypothesis import given, strategies as st
from sklearn.metrics import average_precision_score

from cyclekit.basis import build_all_bases
from cyclekit.metrics import (MetricsReport, PhaseTimer, UndefinedMetricError, auc_pr, hits_at_k,
                              mean_min_length, min_cycle_length, ranks, read_histogram, shortness_histogram,
                              write_histogram)

from helpers import graph_from

scores_labels = st.integers(2, 60).flatmap(lambda n: st.tuples(
    st.lists(st.integers(-10_000, 10_000).map(lambda v: v / 10), min_size=n, max_size=n),
    st.lists(st.integers(0, 1), min_size=n, max_size=n).filter(lambda y: any(y))))


def test_perfect_separation():
    assert auc_pr([0.9, 0.8, 0.2, 0.1], [1, 1, 0, 0]) == 1.0


def test_no_positives():
    with pytest.raises(UndefinedMetricError):
        auc_pr([0.3, 0.2], [0, 0])


def expected_random_ap(n, p):
    # closed form of E[AP] for a uniformly random ranking of p positives among n
    h = sum(1.0 / i for i in range(1, n + 1))
    return ((p - 1) / (n - 1) * (n - h) + h) / n


def test_constant_scores_give_prevalence(rng):
    labels = np.array([1] * 500 + [0] * 500)
    vals = [auc_pr(np.zeros(1000), rng.permutation(labels)) for _ in range(1000)]
    assert abs(np.mean(vals) - 0.5) < 0.02


def test_random_ranking_matches_closed_form(rng):
    labels = np.array([1] * 50 + [0] * 50)
    vals = [auc_pr(np.zeros(100), rng.permutation(labels)) for _ in range(4000)]
    assert abs(np.mean(vals) - expected_random_ap(100, 50)) < 0.005


def test_matches_sklearn_without_ties(rng):
    for _ in range(20):
        s = rng.random(80)
        y = rng.integers(0, 2, size=80)
        y[0] = 1
        assert auc_pr(s, y) == pytest.approx(average_precision_score(y, s), abs=1e-12)


@given(scores_labels)
def test_monotone_transform_invariance(data):
    s, y = np.array(data[0]), np.array(data[1])
    assert auc_pr(s, y) == auc_pr(np.tanh(s / 500) * 3 + 7, y)
    assert 0.0 <= auc_pr(s, y) <= 1.0


def test_hits_examples():
    neg = np.linspace(0, 1, 50)[None, :]
    assert hits_at_k([2.0], neg) == 1.0
    assert hits_at_k([-1.0], neg) == 0.0
    # 9 strictly above, 2 ties: rank = 1 + 9 + 1 = 11
    tied = np.array([[1.0] * 9 + [0.5, 0.5] + [0.0] * 39])
    assert ranks([0.5], tied).tolist() == [11]
    assert hits_at_k([0.5], tied, 10) == 0.0 and hits_at_k([0.5], tied, 11) == 1.0


def test_random_hit_rate(rng):
    pos = rng.random(10_000)
    neg = rng.random((10_000, 50))
    assert abs(hits_at_k(pos, neg, 10) - 10 / 51) < 0.01


@given(st.integers(0, 10**6))
def test_hits_non_decreasing_in_k(seed):
    rng = np.random.default_rng(seed)
    pos, neg = rng.integers(0, 5, 30).astype(float), rng.integers(0, 5, (30, 50)).astype(float)
    vals = [hits_at_k(pos, neg, k) for k in range(1, 52)]
    assert all(a <= b for a, b in zip(vals, vals[1:]))
    assert vals[-1] == 1.0


def test_per_round_reference_scores():
    pos = np.array([[0.5, 0.1]])
    neg = np.array([[0.4, 0.2]])
    assert ranks(pos, neg).tolist() == [2]


def test_shortness_bins():
    # triangle a-b-c plus a bridge c-d
    kg = graph_from([("a", "r", "b"), ("b", "r", "c"), ("a", "r", "c"), ("c", "r", "d")])
    bundles = build_all_bases(kg, 1)
    lengths = min_cycle_length(bundles, np.arange(4))
    assert lengths[:3].tolist() == [3, 3, 3] and np.isinf(lengths[3])
    hist = shortness_histogram(bundles, np.arange(4))
    assert hist == {3: 0.75, math.inf: 0.25}
    assert mean_min_length(lengths) == 3.0


def test_histogram_sums_to_one_and_round_trips(tmp_path, small_graph):
    bundles = build_all_bases(small_graph, 3)
    hist = shortness_histogram(bundles, np.arange(small_graph.num_edges))
    assert abs(sum(hist.values()) - 1) < 1e-12
    path = str(tmp_path / "h.csv")
    write_histogram(path, hist)
    assert read_histogram(path) == hist
    assert open(path).readline().strip() == "min_length,proportion"


def test_more_trees_never_lengthen_cycles(small_graph):
    edges = np.arange(small_graph.num_edges)
    one = min_cycle_length(build_all_bases(small_graph, 1), edges)
    many = build_all_bases(small_graph, 5)
    assert (min_cycle_length(many, edges) <= min_cycle_length(many[:1], edges)).all()
    assert np.array_equal(np.isinf(one), np.isinf(min_cycle_length(many, edges)))


def test_phase_timer():
    t = PhaseTimer()
    start = time.perf_counter()
    with t.phase("preparation"):
        time.sleep(0.01)
    with t.phase("training"):
        pass
    total = time.perf_counter() - start
    assert set(t.times) == {"preparation", "training", "inference"}
    assert 0.01 <= t.times["preparation"] and sum(t.times.values()) <= total
    assert t.times["inference"] == 0.0


def test_metrics_report():
    r = MetricsReport("d", "test", 20, 1, auc_pr=0.9, hits_at_10=0.5, phase_times={"training": 1.0})
    d = json.loads(r.to_json())
    assert {"dataset", "split", "k", "seed", "auc_pr", "hits_at_10", "phase_times"} <= set(d)
    assert "phase_times" not in json.loads(r.to_json(timing=False))
    with pytest.raises(ValueError):
        MetricsReport("d", "test", 1, 0, auc_pr=1.5)
